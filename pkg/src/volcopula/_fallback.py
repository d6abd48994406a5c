"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``."""
import numpy as np


def chain_signs(prices, seed_sign):
    prices = np.asarray(prices, dtype=float)
    out = np.empty(prices.size, dtype=np.int8)
    if prices.size == 0:
        return out
    step = np.sign(np.diff(prices)).astype(np.int8)
    raw = np.concatenate(([1 if seed_sign > 0 else -1], step)).astype(np.int8)
    # zero ticks inherit the last nonzero sign: forward fill by index
    pos = np.where(raw != 0, np.arange(raw.size), 0)
    np.maximum.accumulate(pos, out=pos)
    out[:] = raw[pos]
    return out


def bucket_stats(keys, x):
    keys = np.asarray(keys, dtype=np.int64)
    x = np.asarray(x, dtype=float)
    if keys.size == 0:
        empty = np.empty(0)
        return keys.copy(), empty, empty.copy(), empty.copy(), np.empty(0, np.int64)
    starts = np.flatnonzero(np.concatenate(([True], keys[1:] != keys[:-1])))
    counts = np.diff(np.append(starts, keys.size))
    total = np.add.reduceat(x, starts)
    mean = total / counts
    dev = x - np.repeat(mean, counts)
    mad = np.add.reduceat(np.abs(dev), starts) / counts
    msd = np.add.reduceat(dev * dev, starts) / counts
    return keys[starts], total, mad, msd, counts.astype(np.int64)


def pair_counts(ia, ib, keep, bins):
    ia = np.asarray(ia, dtype=np.intp)
    ib = np.asarray(ib, dtype=np.intp)
    code = ia * bins + ib
    if keep is not None:
        code = code[np.asarray(keep, dtype=bool)]
    return np.bincount(code, minlength=bins * bins).astype(np.int64).reshape(bins, bins)


def pair_counts_batch(idx, keep_first, keep_second, bins):
    idx = np.asarray(idx)
    L = idx.shape[0]
    out = np.zeros((L * (L - 1) // 2, bins, bins), dtype=np.int64)
    p = 0
    for k in range(L - 1):
        for l in range(k + 1, L):
            keep = None
            if keep_first is not None:
                keep = np.logical_and(keep_first[k], keep_second[l])
            out[p] = pair_counts(idx[k], idx[l], keep, bins)
            p += 1
    return out
