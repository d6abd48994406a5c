"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each kernel runs on the same inputs under every available backend; results
are checked for agreement before timings are reported.
"""
import argparse
import time

import numpy as np

from volcopula import kernels


def make_inputs(rng):
    n_trades = 2_000_000
    prices = 50 * np.exp(1e-4 * np.cumsum(rng.choice([-1, 0, 1], n_trades)))
    keys = np.sort(rng.integers(0, n_trades // 20, n_trades))
    x = rng.standard_normal(n_trades) * 100
    ia, ib = rng.integers(0, 20, (2, 1_000_000))
    keep = rng.random(1_000_000) > 0.01
    idx = rng.integers(0, 20, (40, 50_000))
    kf = rng.random(idx.shape) > 0.01
    ks = rng.random(idx.shape) > 0.01
    return {
        "chain_signs": lambda impl: kernels.chain_signs(prices, 1, impl=impl),
        "bucket_stats": lambda impl: kernels.bucket_stats(keys, x, impl=impl),
        "pair_counts": lambda impl: kernels.pair_counts(ia, ib, 20, keep, impl=impl),
        "pair_counts_batch": lambda impl: kernels.pair_counts_batch(idx, 20, impl=impl),
        "pair_counts_batch_masked":
            lambda impl: kernels.pair_counts_batch(idx, 20, kf, ks, impl=impl),
    }


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def same(a, b):
    if isinstance(a, tuple):
        return all(same(u, v) for u, v in zip(a, b))
    a, b = np.asarray(a), np.asarray(b)
    if a.dtype.kind == "f":
        return np.allclose(a, b, rtol=1e-12, atol=1e-9)
    return np.array_equal(a, b)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    impls = kernels.backends()
    if "compiled" not in impls:
        print("compiled extension not built; timing the fallback only")
    cases = make_inputs(np.random.default_rng(args.seed))
    names = list(impls)
    print(f"{'kernel':26s}" + "".join(f"{n:>12s}" for n in names) + f"{'speedup':>10s}")
    for label, fn in cases.items():
        results = {n: best_time(lambda: fn(impls[n]), args.repeat) for n in names}
        if len(names) > 1 and not same(results["python"][1], results["compiled"][1]):
            raise SystemExit(f"{label}: backends disagree")
        row = f"{label:26s}" + "".join(f"{results[n][0] * 1e3:10.1f}ms" for n in names)
        if "compiled" in results:
            row += f"{results['python'][0] / results['compiled'][0]:9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
