# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops.  Signatures mirror ``_fallback``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


def chain_signs(const double[::1] prices, int seed_sign):
    cdef Py_ssize_t n = prices.shape[0], i
    out = np.empty(n, dtype=np.int8)
    cdef signed char[::1] s = out
    cdef signed char prev
    if n == 0:
        return out
    prev = 1 if seed_sign > 0 else -1
    s[0] = prev
    for i in range(1, n):
        if prices[i] > prices[i - 1]:
            prev = 1
        elif prices[i] < prices[i - 1]:
            prev = -1
        s[i] = prev
    return out


def bucket_stats(const long long[::1] keys, const double[::1] x):
    cdef Py_ssize_t n = keys.shape[0], i, j, start, g = 0
    cdef Py_ssize_t ngroups = 0
    cdef double total, mean, mad, msd, d
    for i in range(n):
        if i == 0 or keys[i] != keys[i - 1]:
            ngroups += 1
    out_keys = np.empty(ngroups, dtype=np.int64)
    out_sum = np.empty(ngroups)
    out_mad = np.empty(ngroups)
    out_msd = np.empty(ngroups)
    out_n = np.empty(ngroups, dtype=np.int64)
    cdef long long[::1] ok = out_keys
    cdef double[::1] osum = out_sum, omad = out_mad, omsd = out_msd
    cdef long long[::1] on = out_n
    start = 0
    while start < n:
        j = start
        total = 0.0
        while j < n and keys[j] == keys[start]:
            total += x[j]
            j += 1
        mean = total / (j - start)
        mad = 0.0
        msd = 0.0
        for i in range(start, j):
            d = x[i] - mean
            mad += fabs(d)
            msd += d * d
        ok[g] = keys[start]
        osum[g] = total
        omad[g] = mad / (j - start)
        omsd[g] = msd / (j - start)
        on[g] = j - start
        g += 1
        start = j
    return out_keys, out_sum, out_mad, out_msd, out_n


def pair_counts(const short[::1] ia, const short[::1] ib, keep, int bins):
    cdef Py_ssize_t n = ia.shape[0], t
    out = np.zeros((bins, bins), dtype=np.int64)
    cdef long long[:, ::1] c = out
    cdef const unsigned char[::1] k
    if keep is None:
        for t in range(n):
            c[ia[t], ib[t]] += 1
    else:
        k = keep
        for t in range(n):
            if k[t]:
                c[ia[t], ib[t]] += 1
    return out


def pair_counts_batch(const short[:, ::1] idx, keep_first, keep_second, int bins):
    cdef Py_ssize_t L = idx.shape[0], T = idx.shape[1]
    cdef Py_ssize_t k, l, t, p = 0
    out = np.zeros((L * (L - 1) // 2, bins, bins), dtype=np.int64)
    cdef long long[:, :, ::1] c = out
    cdef const unsigned char[:, ::1] kf
    cdef const unsigned char[:, ::1] ks
    cdef bint masked = keep_first is not None
    if masked:
        kf = keep_first
        ks = keep_second
    for k in range(L - 1):
        for l in range(k + 1, L):
            if masked:
                for t in range(T):
                    if kf[k, t] and ks[l, t]:
                        c[p, idx[k, t], idx[l, t]] += 1
            else:
                for t in range(T):
                    c[p, idx[k, t], idx[l, t]] += 1
            p += 1
    return out
