import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

import oracles
from volcopula import kernels

BACKENDS = kernels.backends()
IMPLS = list(BACKENDS.values())
IDS = list(BACKENDS)


def test_compiled_backend_available():
    # the package is built with the extension; the fallback is always present
    assert "python" in BACKENDS
    assert kernels.BACKEND in BACKENDS


@pytest.mark.parametrize("impl", IMPLS, ids=IDS)
@given(prices=st.lists(st.sampled_from([9.99, 10.0, 10.01, 10.02]), max_size=60),
       seed=st.sampled_from([1, -1]))
def test_chain_signs_matches_tick_rule(impl, prices, seed):
    got = kernels.chain_signs(prices, seed, impl=impl)
    assert got.tolist() == oracles.tick_signs(prices, seed)


@pytest.mark.parametrize("impl", IMPLS, ids=IDS)
@given(sizes=st.lists(st.integers(1, 6), min_size=1, max_size=12), data=st.data())
def test_bucket_stats_matches_direct_sums(impl, sizes, data):
    keys = np.repeat(np.arange(len(sizes)) * 3, sizes)
    x = np.array(data.draw(st.lists(st.integers(-500, 500), min_size=keys.size,
                                    max_size=keys.size)), dtype=float)
    uk, total, mad, msd, n = kernels.bucket_stats(keys, x, impl=impl)
    assert uk.tolist() == sorted(set(keys.tolist()))
    assert n.tolist() == sizes
    start = 0
    for i, size in enumerate(sizes):
        s, a, q = oracles.bucket_moments(x[start:start + size].tolist())
        assert total[i] == s
        assert mad[i] == pytest.approx(a, abs=1e-9)
        assert msd[i] == pytest.approx(q, abs=1e-7)
        start += size


def test_bucket_stats_empty():
    for impl in IMPLS:
        uk, total, *_ = kernels.bucket_stats([], [], impl=impl)
        assert uk.size == 0 and total.size == 0


@pytest.mark.parametrize("impl", IMPLS, ids=IDS)
@given(idx=hnp.arrays(np.int16, st.tuples(st.integers(2, 5), st.integers(1, 40)),
                      elements=st.integers(0, 4)),
       data=st.data())
def test_pair_counts_batch_matches_loop(impl, idx, data):
    L, T = idx.shape
    masked = data.draw(st.booleans())
    kf = ks = None
    if masked:
        kf = data.draw(hnp.arrays(np.bool_, (L, T)))
        ks = data.draw(hnp.arrays(np.bool_, (L, T)))
    got = kernels.pair_counts_batch(idx, 5, kf, ks, impl=impl)
    p = 0
    for k in range(L):
        for l in range(k + 1, L):
            expect = np.zeros((5, 5), np.int64)
            for t in range(T):
                if not masked or (kf[k, t] and ks[l, t]):
                    expect[idx[k, t], idx[l, t]] += 1
            assert np.array_equal(got[p], expect)
            single = kernels.pair_counts(idx[k], idx[l], 5,
                                         None if not masked else kf[k] & ks[l], impl=impl)
            assert np.array_equal(single, expect)
            p += 1


def test_backends_agree_on_large_input():
    if len(IMPLS) < 2:
        pytest.skip("compiled extension not built")
    rng = np.random.default_rng(0)
    prices = np.round(100 + np.cumsum(rng.integers(-1, 2, 20000)) * 0.01, 2)
    a, b = (kernels.chain_signs(prices, 1, impl=i) for i in IMPLS)
    assert np.array_equal(a, b)
    keys = np.sort(rng.integers(0, 500, 20000))
    x = rng.standard_normal(20000) * 100
    ra, rb = (kernels.bucket_stats(keys, x, impl=i) for i in IMPLS)
    for u, v in zip(ra, rb):
        np.testing.assert_allclose(u, v, rtol=1e-12, atol=1e-9)
    idx = rng.integers(0, 20, (6, 3000)).astype(np.int16)
    ca, cb = (kernels.pair_counts_batch(idx, 20, impl=i) for i in IMPLS)
    assert np.array_equal(ca, cb)


def test_mask_arguments_must_pair():
    with pytest.raises(ValueError):
        kernels.pair_counts_batch(np.zeros((2, 3)), 5, keep_first=np.ones((2, 3), bool))
