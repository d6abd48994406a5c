import numpy as np
import pytest
from hypothesis import assume, given, strategies as st
from hypothesis.extra import numpy as hnp

import oracles
from volcopula import empirical as emp
from volcopula.errors import (BinningMismatch, DegenerateSeries, EmptyInput, LengthMismatch,
                              ModeInvalid, NoRetainedPoints, OutOfRange, SeriesTooShort)
from volcopula.histogram import CopulaHistogram
from volcopula.marketdata import StockSeries
from volcopula.synthetic import panel_series, sample_k_panel

small_ints = st.lists(st.integers(-5, 5), min_size=2, max_size=80)


def hist_of(x, y, bins=20):
    return emp.pair_copula(emp.quantile_transform(x, "a"), emp.quantile_transform(y, "b"), bins)


@given(small_ints)
def test_quantiles_match_counting_definition(values):
    qs = emp.quantile_transform(values)
    assert qs.q.tolist() == pytest.approx(oracles.quantiles(values), abs=1e-15)
    assert qs.ties == len(values) - len(set(values))


@given(hnp.arrays(np.int64, st.integers(2, 60), elements=st.integers(-1000, 1000)))
def test_quantiles_invariant_under_increasing_maps(x):
    q = emp.quantile_transform(x).q
    # exact in floating point, so strict order is preserved
    assert np.array_equal(q, emp.quantile_transform(x.astype(float) ** 3 + 2.0 * x - 5).q)
    assert np.all((q > 0) & (q < 1))


def test_quantiles_distinct_values_and_errors():
    q = emp.quantile_transform([3.0, 1.0, 2.0]).q
    assert q.tolist() == pytest.approx([5 / 6, 1 / 6, 3 / 6])
    with pytest.raises(EmptyInput):
        emp.quantile_transform([1.0])


@given(st.lists(st.tuples(st.integers(-3, 3), st.floats(-2, 2)), min_size=2, max_size=120))
def test_pair_histogram_matches_loop(rows):
    x, y = zip(*rows)
    h = hist_of(x, y)
    expect = oracles.histogram(oracles.quantiles(list(x)), oracles.quantiles(list(y)), 20)
    np.testing.assert_allclose(h.density, expect, atol=1e-12)
    assert h.density.sum() / 400 == pytest.approx(1, abs=1e-12)
    assert h.n_samples == len(rows)


def test_tie_free_histogram_has_exact_uniform_margins():
    rng = np.random.default_rng(1)
    x, y = rng.standard_normal(400), rng.standard_normal(400)
    h = hist_of(x, y)
    np.testing.assert_allclose(h.mass.sum(axis=0), 1 / 20, atol=1e-15)
    np.testing.assert_allclose(h.mass.sum(axis=1), 1 / 20, atol=1e-15)
    with pytest.raises(LengthMismatch):
        emp.pair_copula(emp.quantile_transform(x), emp.quantile_transform(y[:-1]))


def test_corner_statistics_of_reference_copulas():
    flat = CopulaHistogram(np.ones((20, 20)), 400)
    assert emp.corner_asymmetries(flat) == pytest.approx((0, 0, 0), abs=1e-15)
    t = np.arange(2000.0)
    assert emp.corner_asymmetries(hist_of(t, t)) == pytest.approx((0, 0, 0.4), abs=1e-15)
    assert emp.corner_asymmetries(hist_of(t, -t)) == pytest.approx((0, 0, -0.4), abs=1e-15)
    with pytest.raises(BinningMismatch):
        emp.corner_asymmetries(CopulaHistogram(np.ones((12, 12))))


@given(hnp.arrays(float, (20, 20), elements=st.floats(0, 5)))
def test_corner_statistics_match_block_sums(d):
    h = CopulaHistogram(d)
    got = emp.corner_asymmetries(h)
    assert got == pytest.approx(oracles.corners(d.tolist()), abs=1e-12)
    a, b, g = emp.corner_asymmetries(h.transpose())
    assert (a, b, g) == pytest.approx((got[0], -got[1], got[2]), abs=1e-12)
    # point reflection swaps the two diagonal corners
    r = emp.corner_asymmetries(h.reflect())
    assert r == pytest.approx((-got[0], -got[1], got[2]), abs=1e-12)


@given(st.lists(st.floats(-10, 10), min_size=3, max_size=50))
def test_skewness_matches_direct_moments(xs):
    x = np.array(xs)
    assume(np.std(x) > 1e-3)
    assert emp.skewness(x) == pytest.approx(oracles.skew(xs), rel=1e-9, abs=1e-9)


def test_skewness_errors():
    with pytest.raises(DegenerateSeries):
        emp.skewness([1.0, 1.0, 1.0])
    with pytest.raises(DegenerateSeries):
        emp.skewness([1.0])


def test_asymmetry_summary():
    rng = np.random.default_rng(2)
    hs = [hist_of(rng.standard_normal(200), rng.standard_normal(200)) for _ in range(5)]
    s = emp.asymmetry_distributions(hs, [("a", str(i)) for i in range(5)])
    assert len(s.alpha) == len(s.beta) == len(s.gamma) == 5
    assert np.all(np.abs(s.alpha) <= 1)
    assert s.table().splitlines()[0] == "k,l,alpha,beta,gamma"
    assert s.histograms["alpha"]["edges"].size == 61
    t = np.arange(100.0)
    flat = emp.asymmetry_distributions([hist_of(t, t), hist_of(t, t)])
    assert flat.skew_alpha is None and "skew_alpha" in flat.errors
    with pytest.raises(EmptyInput):
        emp.asymmetry_distributions(hs[:1])


def test_average_and_symmetrized_average():
    rng = np.random.default_rng(3)
    hs = [hist_of(rng.standard_normal(300), rng.standard_normal(300)) for _ in range(4)]
    avg = emp.average_copula(hs)
    np.testing.assert_allclose(avg.density, np.mean([h.density for h in hs], axis=0))
    sym = emp.symmetrized_average_copula(hs)
    np.testing.assert_allclose(sym.density, sym.density.T)
    both = emp.average_copula(hs + [h.transpose() for h in hs])
    np.testing.assert_allclose(sym.density, both.density, atol=1e-12)
    with pytest.raises(BinningMismatch):
        emp.average_copula([hs[0], CopulaHistogram(np.ones((10, 10)))])
    with pytest.raises(EmptyInput):
        emp.average_copula([])


def _series_with_noise(noise, imbalance=None, sym="A"):
    noise = np.asarray(noise, dtype=float)
    n = noise.size
    imb = np.arange(n, dtype=float) if imbalance is None else imbalance
    return StockSeries(sym, np.arange(n) * 60, imb, noise, noise ** 2, np.full(n, 2))


def test_thresholds_extremes_and_ties():
    s = _series_with_noise([3.0, 1.0, 5.0, 2.0, 4.0])
    t = emp.conditioning_thresholds(s, 1)
    assert (t.sigma_max_cut, t.sigma_min_cut) == (5.0, 1.0)
    assert t.top.tolist() == [120] and t.bottom.tolist() == [60]
    flat = emp.conditioning_thresholds(_series_with_noise(np.ones(10)), 3)
    assert flat.top.tolist() == [0, 60, 120] and flat.bottom.tolist() == [0, 60, 120]
    assert flat.keep_small(np.arange(10) * 60).sum() == 7
    zero = emp.conditioning_thresholds(s, 0)
    assert zero.keep_small(s.start).all() and zero.keep_large(s.start).all()
    with pytest.raises(SeriesTooShort):
        emp.conditioning_thresholds(s, 3)
    with pytest.raises(OutOfRange):
        emp.conditioning_thresholds(s, -1)


def test_conditional_modes():
    rng = np.random.default_rng(4)
    n = 400
    noise_a, noise_b = rng.random(n), rng.random(n)
    # the five largest noise values of both stocks fall on the same intervals
    noise_a[:5] += 10
    noise_b[:5] += 10
    a = _series_with_noise(noise_a, rng.standard_normal(n), "A")
    b = _series_with_noise(noise_b, rng.standard_normal(n), "B")
    qa = emp.quantile_transform(a.imbalance, "A", a.start)
    qb = emp.quantile_transform(b.imbalance, "B", b.start)
    unc = emp.pair_copula(qa, qb)
    t0a, t0b = emp.conditioning_thresholds(a, 0), emp.conditioning_thresholds(b, 0)
    for mode in emp.MODES:
        c = emp.conditional_copula(qa, qb, t0a, t0b, mode)
        assert np.array_equal(c.density, unc.density)
    ta, tb = emp.conditioning_thresholds(a, 5), emp.conditioning_thresholds(b, 5)
    ss = emp.conditional_copula(qa, qb, ta, tb, "ss")
    assert ss.n_samples == n - 5
    keep = np.ones(n, bool)
    keep[:5] = False
    assert np.array_equal(ss.density, emp.pair_copula(qa, qb, keep=keep).density)
    d = emp.copula_difference(unc, ss)
    assert d.sum() / 400 == pytest.approx(0, abs=1e-12)
    assert emp.DELTA_LABEL["ss"] == "ll"
    with pytest.raises(ModeInvalid):
        emp.conditional_copula(qa, qb, ta, tb, "xx")
    ta_all = emp.ConditioningThresholds("A", n, 0, 0, a.start, a.start)
    with pytest.raises(NoRetainedPoints):
        emp.conditional_copula(qa, qb, ta_all, tb, "ss")


@given(st.floats(0, 1), st.floats(0, 1))
def test_effective_weight_four_term_expansion(pa, pb):
    w = emp.effective_weight(pa, pb)
    assert w == pytest.approx(oracles.effective_weight(pa, pb), abs=1e-12)
    assert -1 - 1e-15 <= w <= 1 + 1e-15


def test_effective_weight_corners():
    assert emp.effective_weight(0.5, 0.5) == 0
    assert emp.effective_weight(1, 1) == 1 and emp.effective_weight(0, 0) == 1
    assert emp.effective_weight(1, 0) == -1
    np.testing.assert_allclose(emp.effective_weight([0.5, 1], [0.2, 1]), [0, 1])
    with pytest.raises(OutOfRange):
        emp.effective_weight(1.2, 0.5)


def test_pb_noise_correlation():
    rng = np.random.default_rng(5)
    nu = rng.standard_normal(500)
    s = _series_with_noise(np.abs(nu) + 0.01 * rng.random(500), nu)
    assert emp.pb_noise_correlation(s) > 0.99
    with pytest.raises(DegenerateSeries):
        emp.pb_noise_correlation(s.take(slice(0, 10)))
    with pytest.raises(DegenerateSeries):
        emp.pb_noise_correlation(_series_with_noise(np.ones(50)))


def test_bimodality_flags():
    rng = np.random.default_rng(6)
    mix = np.concatenate([rng.normal(-3, 1, 1000), rng.normal(3, 1, 1000)])
    assert emp.is_bimodal(mix)
    assert not emp.is_bimodal(rng.standard_normal(2000))
    assert not emp.is_bimodal(rng.normal(2, 1, 2000))
    assert not emp.is_bimodal([])


def test_bimodality_profile_statuses():
    rng = np.random.default_rng(7)
    n = 3000
    noise = np.abs(rng.standard_normal(n))
    nu = rng.standard_normal(n)
    prof = emp.bimodality_profile(_series_with_noise(noise, nu))
    assert [(b.lo, b.hi) for b in prof] == list(emp.DEFAULT_BANDS)
    assert sum(b.count for b in prof) == n
    assert {b.status for b in prof} <= {"ok", "sparse", "empty"}
    assert not any(b.bimodal for b in prof)
    for b in prof:
        if b.count:
            assert np.sum(b.density * np.diff(b.edges)) == pytest.approx(1)


def test_shared_grid_and_aligned_paths_agree():
    x, _ = sample_k_panel(4, 600, 0.3, 6.72, seed=8)
    ser = panel_series(x)
    shared = emp.build_pairs(ser)
    assert shared.stock_quantiles is not None
    # a trailing interval present in one stock only forces per-pair alignment
    extra = ser[0].take(np.r_[np.arange(600), 599])
    extra.start[-1] += 60
    extra.imbalance[-1] = 1e6
    aligned = emp.build_pairs([extra] + ser[1:])
    assert aligned.stock_quantiles is None
    assert aligned.diagnostics["unmatched_dropped"] == 3
    np.testing.assert_allclose(shared.correlations, aligned.correlations, atol=1e-12)
    for mode, thr in (("unconditional", None),
                      ("ll", [emp.conditioning_thresholds(s, 20) for s in ser])):
        h1 = emp.pair_histograms(shared, mode, thr)
        h2 = emp.pair_histograms(aligned, mode, thr)
        for u, v in zip(h1, h2):
            assert np.array_equal(u.density, v.density)
    assert shared.labels()[0] == ("S000", "S001")
    with pytest.raises(EmptyInput):
        emp.build_pairs(ser[:1])
    with pytest.raises(ModeInvalid):
        emp.pair_correlation(x[0], x[1], "kendall")


def test_spearman_estimator():
    x, _ = sample_k_panel(3, 500, 0.5, 6.72, seed=9)
    ps = emp.build_pairs(panel_series(x), estimator="spearman")
    q0 = emp.quantile_transform(x[0]).q
    q1 = emp.quantile_transform(x[1]).q
    assert ps.correlations[0] == pytest.approx(np.corrcoef(q0, q1)[0, 1], abs=1e-12)


def test_shuffle_robustness():
    t = np.arange(200.0)
    sym = [hist_of(t, t), hist_of(t, -t)]
    for h, lab in zip(sym, [("A", "B"), ("A", "C")]):
        h.meta["pair"] = list(lab)
    r = emp.shuffle_robustness(sym, seed=1)
    assert r.max_bin_deviation == 0
    x, _ = sample_k_panel(6, 2000, 0.2, 6.72, seed=10)
    hs = emp.pair_histograms(emp.build_pairs(panel_series(x)))
    r1 = emp.shuffle_robustness(hs, seed=3)
    r2 = emp.shuffle_robustness(hs, seed=3)
    assert r1.permutation == r2.permutation
    assert np.array_equal(r1.shuffled.density, r2.shuffled.density)
    assert sorted(r1.permutation) == [f"S{k:03d}" for k in range(6)]
    for h, flip in zip(hs, r1.flipped):
        a, b = h.meta["pair"]
        assert flip == (r1.permutation.index(a) > r1.permutation.index(b))
    assert r1.max_bin_deviation < 1.0
    assert set(r1.skew_deltas) == {"skew_alpha", "skew_beta"}
    with pytest.raises(EmptyInput):
        emp.shuffle_robustness([], seed=1)
