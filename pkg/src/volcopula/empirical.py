"""Empirical copula densities of volume imbalances and their asymmetries."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import (BinningMismatch, DegenerateSeries, EmptyInput, LengthMismatch,
                     ModeInvalid, NoRetainedPoints, OutOfRange, SeriesTooShort)
from .histogram import DEFAULT_BINS, CopulaHistogram
from .marketdata import StockSeries, align_with_diagnostics, normalize_series

MODES = ("ss", "ll", "sl", "ls")
# conditional mode whose difference from the unconditional copula carries each label
DELTA_LABEL = {"ss": "ll", "ll": "ss", "sl": "ls", "ls": "sl"}
CORNER = 0.2


@dataclass
class QuantileSeries:
    symbol: str
    timestamps: np.ndarray
    q: np.ndarray
    ties: int = 0

    def __len__(self):
        return self.q.size


def quantile_transform(values, symbol: str = "", timestamps=None) -> QuantileSeries:
    """Empirical CDF with a half-step offset.

    ``q(t) = #{tau : x(tau) <= x(t)} / T - 1 / (2T)``; tied values share the
    largest rank, so distinct inputs map to ``(i - 1/2) / T``.
    """
    x = np.asarray(values, dtype=float)
    T = x.size
    if T < 2:
        raise EmptyInput("quantile transform needs at least two values")
    s = np.sort(x)
    q = np.searchsorted(s, x, side="right") / T - 0.5 / T
    ties = int(T - np.unique(s).size)
    ts = np.arange(T) if timestamps is None else np.asarray(timestamps)
    return QuantileSeries(symbol, ts, q, ties)


def bin_index(q, bins: int = DEFAULT_BINS) -> np.ndarray:
    """Cell of each quantile; a point on an inner edge goes to the upper cell."""
    idx = np.floor(np.asarray(q) * bins).astype(np.intp)
    return np.clip(idx, 0, bins - 1)


def pair_copula(qa: QuantileSeries, qb: QuantileSeries, bins: int = DEFAULT_BINS,
                keep=None, meta=None) -> CopulaHistogram:
    """Binned copula density of two aligned quantile series."""
    if len(qa) != len(qb):
        raise LengthMismatch(f"{len(qa)} vs {len(qb)} observations")
    counts = kernels.pair_counts(bin_index(qa.q, bins), bin_index(qb.q, bins), bins, keep)
    info = {"pair": [qa.symbol, qb.symbol], "conditioning": "unconditional",
            "order": "preset"}
    info.update(meta or {})
    return CopulaHistogram.from_counts(counts, info)


def _check_binning(pairs):
    pairs = list(pairs)
    if not pairs:
        raise EmptyInput("no histograms to average")
    shape = pairs[0].density.shape
    for h in pairs[1:]:
        if h.density.shape != shape:
            raise BinningMismatch(f"{h.density.shape} vs {shape}")
    return pairs


def _average_meta(pairs, symmetrized):
    orders = sorted({h.meta.get("order", "preset") for h in pairs})
    conds = sorted({h.meta.get("conditioning", "unconditional") for h in pairs})
    return {"pairs": len(pairs), "order": orders[0] if len(orders) == 1 else orders,
            "conditioning": conds[0] if len(conds) == 1 else conds,
            "symmetrized": symmetrized}


def average_copula(pairs) -> CopulaHistogram:
    """Bin-wise mean over stock pairs, each pair in its given orientation."""
    pairs = _check_binning(pairs)
    density = np.mean([h.density for h in pairs], axis=0)
    return CopulaHistogram(density, sum(h.n_samples for h in pairs),
                           _average_meta(pairs, False))


def symmetrized_average_copula(pairs) -> CopulaHistogram:
    """Mean over both orientations of every pair; equal to its own transpose."""
    pairs = _check_binning(pairs)
    density = np.mean([h.density for h in pairs], axis=0)
    density = (density + density.T) / 2
    return CopulaHistogram(density, sum(h.n_samples for h in pairs),
                           _average_meta(pairs, True))


def _corner_cells(bins):
    c = CORNER * bins
    k = int(round(c))
    if k < 1 or abs(c - k) > 1e-9:
        raise BinningMismatch(f"{bins} bins cannot resolve corners of width {CORNER}")
    return k


def corner_masses(h: CopulaHistogram) -> dict:
    """Copula mass in the four 0.2 x 0.2 corners: 'll', 'hh', 'lh', 'hl' (q1 then q2)."""
    k = _corner_cells(h.bins)
    m = h.mass
    return {"ll": m[:k, :k].sum(), "hh": m[-k:, -k:].sum(),
            "lh": m[:k, -k:].sum(), "hl": m[-k:, :k].sum()}


def corner_asymmetries(h: CopulaHistogram) -> tuple[float, float, float]:
    """(alpha, beta, gamma) corner statistics of a binned copula.

    alpha contrasts the upper and lower diagonal corners, beta the
    (low q1, high q2) and (high q1, low q2) corners, gamma the diagonal
    corners against the anti-diagonal ones.
    """
    c = corner_masses(h)
    alpha = c["hh"] - c["ll"]
    beta = c["lh"] - c["hl"]
    gamma = (c["hh"] + c["ll"]) - (c["lh"] + c["hl"])
    return float(alpha), float(beta), float(gamma)


def skewness(x) -> float:
    """Population skewness <(x - mu)**3> / sigma**3."""
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        raise DegenerateSeries("skewness needs at least two values")
    d = x - x.mean()
    var = np.mean(d * d)
    if not var > 0:
        raise DegenerateSeries("skewness of a constant sample")
    return float(np.mean(d ** 3) / var ** 1.5)


@dataclass
class AsymmetrySummary:
    labels: list
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    skew_alpha: float | None
    skew_beta: float | None
    histograms: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)

    def table(self) -> str:
        lines = ["k,l,alpha,beta,gamma"]
        for (k, l), a, b, g in zip(self.labels, self.alpha, self.beta, self.gamma):
            lines.append(f"{k},{l},{a:.17g},{b:.17g},{g:.17g}")
        return "\n".join(lines) + "\n"


def asymmetry_histogram(values, bin_width: float = 0.01, span: float = 0.3):
    """Unit-area histogram on [-span, span]; values outside are counted, not binned."""
    nb = int(round(2 * span / bin_width))
    edges = np.linspace(-span, span, nb + 1)
    values = np.asarray(values, dtype=float)
    inside = (values >= -span) & (values <= span)
    counts, _ = np.histogram(values[inside], bins=edges)
    total = counts.sum()
    density = counts / (total * bin_width) if total else np.zeros(nb)
    return {"edges": edges, "density": density, "outside": int((~inside).sum())}


def asymmetry_distributions(pairs, labels=None, bin_width: float = 0.01,
                            span: float = 0.3) -> AsymmetrySummary:
    """Per-pair corner statistics, their histograms and skewness."""
    pairs = list(pairs)
    if len(pairs) < 2:
        raise EmptyInput("asymmetry distributions need at least two pairs")
    if labels is None:
        labels = [tuple(h.meta.get("pair", (i, ""))) for i, h in enumerate(pairs)]
    stats = np.array([corner_asymmetries(h) for h in pairs])
    alpha, beta, gamma = stats.T
    errors = {}
    skews = {}
    for name, vals in (("alpha", alpha), ("beta", beta)):
        try:
            skews[name] = skewness(vals)
        except DegenerateSeries as exc:
            skews[name] = None
            errors[f"skew_{name}"] = f"DegenerateSeries: {exc}"
    hists = {name: asymmetry_histogram(v, bin_width, span)
             for name, v in (("alpha", alpha), ("beta", beta), ("gamma", gamma))}
    return AsymmetrySummary(list(labels), alpha, beta, gamma, skews["alpha"], skews["beta"],
                            hists, errors)


@dataclass
class ConditioningThresholds:
    """Extreme-noise exclusions of one stock.

    ``top`` and ``bottom`` hold the interval starts of the ``m`` largest and
    ``m`` smallest noise values; ties go to the earlier interval first.
    """

    symbol: str
    m: int
    sigma_max_cut: float
    sigma_min_cut: float
    top: np.ndarray
    bottom: np.ndarray

    def keep_small(self, timestamps) -> np.ndarray:
        """Intervals below the large-noise cut (top ``m`` excluded)."""
        return ~np.isin(timestamps, self.top)

    def keep_large(self, timestamps) -> np.ndarray:
        """Intervals above the small-noise cut (bottom ``m`` excluded)."""
        return ~np.isin(timestamps, self.bottom)

    def keep(self, timestamps, side: str) -> np.ndarray:
        return self.keep_small(timestamps) if side == "s" else self.keep_large(timestamps)


def conditioning_thresholds(s: StockSeries, m: int = 50) -> ConditioningThresholds:
    if m < 0:
        raise OutOfRange("exclusion count must be non-negative")
    n = len(s)
    if n <= 2 * m:
        raise SeriesTooShort(f"{s.symbol}: {n} intervals cannot drop 2 x {m}")
    sigma = s.noise_abs
    # lexsort: last key is primary; ties resolved by earlier start
    top = np.lexsort((s.start, -sigma))[:m]
    bottom = np.lexsort((s.start, sigma))[:m]
    max_cut = float(sigma[top].min()) if m else np.inf
    min_cut = float(sigma[bottom].max()) if m else -np.inf
    return ConditioningThresholds(s.symbol, m, max_cut, min_cut,
                                  np.sort(s.start[top]), np.sort(s.start[bottom]))


def mode_masks(mode: str, timestamps, thr_a: ConditioningThresholds,
               thr_b: ConditioningThresholds):
    if mode not in MODES:
        raise ModeInvalid(f"mode must be one of {MODES}, got {mode!r}")
    return thr_a.keep(timestamps, mode[0]), thr_b.keep(timestamps, mode[1])


def conditional_copula(qa: QuantileSeries, qb: QuantileSeries, thr_a: ConditioningThresholds,
                       thr_b: ConditioningThresholds, mode: str,
                       bins: int = DEFAULT_BINS) -> CopulaHistogram:
    """Copula of the original quantiles restricted by the mode's two noise conditions."""
    if len(qa) != len(qb):
        raise LengthMismatch(f"{len(qa)} vs {len(qb)} observations")
    ka, kb = mode_masks(mode, qa.timestamps, thr_a, thr_b)
    keep = ka & kb
    if not keep.any():
        raise NoRetainedPoints(f"mode {mode} leaves no observations")
    return pair_copula(qa, qb, bins, keep, {"conditioning": mode})


def copula_difference(unconditional: CopulaHistogram,
                      conditional: CopulaHistogram) -> np.ndarray:
    """Unconditional minus conditional density.

    The result for conditional mode ``x`` is labelled ``DELTA_LABEL[x]``.
    """
    unconditional.check_same_binning(conditional)
    return unconditional.density - conditional.density


def effective_weight(p_plus_a, p_plus_b):
    """Sign-agreement weight 4 pa pb - 2 pa - 2 pb + 1 of two buy-surplus probabilities."""
    pa = np.asarray(p_plus_a, dtype=float)
    pb = np.asarray(p_plus_b, dtype=float)
    if np.any((pa < 0) | (pa > 1) | (pb < 0) | (pb > 1)):
        raise OutOfRange("probabilities must lie in [0, 1]")
    w = 4 * pa * pb - 2 * pa - 2 * pb + 1
    return float(w) if w.ndim == 0 else w


def pb_noise_correlation(s: StockSeries) -> float:
    """Pearson correlation between the noise intensity and the absolute imbalance."""
    if len(s) < 30:
        raise DegenerateSeries(f"{s.symbol}: need at least 30 intervals")
    a = s.noise_abs
    b = np.abs(s.imbalance)
    if a.std() == 0 or b.std() == 0:
        raise DegenerateSeries(f"{s.symbol}: constant noise or imbalance")
    return float(np.corrcoef(a, b)[0, 1])


# two-phase diagnostic

DEFAULT_BANDS = ((-np.inf, 0.0), (0.0, 2.0), (2.0, 4.0), (4.0, np.inf))


@dataclass
class BandProfile:
    lo: float
    hi: float
    count: int
    edges: np.ndarray
    density: np.ndarray
    grid: np.ndarray
    smooth: np.ndarray
    bimodal: bool
    status: str


def _smoothed(values, grid, bandwidth, chunk=4096):
    total = np.zeros(grid.size)
    for i in range(0, values.size, chunk):
        z = (grid[:, None] - values[None, i:i + chunk]) / bandwidth
        total += np.exp(-0.5 * z * z).sum(axis=1)
    return total / (values.size * bandwidth * np.sqrt(2 * np.pi))


def is_bimodal(values, bandwidth: float = 0.3, dip: float = 0.05, grid=None) -> bool:
    """Two-sided peak test on a Gaussian-kernel density estimate.

    Bimodal when the estimate has an interior local maximum on each side of
    zero and the density at zero sits at least ``dip`` (relative) below the
    smaller of the two highest peaks.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return False
    if grid is None:
        reach = np.max(np.abs(values)) + 4 * bandwidth
        grid = np.linspace(-reach, reach, 2 * int(np.ceil(reach / (bandwidth / 8))) + 1)
    f = _smoothed(values, grid, bandwidth)
    interior = (f[1:-1] > f[:-2]) & (f[1:-1] >= f[2:])
    peaks = np.flatnonzero(interior) + 1
    left = peaks[grid[peaks] < 0]
    right = peaks[grid[peaks] > 0]
    if left.size == 0 or right.size == 0:
        return False
    f0 = _smoothed(values, np.array([0.0]), bandwidth)[0]
    lower_peak = min(f[left].max(), f[right].max())
    return bool(f0 <= (1 - dip) * lower_peak)


def bimodality_profile(s: StockSeries, sigma_bands=DEFAULT_BANDS, bandwidth: float = 0.3,
                       dip: float = 0.05, min_points: int = 20,
                       hist_width: float = 0.25) -> list[BandProfile]:
    """Distribution of the normalized imbalance within bands of normalized noise.

    Bands with fewer than ``min_points`` observations are reported as
    ``"sparse"`` (or ``"empty"``) and never flagged bimodal.
    """
    sigma = normalize_series(s.noise_abs)
    nu = normalize_series(s.imbalance)
    out = []
    for lo, hi in sigma_bands:
        sel = (sigma > lo) & (sigma <= hi)
        vals = nu[sel]
        n = int(vals.size)
        if n == 0:
            out.append(BandProfile(lo, hi, 0, np.empty(0), np.empty(0), np.empty(0),
                                   np.empty(0), False, "empty"))
            continue
        reach = np.max(np.abs(vals)) + 4 * bandwidth
        nb = max(1, int(np.ceil(2 * reach / hist_width)))
        edges = np.linspace(-reach, reach, nb + 1)
        density, _ = np.histogram(vals, bins=edges, density=True)
        grid = np.linspace(-reach, reach, 2 * int(np.ceil(reach / (bandwidth / 8))) + 1)
        smooth = _smoothed(vals, grid, bandwidth)
        if n < min_points:
            out.append(BandProfile(lo, hi, n, edges, density, grid, smooth, False, "sparse"))
            continue
        flag = is_bimodal(vals, bandwidth, dip, grid)
        out.append(BandProfile(lo, hi, n, edges, density, grid, smooth, flag, "ok"))
    return out


# pair ensembles


@dataclass
class PairSet:
    """Aligned quantile data for every stock pair ``k < l`` in preset order."""

    symbols: list
    pairs: list  # (k, l) index tuples
    bins: int
    quantiles: list  # per pair (QuantileSeries, QuantileSeries)
    correlations: np.ndarray
    diagnostics: dict = field(default_factory=dict)
    stock_quantiles: list | None = None  # set when every stock shares one interval grid

    def labels(self):
        return [(self.symbols[k], self.symbols[l]) for k, l in self.pairs]


def pair_correlation(a, b, estimator: str = "pearson") -> float:
    """Correlation of two aligned imbalance series (normalized Pearson or rank)."""
    if estimator == "pearson":
        za, zb = normalize_series(a), normalize_series(b)
    elif estimator == "spearman":
        za = normalize_series(quantile_transform(a).q)
        zb = normalize_series(quantile_transform(b).q)
    else:
        raise ModeInvalid(f"unknown correlation estimator {estimator!r}")
    return float(np.mean(za * zb))


def build_pairs(series: list[StockSeries], bins: int = DEFAULT_BINS,
                estimator: str = "pearson") -> PairSet:
    """Align every pair on common days and minutes and rank-transform both sides.

    When all stocks already share one interval grid the per-stock quantiles
    are computed once and reused for every pair.
    """
    if len(series) < 2:
        raise EmptyInput("need at least two stocks")
    L = len(series)
    pairs = [(k, l) for k in range(L - 1) for l in range(k + 1, L)]
    shared = all(np.array_equal(series[0].start, s.start) for s in series[1:])
    quantiles = []
    corr = np.empty(len(pairs))
    dropped = 0
    qs = None
    if shared:
        qs = [quantile_transform(s.imbalance, s.symbol, s.start) for s in series]
        quantiles = [(qs[k], qs[l]) for k, l in pairs]
        if estimator == "pearson":
            z = np.vstack([normalize_series(s.imbalance) for s in series])
        elif estimator == "spearman":
            z = np.vstack([normalize_series(q.q) for q in qs])
        else:
            raise ModeInvalid(f"unknown correlation estimator {estimator!r}")
        full = z @ z.T / z.shape[1]
        corr = np.array([full[k, l] for k, l in pairs])
    else:
        for i, (k, l) in enumerate(pairs):
            a, b, info = align_with_diagnostics(series[k], series[l])
            dropped += info["unmatched_dropped"]
            quantiles.append((quantile_transform(a.imbalance, a.symbol, a.start),
                              quantile_transform(b.imbalance, b.symbol, b.start)))
            corr[i] = pair_correlation(a.imbalance, b.imbalance, estimator)
    ties = sum(q.ties for q in (qs if shared else [x for p in quantiles for x in p]))
    diag = {"unmatched_dropped": int(dropped), "ties": int(ties), "estimator": estimator}
    return PairSet([s.symbol for s in series], pairs, bins, quantiles, corr, diag, qs)


def pair_histograms(ps: PairSet, mode: str = "unconditional", thresholds=None,
                    ) -> list[CopulaHistogram]:
    """Histogram of every pair, unconditional or in one conditioning mode."""
    if mode != "unconditional" and mode not in MODES:
        raise ModeInvalid(f"unknown mode {mode!r}")
    labels = ps.labels()
    if ps.stock_quantiles is not None:
        rows = ps.stock_quantiles
        idx = np.vstack([bin_index(q.q, ps.bins) for q in rows])
        if mode == "unconditional":
            counts = kernels.pair_counts_batch(idx, ps.bins)
        else:
            ts = rows[0].timestamps
            kf = np.vstack([thresholds[i].keep(ts, mode[0]) for i in range(len(rows))])
            ks = np.vstack([thresholds[i].keep(ts, mode[1]) for i in range(len(rows))])
            counts = kernels.pair_counts_batch(idx, ps.bins, kf, ks)
    else:
        counts = []
        for (qa, qb), (k, l) in zip(ps.quantiles, ps.pairs):
            keep = None
            if mode != "unconditional":
                ka, kb = mode_masks(mode, qa.timestamps, thresholds[k], thresholds[l])
                keep = ka & kb
            counts.append(kernels.pair_counts(bin_index(qa.q, ps.bins),
                                              bin_index(qb.q, ps.bins), ps.bins, keep))
    out = []
    for c, lab in zip(counts, labels):
        if mode != "unconditional" and c.sum() == 0:
            raise NoRetainedPoints(f"mode {mode} leaves no observations for {lab}")
        out.append(CopulaHistogram.from_counts(
            c, {"pair": list(lab), "conditioning": mode, "order": "preset"}))
    return out


@dataclass
class ShuffleReport:
    preset: CopulaHistogram
    shuffled: CopulaHistogram
    preset_summary: AsymmetrySummary
    shuffled_summary: AsymmetrySummary
    permutation: list
    flipped: np.ndarray
    max_bin_deviation: float
    skew_deltas: dict


def shuffle_robustness(pairs, seed: int, symbols=None) -> ShuffleReport:
    """Recompute the averaged copula after a random reordering of the stocks.

    A pair is transposed when the permutation places its second stock
    first.  The permutation is returned for replay.
    """
    pairs = list(pairs)
    if len(pairs) < 1:
        raise EmptyInput("no pairs to shuffle")
    labels = [tuple(h.meta["pair"]) for h in pairs]
    if symbols is None:
        symbols = list(dict.fromkeys(s for lab in labels for s in lab))
    if len(symbols) < 2:
        raise EmptyInput("need at least two stocks")
    rng = np.random.default_rng(seed)
    perm = [symbols[i] for i in rng.permutation(len(symbols))]
    rank = {s: i for i, s in enumerate(perm)}
    flipped = np.array([rank[a] > rank[b] for a, b in labels])
    shuffled_pairs = []
    for h, flip, (a, b) in zip(pairs, flipped, labels):
        g = h.transpose() if flip else CopulaHistogram(h.density, h.n_samples, dict(h.meta))
        g.meta.update(order="shuffled", pair=[b, a] if flip else [a, b])
        shuffled_pairs.append(g)
    preset = average_copula(pairs)
    shuffled = average_copula(shuffled_pairs)
    if len(pairs) >= 2:
        ps = asymmetry_distributions(pairs)
        ss = asymmetry_distributions(shuffled_pairs)
    else:
        ps = ss = None
    deltas = {}
    if ps is not None:
        for key in ("skew_alpha", "skew_beta"):
            a, b = getattr(ps, key), getattr(ss, key)
            deltas[key] = None if a is None or b is None else b - a
    return ShuffleReport(preset, shuffled, ps, ss, perm, flipped,
                         float(np.max(np.abs(shuffled.density - preset.density))), deltas)
