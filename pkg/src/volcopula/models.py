"""Bivariate K-copula and Gaussian-copula models.

The K distribution is a Gaussian scale mixture: given ``z ~ Gamma(N/2, 1)``
the pair is normal with covariance ``(2 z / N) C``, ``C = [[1, c], [c, 1]]``.
Densities and distribution functions are the corresponding integrals over
``z``, evaluated with :mod:`volcopula.quadrature`.

Binned model grids are computed from the copula itself (differences of the
joint CDF at the cell corners), so every cell mass is exact up to quadrature
and root-finding tolerance.  :func:`bin_average_model` integrates any
density numerically and serves as the independent route.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import special

from .empirical import corner_asymmetries
from .errors import BracketNotFound, BinningMismatch, ValidationError
from .histogram import DEFAULT_BINS, CopulaHistogram
from .quadrature import (DEFAULT_QUAD, QuadratureSpec, gamma_kernel_integral,
                         graded_cell_rule, log_trapezoid)


@dataclass(frozen=True)
class KModelParams:
    c: float
    N: float

    def __post_init__(self):
        if not -1 < self.c < 1:
            raise ValidationError(f"correlation must lie in (-1, 1), got {self.c}")
        if not self.N > 1:
            raise ValidationError(f"N must exceed 1, got {self.N}")


def _check_N(N):
    if not N > 1:
        raise ValidationError(f"N must exceed 1, got {N}")


# K distribution


def k_joint_pdf(x1, x2, p: KModelParams, quad: QuadratureSpec = DEFAULT_QUAD):
    """Joint density of the bivariate K distribution.

    Diverges at the origin for ``N <= 2``; ``inf`` is returned there.
    """
    x1, x2 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float))
    N, c = p.N, p.c
    one_m = 1 - c * c
    quad_form = (x1 * x1 - 2 * c * x1 * x2 + x2 * x2) / one_m
    a = (N / 4) * quad_form
    nu = N / 2 - 1
    out = np.empty(a.shape)
    finite = (a > 0) | (nu > 0)
    out[~finite] = np.inf
    if finite.any():
        ls = special.gammaln(N / 2)
        out[finite] = (N / (4 * np.pi * np.sqrt(one_m))
                       * gamma_kernel_integral(nu, a[finite], quad, ls))
    return out if out.ndim else float(out)


def k_joint_pdf_bessel(x1, x2, p: KModelParams):
    """Closed form through the modified Bessel function of the second kind.

    Used only to cross-check :func:`k_joint_pdf`.
    """
    x1, x2 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float))
    N, c = p.N, p.c
    one_m = 1 - c * c
    a = (N / 4) * (x1 * x1 - 2 * c * x1 * x2 + x2 * x2) / one_m
    nu = N / 2 - 1
    with np.errstate(divide="ignore", invalid="ignore"):
        r = 2 * np.sqrt(a)
        log_int = np.log(2) + (nu / 2) * np.log(a) + np.log(special.kve(nu, r)) - r
    log_int = np.where(a > 0, log_int, special.gammaln(nu) if nu > 0 else np.inf)
    return N / (4 * np.pi * np.sqrt(one_m)) * np.exp(log_int - special.gammaln(N / 2))


def k_marginal_pdf(x, N: float, quad: QuadratureSpec = DEFAULT_QUAD):
    """Marginal density of the K distribution (unit variance, even)."""
    _check_N(N)
    x = np.asarray(x, float)
    a = (N / 4) * x * x
    val = np.sqrt(N / (4 * np.pi)) * gamma_kernel_integral(
        (N - 1) / 2, a, quad, special.gammaln(N / 2))
    return val if val.ndim else float(val)


def _lower_tail_cdf(x, N, quad):
    """CDF for x < 0 as a Gamma mixture of normal CDFs, in log space."""
    s = N / 2
    scale = np.sqrt(N / 2)
    lg = special.gammaln(s)
    xs = x.reshape(-1)

    def log_integrand(u, idx):
        arg = xs[idx] * scale * np.exp(-u / 2)
        return s * u - np.exp(u) - lg + special.log_ndtr(arg)

    a_tail = (N / 4) * xs * xs
    return log_trapezoid(log_integrand, np.full(xs.size, s), np.zeros(xs.size), quad,
                         extra_windows=[(np.full(xs.size, s + 0.5), a_tail)]).reshape(x.shape)


def k_marginal_cdf(x, N: float, quad: QuadratureSpec = DEFAULT_QUAD):
    """Marginal CDF; ``F(0) = 1/2`` and ``F(-x) = 1 - F(x)`` hold exactly."""
    _check_N(N)
    x = np.asarray(x, float)
    out = np.full(x.shape, 0.5)
    neg, pos = x < 0, x > 0
    out[x == -np.inf] = 0.0
    out[x == np.inf] = 1.0
    fin_neg = neg & np.isfinite(x)
    fin_pos = pos & np.isfinite(x)
    if fin_neg.any() or fin_pos.any():
        both = np.concatenate([x[fin_neg], -x[fin_pos]])
        # rounding can push the integral a few ulps above one half near x = 0
        tail = np.minimum(_lower_tail_cdf(both, N, quad), 0.5)
        out[fin_neg] = tail[: fin_neg.sum()]
        out[fin_pos] = 1 - tail[fin_neg.sum():]
    return out if out.ndim else float(out)


def _invert_lower(q, N, quad, tol=1e-12):
    """x < 0 with F(x) = q for 0 < q < 1/2, vectorized bisection then secant polish."""
    lo = np.full(q.shape, -50.0)
    hi = np.zeros(q.shape)
    for _ in range(60):
        f_lo = _lower_tail_cdf(lo, N, quad)
        low_enough = f_lo <= q
        if low_enough.all():
            break
        lo = np.where(low_enough, lo, 2 * lo)
    else:
        raise BracketNotFound("quantile bracket could not be expanded")
    f_lo = _lower_tail_cdf(lo, N, quad)
    f_hi = np.full(q.shape, 0.5)
    while np.max(hi - lo) > tol:
        mid = (lo + hi) / 2
        f_mid = _lower_tail_cdf(mid, N, quad)
        below = f_mid <= q
        lo, f_lo = np.where(below, mid, lo), np.where(below, f_mid, f_lo)
        hi, f_hi = np.where(below, hi, mid), np.where(below, f_hi, f_mid)
    x = (lo + hi) / 2
    for _ in range(2):
        with np.errstate(divide="ignore", invalid="ignore"):
            step = (q - f_lo) * (hi - lo) / (f_hi - f_lo)
        cand = lo + np.where(np.isfinite(step), step, (hi - lo) / 2)
        x = np.where((cand >= lo) & (cand <= hi), cand, x)
        fx = _lower_tail_cdf(x, N, quad)
        below = fx <= q
        lo, f_lo = np.where(below, x, lo), np.where(below, fx, f_lo)
        hi, f_hi = np.where(below, hi, x), np.where(below, f_hi, fx)
    return x


def k_marginal_quantile(q, N: float, quad: QuadratureSpec = DEFAULT_QUAD):
    """Inverse of :func:`k_marginal_cdf`; odd about ``q = 1/2``."""
    _check_N(N)
    q = np.asarray(q, float)
    if np.any((q <= 0) | (q >= 1)):
        raise ValidationError("quantile levels must lie strictly inside (0, 1)")
    out = np.zeros(q.shape)
    lower = q < 0.5
    upper = q > 0.5
    levels = np.concatenate([q[lower], 1 - q[upper]])
    if levels.size:
        uniq, inv = np.unique(levels, return_inverse=True)
        x = _invert_lower(uniq, N, quad)[inv]
        out[lower] = x[: lower.sum()]
        out[upper] = -x[lower.sum():]
    return out if out.ndim else float(out)


@lru_cache(maxsize=256)
def _cached_quantiles(levels: tuple, N: float, quad: QuadratureSpec) -> np.ndarray:
    x = k_marginal_quantile(np.array(levels), N, quad)
    x.setflags(write=False)
    return x


def k_copula_density(q1, q2, p: KModelParams, quad: QuadratureSpec = DEFAULT_QUAD):
    """K copula density: joint pdf over the product of marginals at the quantiles."""
    q1, q2 = np.broadcast_arrays(np.asarray(q1, float), np.asarray(q2, float))
    u1, inv1 = np.unique(q1, return_inverse=True)
    u2, inv2 = np.unique(q2, return_inverse=True)
    x1u = np.asarray(k_marginal_quantile(u1, p.N, quad))
    x2u = np.asarray(k_marginal_quantile(u2, p.N, quad))
    f1u = np.asarray(k_marginal_pdf(x1u, p.N, quad))
    f2u = np.asarray(k_marginal_pdf(x2u, p.N, quad))
    inv1, inv2 = inv1.reshape(q1.shape), inv2.reshape(q2.shape)
    joint = k_joint_pdf(x1u[inv1], x2u[inv2], p, quad)
    out = joint / (f1u[inv1] * f2u[inv2])
    return out if np.ndim(out) else float(out)


# Gaussian copula and bivariate normal CDF


def gaussian_copula_density(q1, q2, c: float):
    """Closed-form Gaussian copula density."""
    if not -1 < c < 1:
        raise ValidationError("correlation must lie in (-1, 1)")
    a = special.ndtri(np.asarray(q1, float))
    b = special.ndtri(np.asarray(q2, float))
    one_m = 1 - c * c
    out = np.exp(-(c * c * a * a + c * c * b * b - 2 * c * a * b) / (2 * one_m)) / np.sqrt(one_m)
    return out if np.ndim(out) else float(out)


def bivariate_normal_cdf(h, k, rho: float):
    """Standard bivariate normal CDF through Owen's T function.

    Accurate to about 1e-16 absolute; infinite arguments are allowed.
    """
    h, k = np.broadcast_arrays(np.asarray(h, float), np.asarray(k, float))
    out = np.empty(h.shape)
    sq = math.sqrt(1 - rho * rho)
    ph, pk = special.ndtr(h), special.ndtr(k)

    inf = ~np.isfinite(h) | ~np.isfinite(k)
    out[inf] = np.where(h[inf] == -np.inf, 0.0,
                        np.where(k[inf] == -np.inf, 0.0,
                                 np.where(h[inf] == np.inf, pk[inf], ph[inf])))
    fin = ~inf
    hz = fin & (h == 0) & (k != 0)
    kz = fin & (k == 0) & (h != 0)
    both0 = fin & (h == 0) & (k == 0)
    gen = fin & (h != 0) & (k != 0)
    r = rho / sq
    out[hz] = 0.5 * pk[hz] + special.owens_t(k[hz], r)
    out[kz] = 0.5 * ph[kz] + special.owens_t(h[kz], r)
    out[both0] = 0.25 + math.asin(rho) / (2 * math.pi)
    if gen.any():
        hg, kg = h[gen], k[gen]
        # slopes may overflow to +-inf for tiny arguments; owens_t handles that limit
        with np.errstate(over="ignore"):
            ah = (kg - rho * hg) / (hg * sq)
            ak = (hg - rho * kg) / (kg * sq)
        beta = np.where(np.signbit(hg) != np.signbit(kg), 0.5, 0.0)
        out[gen] = (0.5 * ph[gen] + 0.5 * pk[gen] - special.owens_t(hg, ah)
                    - special.owens_t(kg, ak) - beta)
    out = np.clip(out, 0.0, np.minimum(ph, pk))
    return out if out.ndim else float(out)


def gaussian_copula_cdf(q1, q2, c: float):
    return bivariate_normal_cdf(special.ndtri(np.asarray(q1, float)),
                                special.ndtri(np.asarray(q2, float)), c)


def k_joint_cdf(x1, x2, p: KModelParams, quad: QuadratureSpec = DEFAULT_QUAD):
    """Joint CDF of the bivariate K distribution (finite arguments)."""
    x1, x2 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float))
    shape = x1.shape
    a1, a2 = x1.reshape(-1), x2.reshape(-1)
    N, c = p.N, p.c
    s = N / 2
    scale = math.sqrt(N / 2)
    lg = special.gammaln(s)

    def log_integrand(u, idx):
        t = scale * np.exp(-u / 2)
        phi2 = bivariate_normal_cdf(a1[idx] * t, a2[idx] * t, c)
        with np.errstate(divide="ignore"):
            return s * u - np.exp(u) - lg + np.log(phi2)

    low = np.minimum(np.minimum(a1, a2), 0.0)
    out = log_trapezoid(log_integrand, np.full(a1.size, s), np.zeros(a1.size), quad,
                        extra_windows=[(np.full(a1.size, s + 0.5), (N / 4) * low * low)])
    out = out.reshape(shape)
    return out if out.ndim else float(out)


# binned models


def _grid_to_histogram(cop_grid, meta) -> CopulaHistogram:
    bins = cop_grid.shape[0] - 1
    mass = cop_grid[1:, 1:] - cop_grid[:-1, 1:] - cop_grid[1:, :-1] + cop_grid[:-1, :-1]
    return CopulaHistogram(mass * bins * bins, 0, meta)


def _edge_grid(interior_cdf, bins):
    """Copula CDF on the (bins+1)^2 cell corners given values at inner edges."""
    edges = np.arange(bins + 1) / bins
    g = np.zeros((bins + 1, bins + 1))
    g[-1, :] = edges
    g[:, -1] = edges
    g[1:-1, 1:-1] = interior_cdf
    return g


def binned_k_copula(p: KModelParams, bins: int = DEFAULT_BINS,
                    quad: QuadratureSpec = DEFAULT_QUAD) -> CopulaHistogram:
    """Exact cell averages of the K copula density from its CDF."""
    levels = tuple((np.arange(1, bins) / bins).tolist())
    x = _cached_quantiles(levels, p.N, quad)
    inner = k_joint_cdf(x[:, None], x[None, :], p, quad)
    return _grid_to_histogram(_edge_grid(inner, bins),
                              {"model": "K", "c": p.c, "N": p.N})


def binned_gaussian_copula(c: float, bins: int = DEFAULT_BINS) -> CopulaHistogram:
    """Exact cell averages of the Gaussian copula density from its CDF."""
    e = np.arange(1, bins) / bins
    inner = gaussian_copula_cdf(e[:, None], e[None, :], c)
    return _grid_to_histogram(_edge_grid(inner, bins), {"model": "gaussian", "c": c})


def bin_average_model(model, bins: int = DEFAULT_BINS, order: int = 8, levels: int = 10,
                      meta=None) -> CopulaHistogram:
    """Cell averages of a copula density by tensor Gauss-Legendre quadrature.

    ``model(q1, q2)`` must accept broadcast arrays.  Cells on the border of
    the unit square use rules graded toward the border, where copula
    densities may have integrable singularities.  The result is not
    renormalized, so its total mass checks the quadrature.
    """
    nodes, weights, owner = [], [], []
    for i in range(bins):
        lo, hi = i / bins, (i + 1) / bins
        x, w = graded_cell_rule(lo, hi, order, levels, grade_lo=(i == 0),
                                grade_hi=(i == bins - 1))
        nodes.append(x)
        weights.append(w)
        owner.append(np.full(x.size, i))
    q = np.concatenate(nodes)
    w = np.concatenate(weights)
    starts = np.flatnonzero(np.r_[True, np.diff(np.concatenate(owner)) != 0])
    vals = np.asarray(model(q[:, None], q[None, :]), float)
    weighted = vals * w[:, None] * w[None, :]
    cell = np.add.reduceat(np.add.reduceat(weighted, starts, axis=0), starts, axis=1)
    return CopulaHistogram(cell * bins * bins, 0, dict(meta or {}))


def model_error_grid(empirical: CopulaHistogram, model_binned: CopulaHistogram) -> np.ndarray:
    """Empirical minus model density, bin by bin."""
    if empirical.density.shape != model_binned.density.shape:
        raise BinningMismatch(f"{empirical.density.shape} vs {model_binned.density.shape}")
    return empirical.density - model_binned.density


# fitting


@dataclass
class FitResult:
    n_hat: float
    c_used: float
    objective: float
    trace: list = field(default_factory=list)
    warning: str | None = None

    def trace_table(self) -> str:
        return "N,objective\n" + "".join(f"{n:.17g},{o:.17g}\n" for n, o in self.trace)


_GOLDEN = (math.sqrt(5) - 1) / 2


def fit_N(empirical: CopulaHistogram, c_bar: float, bracket=(1.5, 200.0),
          quad: QuadratureSpec = DEFAULT_QUAD, grid_points: int = 24,
          rel_tol: float = 1e-4) -> FitResult:
    """Least-squares fit of N at fixed correlation against bin-averaged K grids.

    A geometric grid scan over ``bracket`` locates the basin, then a
    golden-section search refines inside the neighbouring grid interval.
    When the scan is not unimodal or the minimum sits on the bracket edge the
    refined grid minimum is returned with ``warning`` set.
    """
    lo, hi = bracket
    if not 1 < lo < hi:
        raise ValidationError("bracket must satisfy 1 < N_lo < N_hi")
    trace = []

    def objective(N):
        model = binned_k_copula(KModelParams(c_bar, N), empirical.bins, quad)
        val = float(np.sum((empirical.density - model.density) ** 2))
        trace.append((float(N), val))
        return val

    grid = np.geomspace(lo, hi, grid_points)
    vals = np.array([objective(N) for N in grid])
    i = int(np.argmin(vals))
    warning = None
    interior_minima = np.sum((vals[1:-1] < vals[:-2]) & (vals[1:-1] < vals[2:]))
    if i in (0, grid_points - 1):
        warning = "minimum on bracket edge"
    elif interior_minima > 1:
        warning = "objective not unimodal on the scan grid"
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, grid_points - 1)]
    # golden section in log N
    la, lb = math.log(a), math.log(b)
    x1 = lb - _GOLDEN * (lb - la)
    x2 = la + _GOLDEN * (lb - la)
    f1, f2 = objective(math.exp(x1)), objective(math.exp(x2))
    while lb - la > rel_tol:
        if f1 <= f2:
            lb, x2, f2 = x2, x1, f1
            x1 = lb - _GOLDEN * (lb - la)
            f1 = objective(math.exp(x1))
        else:
            la, x1, f1 = x1, x2, f2
            x2 = la + _GOLDEN * (lb - la)
            f2 = objective(math.exp(x2))
    best = min(trace, key=lambda t: t[1])
    if warning:
        warnings.warn(f"fit_N: {warning}", RuntimeWarning, stacklevel=2)
    return FitResult(best[0], c_bar, best[1], trace, warning)


def gamma_model_scan(fixed: str, fixed_value: float, sweep, bins: int = DEFAULT_BINS,
                     quad: QuadratureSpec = DEFAULT_QUAD) -> list[tuple[float, float]]:
    """Corner contrast gamma of the binned K copula along a parameter sweep.

    ``fixed`` names the parameter held at ``fixed_value`` ("c" or "N"); the
    other one runs over ``sweep``.
    """
    if fixed not in ("c", "N"):
        raise ValidationError("fixed must be 'c' or 'N'")
    out = []
    for v in sweep:
        p = KModelParams(fixed_value, v) if fixed == "c" else KModelParams(v, fixed_value)
        out.append((float(v), corner_asymmetries(binned_k_copula(p, bins, quad))[2]))
    return out


def gaussian_limit_gap(c: float, N: float, quad: QuadratureSpec = DEFAULT_QUAD,
                       bins: int = DEFAULT_BINS) -> float:
    """Largest |K - Gaussian| copula density difference on the interior grid edges."""
    e = np.arange(1, bins) / bins
    q1, q2 = np.meshgrid(e, e, indexing="ij")
    k = k_copula_density(q1, q2, KModelParams(c, N), quad)
    g = gaussian_copula_density(q1, q2, c)
    return float(np.max(np.abs(k - g)))


__all__ = [
    "KModelParams", "FitResult", "k_joint_pdf", "k_joint_pdf_bessel", "k_marginal_pdf",
    "k_marginal_cdf", "k_marginal_quantile", "k_copula_density", "gaussian_copula_density",
    "bivariate_normal_cdf", "gaussian_copula_cdf", "k_joint_cdf", "binned_k_copula",
    "binned_gaussian_copula", "bin_average_model", "model_error_grid", "fit_N",
    "gamma_model_scan", "gaussian_limit_gap",
]
