"""Ground-truth generators: K-distributed pairs and panels, tick streams.

Every sampler takes an explicit integer seed.  Independent streams (one per
stock, per regime, ...) draw from ``stream_rng(seed, *ids)``, which hashes
the master seed together with the stream identifiers through
:class:`numpy.random.SeedSequence`, so streams can be generated in any
order or in parallel with identical results.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .marketdata import SECONDS_PER_DAY, Session, SignedTrades, StockSeries, TradeTable
from .models import KModelParams

FIRST_DAY = np.datetime64("2008-01-02")


def stream_rng(seed: int, *stream) -> np.random.Generator:
    """Generator for one independent stream of a master seed."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, stream)]))


@dataclass(frozen=True)
class KSampleConfig:
    params: KModelParams
    length: int
    seed: int = 0

    def __post_init__(self):
        if self.length < 1:
            raise ValidationError("sample length must be at least 1")


def sample_k_pairs(cfg: KSampleConfig) -> tuple[np.ndarray, np.ndarray]:
    """Pairs from the bivariate K distribution as a Gamma scale mixture of normals."""
    rng = stream_rng(cfg.seed, 0)
    p = cfg.params
    z = rng.gamma(p.N / 2, 1.0, cfg.length)
    g = rng.standard_normal((cfg.length, 2))
    scale = np.sqrt(2 * z / p.N)
    x1 = scale * g[:, 0]
    x2 = scale * (p.c * g[:, 0] + np.sqrt(1 - p.c * p.c) * g[:, 1])
    return x1, x2


def sample_k_panel(n_stocks: int, length: int, c: float, N: float,
                   seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Equicorrelated K panel with one mixing variable per interval.

    Returns ``(x, z)`` with ``x`` of shape ``(n_stocks, length)``.  Every pair
    of rows is bivariate K with parameters ``(c, N)``.  Each stock's normal
    innovations come from its own stream, so the panel for the first ``L``
    stocks does not depend on ``n_stocks``.
    """
    KModelParams(c, N)
    if n_stocks < 1 or length < 1:
        raise ValidationError("panel needs at least one stock and one interval")
    if c < 0 and n_stocks > 2 and c <= -1 / (n_stocks - 1):
        raise ValidationError("negative common correlation too strong for the panel size")
    z = stream_rng(seed, 0).gamma(N / 2, 1.0, length)
    common = stream_rng(seed, 1).standard_normal(length)
    own = np.vstack([stream_rng(seed, 2, k).standard_normal(length) for k in range(n_stocks)])
    if c >= 0:
        g = np.sqrt(c) * common + np.sqrt(1 - c) * own
    else:
        g = np.linalg.cholesky(np.full((n_stocks, n_stocks), c) + (1 - c) * np.eye(n_stocks)) @ own
    return np.sqrt(2 * z / N) * g, z


def interval_starts(length: int, session: Session = Session(), interval_seconds: int = 60,
                    first_day=FIRST_DAY) -> np.ndarray:
    """Epoch-second starts of ``length`` consecutive in-session intervals on business days."""
    per_day = int((session.last_kept - session.first_kept) // interval_seconds)
    if per_day < 1:
        raise ValidationError("session too short for one interval")
    i = np.arange(length)
    days = np.busday_offset(np.datetime64(first_day, "D"), i // per_day, roll="forward")
    return (days.astype(np.int64) * SECONDS_PER_DAY + int(session.first_kept)
            + (i % per_day) * interval_seconds)


def panel_series(x: np.ndarray, noise=None, symbols=None, session: Session = Session(),
                 interval_seconds: int = 60) -> list[StockSeries]:
    """Wrap panel rows as per-interval series on a shared interval grid.

    ``noise`` is a per-interval noise proxy (shared or per stock); the
    series are recorded as two-trade intervals whose mean absolute deviation
    equals the proxy and whose squared deviation is its square.
    """
    x = np.atleast_2d(x)
    L, T = x.shape
    start = interval_starts(T, session, interval_seconds)
    noise = np.ones(T) if noise is None else np.asarray(noise, dtype=float)
    noise = np.broadcast_to(noise, (L, T))
    symbols = symbols or [f"S{k:03d}" for k in range(L)]
    return [StockSeries(sym, start, x[k], noise[k], noise[k] ** 2, np.full(T, 2),
                        {"interval_seconds": interval_seconds, "synthetic": "k-panel"})
            for k, sym in enumerate(symbols)]


def sample_two_regime_pairs(base_c: float, high_c: float, high_fraction: float, N: float,
                            T: int, seed: int = 0):
    """K pairs whose correlation switches to ``high_c`` on a random subset of intervals.

    Returns ``(x1, x2, sigma1, sigma2, high)``.  The noise proxies of both
    series are ``sqrt(2 z / N)`` times an independent lognormal factor, shifted
    up by a constant in high-regime intervals so those rank at the top.
    With ``high_fraction = 0`` the pairs are exactly those of
    :func:`sample_k_pairs` with ``base_c`` and the same seed.
    """
    KModelParams(base_c, N)
    KModelParams(high_c, N)
    if not 0 <= high_fraction <= 1:
        raise ValidationError("high_fraction must lie in [0, 1]")
    rng = stream_rng(seed, 0)
    z = rng.gamma(N / 2, 1.0, T)
    g = rng.standard_normal((T, 2))
    high = np.zeros(T, dtype=bool)
    n_high = int(round(high_fraction * T))
    if n_high:
        high[stream_rng(seed, 1).choice(T, n_high, replace=False)] = True
    c = np.where(high, high_c, base_c)
    scale = np.sqrt(2 * z / N)
    x1 = scale * g[:, 0]
    x2 = scale * (c * g[:, 0] + np.sqrt(1 - c * c) * g[:, 1])
    noise_rng = stream_rng(seed, 2)
    boost = np.where(high, 10.0, 0.0)
    s1 = scale * np.exp(0.25 * noise_rng.standard_normal(T)) + boost
    s2 = scale * np.exp(0.25 * noise_rng.standard_normal(T)) + boost
    return x1, x2, s1, s2, high


@dataclass(frozen=True)
class TradeStreamConfig:
    """Tick stream with i.i.d. volumes and Markov trade signs.

    ``sign_persistence`` is the probability that a trade repeats the
    previous sign; otherwise the sign is a fresh fair coin.
    """

    volume_law: str = "gaussian"
    tail_exponent: float = 1.5
    sign_persistence: float = 0.0
    trades_per_minute: int = 20
    minutes: int = 370
    seed: int = 0
    volume_scale: float = 100.0
    session: Session = Session()

    def __post_init__(self):
        if self.volume_law not in ("gaussian", "power_law"):
            raise ValidationError(f"unknown volume law {self.volume_law!r}")
        if self.volume_law == "power_law" and not self.tail_exponent > 1:
            raise ValidationError("tail exponent must exceed 1")
        if not 0 <= self.sign_persistence < 1:
            raise ValidationError("sign persistence must lie in [0, 1)")
        if self.trades_per_minute < 2:
            raise ValidationError("need at least two trades per minute")
        if self.minutes < 1:
            raise ValidationError("need at least one minute")
        if not self.volume_scale > 0:
            raise ValidationError("volume scale must be positive")


def draw_volumes(rng, n: int, law: str, scale: float, tail_exponent: float) -> np.ndarray:
    """Integer share counts of at least one."""
    if law == "gaussian":
        v = np.ceil(scale * np.abs(rng.standard_normal(n)))
    else:
        v = np.rint(scale * rng.pareto(tail_exponent, n) + scale)
    return np.maximum(v, 1).astype(np.int64)


def markov_signs(rng, n: int, persistence: float) -> np.ndarray:
    """Two-state chain: repeat with probability ``persistence``, else a fair coin."""
    fresh = rng.integers(0, 2, n, dtype=np.int8) * 2 - 1
    if persistence == 0:
        return fresh
    repeat = rng.random(n) < persistence
    repeat[0] = False
    last_fresh = np.maximum.accumulate(np.where(repeat, 0, np.arange(n)))
    return fresh[last_fresh]


def sample_trade_stream(cfg: TradeStreamConfig, stream: int = 0) -> SignedTrades:
    """Tick trades whose prices encode the generated signs under the tick rule.

    Each price moves one relative tick up for a buy and down for a sell, so
    classifying the stream recovers the drawn signs from the second trade on.
    Trades fall at sorted uniform times inside consecutive in-session minutes
    on business days.
    """
    rng = stream_rng(cfg.seed, stream)
    per_min = cfg.trades_per_minute
    n = cfg.minutes * per_min
    volume = draw_volumes(rng, n, cfg.volume_law, cfg.volume_scale, cfg.tail_exponent)
    sign = markov_signs(rng, n, cfg.sign_persistence)
    offsets = np.sort(rng.random((cfg.minutes, per_min)) * 60.0, axis=1).reshape(-1)
    start = np.repeat(interval_starts(cfg.minutes, cfg.session), per_min)
    day = start // SECONDS_PER_DAY
    time = (start % SECONDS_PER_DAY) + offsets
    log_price = np.log(50.0) + 1e-4 * np.cumsum(sign)
    trades = TradeTable(day, time, np.exp(log_price), volume)
    return SignedTrades(trades, sign)
