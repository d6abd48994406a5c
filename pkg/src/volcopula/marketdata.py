"""Trade signs and per-interval volume imbalances.

Trades are held column-wise (:class:`TradeTable`) because single stocks
easily carry millions of ticks; :class:`TradeRecord` and
:class:`SignedTrade` exist for record-at-a-time use and tests.
"""
from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DegenerateSeries, EmptyInput, MalformedSession, NoCommonDays

SECONDS_PER_DAY = 86400


@dataclass(frozen=True)
class TradeRecord:
    day: dt.date
    time: float  # seconds after midnight
    price: float
    volume: int


@dataclass(frozen=True)
class SignedTrade:
    record: TradeRecord
    sign: int


@dataclass(frozen=True)
class Session:
    """Daily trading window, times in seconds after midnight."""

    open: float = 9.5 * 3600
    close: float = 16 * 3600
    edge_cut_minutes: float = 10.0

    def __post_init__(self):
        if self.close <= self.open + 2 * self.edge_cut_minutes * 60:
            raise MalformedSession(
                f"close {self.close} must exceed open {self.open} plus both edge cuts")

    @property
    def first_kept(self) -> float:
        return self.open + 60 * self.edge_cut_minutes

    @property
    def last_kept(self) -> float:
        """Trades at or after this time fall in the closing cut."""
        return self.close - 60 * self.edge_cut_minutes


def _day_number(day) -> int:
    return int(np.datetime64(day, "D").astype(np.int64))


@dataclass
class TradeTable:
    """Column store of one stock's trades; ``day`` holds days since the epoch."""

    day: np.ndarray
    time: np.ndarray
    price: np.ndarray
    volume: np.ndarray

    def __post_init__(self):
        self.day = np.asarray(self.day, dtype=np.int64)
        self.time = np.asarray(self.time, dtype=float)
        self.price = np.asarray(self.price, dtype=float)
        self.volume = np.asarray(self.volume, dtype=np.int64)
        n = self.day.size
        if not (self.time.size == self.price.size == self.volume.size == n):
            raise ValueError("trade columns must have equal length")

    def __len__(self):
        return self.day.size

    @classmethod
    def from_records(cls, records) -> "TradeTable":
        records = list(records)
        return cls(
            [_day_number(r.day) for r in records],
            [r.time for r in records],
            [r.price for r in records],
            [r.volume for r in records],
        )

    def records(self) -> list[TradeRecord]:
        days = self.day.astype("datetime64[D]").tolist()
        return [TradeRecord(d, float(t), float(p), int(v))
                for d, t, p, v in zip(days, self.time, self.price, self.volume)]

    def sorted(self) -> "TradeTable":
        """Stable sort by (day, time); equal timestamps keep file order."""
        order = np.lexsort((self.time, self.day))
        if np.all(order == np.arange(order.size)):
            return self
        return TradeTable(self.day[order], self.time[order], self.price[order],
                          self.volume[order])


@dataclass
class SignedTrades:
    trades: TradeTable
    sign: np.ndarray

    def __len__(self):
        return len(self.trades)

    def records(self) -> list[SignedTrade]:
        return [SignedTrade(r, int(s)) for r, s in zip(self.trades.records(), self.sign)]


@dataclass(frozen=True)
class IntervalObservation:
    interval_start: dt.datetime
    imbalance: float
    noise_abs: float
    noise_sq: float
    n_trades: int


@dataclass
class StockSeries:
    """Per-interval aggregates of one stock, sorted by interval start.

    ``start`` holds interval starts in seconds since the epoch.
    """

    symbol: str
    start: np.ndarray
    imbalance: np.ndarray
    noise_abs: np.ndarray
    noise_sq: np.ndarray
    n_trades: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.start = np.asarray(self.start, dtype=np.int64)
        self.imbalance = np.asarray(self.imbalance, dtype=float)
        self.noise_abs = np.asarray(self.noise_abs, dtype=float)
        self.noise_sq = np.asarray(self.noise_sq, dtype=float)
        self.n_trades = np.asarray(self.n_trades, dtype=np.int64)

    def __len__(self):
        return self.start.size

    @property
    def days(self) -> np.ndarray:
        return self.start // SECONDS_PER_DAY

    @property
    def trading_days(self) -> set:
        return set(np.unique(self.days).astype("datetime64[D]").tolist())

    def take(self, index) -> "StockSeries":
        return StockSeries(self.symbol, self.start[index], self.imbalance[index],
                           self.noise_abs[index], self.noise_sq[index],
                           self.n_trades[index], dict(self.meta))

    def observations(self) -> list[IntervalObservation]:
        stamps = self.start.astype("datetime64[s]").tolist()
        return [IntervalObservation(s, float(v), float(a), float(q), int(n))
                for s, v, a, q, n in zip(stamps, self.imbalance, self.noise_abs,
                                         self.noise_sq, self.n_trades)]


def classify_trade_sign(prev_price: float, price: float, prev_sign: int) -> int:
    """Tick rule: sign of the price change, or the previous sign on a zero tick."""
    if price > prev_price:
        return 1
    if price < prev_price:
        return -1
    return prev_sign


def sign_stream(trades, seed_sign: int = 1) -> SignedTrades:
    """Sign every trade of one stock, chaining through intervals and days.

    ``trades`` is a :class:`TradeTable` or a sequence of :class:`TradeRecord`.
    The first trade has no predecessor and takes ``seed_sign``.
    """
    if not isinstance(trades, TradeTable):
        trades = TradeTable.from_records(trades)
    if len(trades) == 0:
        raise EmptyInput("no trades to sign")
    trades = trades.sorted()
    return SignedTrades(trades, kernels.chain_signs(trades.price, seed_sign))


def aggregate_intervals(signed: SignedTrades, session: Session = Session(),
                        interval_length: int = 60, symbol: str = "") -> StockSeries:
    """Volume imbalance and local noise intensities per interval.

    Trades in the opening and closing edge cuts are dropped before
    bucketing; empty buckets are omitted.
    """
    if len(signed) == 0:
        raise EmptyInput("no signed trades")
    t = signed.trades
    keep = (t.time >= session.first_kept) & (t.time < session.last_kept)
    if not keep.any():
        raise EmptyInput("no trades inside the session window")
    day = t.day[keep]
    slot = np.floor(t.time[keep] / interval_length).astype(np.int64)
    x = t.volume[keep].astype(float) * signed.sign[keep]
    per_day = SECONDS_PER_DAY // interval_length
    keys = day * per_day + slot
    order = np.argsort(keys, kind="stable")
    keys, x = keys[order], x[order]
    uk, total, mad, msd, count = kernels.bucket_stats(keys, x)
    start = (uk // per_day) * SECONDS_PER_DAY + (uk % per_day) * interval_length
    return StockSeries(symbol, start, total, mad, msd, count,
                       {"interval_seconds": interval_length})


def align_with_diagnostics(a: StockSeries, b: StockSeries):
    """Common-day, common-interval restriction plus the count of unmatched intervals."""
    if len(a) == 0 or len(b) == 0:
        raise EmptyInput("cannot align an empty series")
    common_days = np.intersect1d(a.days, b.days)
    if common_days.size == 0:
        raise NoCommonDays(f"{a.symbol} and {b.symbol} share no trading day")
    in_a = np.isin(a.days, common_days)
    in_b = np.isin(b.days, common_days)
    shared, ia, ib = np.intersect1d(a.start[in_a], b.start[in_b], assume_unique=True,
                                    return_indices=True)
    ia = np.flatnonzero(in_a)[ia]
    ib = np.flatnonzero(in_b)[ib]
    dropped = int(in_a.sum() + in_b.sum() - 2 * shared.size)
    info = {"common_days": int(common_days.size), "paired": int(shared.size),
            "unmatched_dropped": dropped}
    return a.take(ia), b.take(ib), info


def align_common_days(a: StockSeries, b: StockSeries) -> tuple[StockSeries, StockSeries]:
    """Restrict both series to common days and pair identical interval starts."""
    a2, b2, _ = align_with_diagnostics(a, b)
    return a2, b2


def normalize_series(x) -> np.ndarray:
    """Zero mean, unit population variance."""
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        raise DegenerateSeries("need at least two values")
    mu = x.mean()
    sd = np.sqrt(np.mean((x - mu) ** 2))
    if sd == 0 or not np.isfinite(sd):
        raise DegenerateSeries("series has zero variance")
    return (x - mu) / sd
