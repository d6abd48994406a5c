"""Text formats for trades and per-interval series, plus atomic writes."""
from __future__ import annotations

import csv
import hashlib
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import MissingFile, ParseError
from .marketdata import StockSeries, TradeTable

TRADE_HEADER = ("day", "time", "price", "volume")
SERIES_HEADER = ("minute", "imbalance", "noise_abs", "noise_sq", "n_trades")


def atomic_write(path, data) -> str:
    """Write ``data`` (str or bytes) via a temporary file and rename; return its sha256."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    raw = data.encode() if isinstance(data, str) else bytes(data)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(raw)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return hashlib.sha256(raw).hexdigest()


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _open_text(path):
    try:
        return open(path, newline="")
    except FileNotFoundError:
        raise MissingFile(f"no such file: {path}") from None


# trades


def format_trades(t: TradeTable) -> str:
    days = t.day.astype("datetime64[D]").astype(str)
    lines = [",".join(TRADE_HEADER)]
    lines += [f"{d},{tm!r},{p!r},{v}" for d, tm, p, v in
              zip(days, t.time.tolist(), t.price.tolist(), t.volume.tolist())]
    return "\n".join(lines) + "\n"


def write_trades(path, t: TradeTable) -> str:
    return atomic_write(path, format_trades(t))


def read_trades(path) -> TradeTable:
    """Parse a trade file; malformed rows raise :class:`ParseError` with the line number."""
    day, time, price, volume = [], [], [], []
    with _open_text(path) as fh:
        rows = csv.reader(fh)
        header = next(rows, None)
        if header is None or tuple(h.strip().lower() for h in header) != TRADE_HEADER:
            raise ParseError(path, 1, f"expected header {','.join(TRADE_HEADER)}")
        for lineno, row in enumerate(rows, 2):
            if not row or not "".join(row).strip():
                continue
            if len(row) != 4:
                raise ParseError(path, lineno, f"expected 4 fields, got {len(row)}")
            try:
                d = np.datetime64(row[0].strip(), "D")
                tm, p = float(row[1]), float(row[2])
                v = int(row[3])
            except ValueError as exc:
                raise ParseError(path, lineno, str(exc)) from None
            if not (np.isfinite(tm) and 0 <= tm < 86400):
                raise ParseError(path, lineno, f"time {row[1]!r} outside the day")
            if not (np.isfinite(p) and p > 0):
                raise ParseError(path, lineno, f"price must be positive, got {row[2]!r}")
            if v <= 0:
                raise ParseError(path, lineno, f"volume must be positive, got {row[3]!r}")
            day.append(d.astype(np.int64))
            time.append(tm)
            price.append(p)
            volume.append(v)
    return TradeTable(day, time, price, volume)


# per-interval series


def format_series(s: StockSeries) -> str:
    stamps = s.start.astype("datetime64[s]").astype(str)
    lines = [",".join(SERIES_HEADER)]
    lines += [f"{m},{v!r},{a!r},{q!r},{n}" for m, v, a, q, n in
              zip(stamps, s.imbalance.tolist(), s.noise_abs.tolist(),
                  s.noise_sq.tolist(), s.n_trades.tolist())]
    return "\n".join(lines) + "\n"


def write_series(path, s: StockSeries) -> str:
    return atomic_write(path, format_series(s))


def read_series(path, symbol: str = "") -> StockSeries:
    cols = [[] for _ in SERIES_HEADER]
    with _open_text(path) as fh:
        rows = csv.reader(fh)
        header = next(rows, None)
        if header is None or tuple(h.strip() for h in header) != SERIES_HEADER:
            raise ParseError(path, 1, f"expected header {','.join(SERIES_HEADER)}")
        for lineno, row in enumerate(rows, 2):
            if not row:
                continue
            if len(row) != 5:
                raise ParseError(path, lineno, f"expected 5 fields, got {len(row)}")
            try:
                cols[0].append(np.datetime64(row[0], "s").astype(np.int64))
                for j in (1, 2, 3):
                    cols[j].append(float(row[j]))
                cols[4].append(int(row[4]))
            except ValueError as exc:
                raise ParseError(path, lineno, str(exc)) from None
    return StockSeries(symbol or Path(path).stem, *cols)


def write_table(path, header, rows) -> str:
    """Comma-separated table; floats written with round-trip precision."""
    def cell(v):
        if isinstance(v, (float, np.floating)):
            return repr(float(v))
        return str(v)
    lines = [",".join(header)] + [",".join(cell(v) for v in r) for r in rows]
    return atomic_write(path, "\n".join(lines) + "\n")
