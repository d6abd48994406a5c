"""Pipeline configuration from a flat INI file.

Example::

    [pipeline]
    data_dir = data
    output_dir = out
    symbols = AAPL, MSFT, IBM      ; or auto:100 for S000 ... S099
    seed = 1
    interval_seconds = 60
    bins = 20
    exclusion_m = 50
    estimator = pearson

    [session]
    open = 09:30
    close = 16:00
    edge_cut_minutes = 10

    [quadrature]
    node_count = 128
    scheme = log-trapezoid
    target_abs_tol = 1e-10

    [fit]
    n_lo = 1.5
    n_hi = 200

Every key is optional except ``symbols``.  Relative paths resolve against
the directory of the config file.
"""
from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, MissingFile, VolCopulaError
from .marketdata import Session
from .quadrature import QuadratureSpec


def _clock(text: str) -> float:
    """'09:30' or '09:30:15' to seconds after midnight; plain numbers pass through."""
    text = text.strip()
    if ":" not in text:
        return float(text)
    parts = [float(p) for p in text.split(":")]
    if len(parts) > 3:
        raise ValueError(f"bad clock time {text!r}")
    return sum(p * m for p, m in zip(parts, (3600, 60, 1)))


def _hhmm(seconds: float) -> str:
    s = int(round(seconds))
    if s % 60:
        return f"{s // 3600:02d}:{s // 60 % 60:02d}:{s % 60:02d}"
    return f"{s // 3600:02d}:{s // 60 % 60:02d}"


def parse_symbols(text: str) -> list[str]:
    text = text.strip()
    if text.startswith("auto:"):
        n = int(text[5:])
        return [f"S{k:03d}" for k in range(n)]
    return [s for s in text.replace(",", " ").split() if s]


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(",", " ").split()]


@dataclass
class SynthConfig:
    kind: str = "k_panel"  # k_panel | trades
    length: int = 50000
    c: float = 0.10
    N: float = 6.72
    volume_law: str = "power_law"
    tail_exponent: float = 1.5
    sign_persistence: float = 0.0
    trades_per_minute: int = 20
    minutes: int = 250 * 370


@dataclass
class ScanConfig:
    c_values: list = field(default_factory=lambda: [round(0.05 * i, 2) for i in range(19)])
    n_values: list = field(default_factory=lambda: [3.0, 4.0, 6.72, 10.0, 20.0, 50.0])
    fixed_c: float = 0.10
    fixed_N: float = 6.72


@dataclass
class PipelineConfig:
    symbols: list
    data_dir: Path = Path("data")
    output_dir: Path = Path("out")
    session: Session = Session()
    interval_seconds: int = 60
    bins: int = 20
    exclusion_m: int = 50
    estimator: str = "pearson"
    quadrature: QuadratureSpec = QuadratureSpec()
    fit_bracket: tuple = (1.5, 200.0)
    seed: int = 0
    synth: SynthConfig = field(default_factory=SynthConfig)
    scan: ScanConfig = field(default_factory=ScanConfig)

    def __post_init__(self):
        self.data_dir = Path(self.data_dir)
        self.output_dir = Path(self.output_dir)
        if not self.symbols:
            raise ConfigError("symbols must be a non-empty list")
        if len(set(self.symbols)) != len(self.symbols):
            raise ConfigError("symbols must be unique")
        if self.bins < 4:
            raise ConfigError("bins must be at least 4")
        if self.interval_seconds < 1 or 86400 % self.interval_seconds:
            raise ConfigError("interval_seconds must divide a day")
        if self.exclusion_m < 0:
            raise ConfigError("exclusion_m must be non-negative")
        if self.estimator not in ("pearson", "spearman"):
            raise ConfigError("estimator must be pearson or spearman")
        lo, hi = self.fit_bracket
        if not 1 < lo < hi:
            raise ConfigError("fit bracket must satisfy 1 < n_lo < n_hi")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)

    def to_ini(self) -> str:
        """Snapshot with every key spelled out (paths absolute)."""
        cp = {}
        cp["pipeline"] = {
            "data_dir": str(self.data_dir), "output_dir": str(self.output_dir),
            "symbols": ", ".join(self.symbols), "seed": str(self.seed),
            "interval_seconds": str(self.interval_seconds), "bins": str(self.bins),
            "exclusion_m": str(self.exclusion_m), "estimator": self.estimator,
        }
        s = self.session
        cp["session"] = {"open": _hhmm(s.open), "close": _hhmm(s.close),
                         "edge_cut_minutes": repr(s.edge_cut_minutes)}
        q = self.quadrature
        cp["quadrature"] = {"node_count": str(q.node_count), "scheme": q.scheme,
                            "target_abs_tol": repr(q.target_abs_tol), "verify": str(q.verify)}
        cp["fit"] = {"n_lo": repr(self.fit_bracket[0]), "n_hi": repr(self.fit_bracket[1])}
        cp["synth"] = {k: str(v) for k, v in dataclasses.asdict(self.synth).items()}
        sc = self.scan
        cp["scan"] = {"c_values": ", ".join(map(repr, sc.c_values)),
                      "n_values": ", ".join(map(repr, sc.n_values)),
                      "fixed_c": repr(sc.fixed_c), "fixed_N": repr(sc.fixed_N)}
        lines = []
        for name, section in cp.items():
            lines.append(f"[{name}]")
            lines += [f"{k} = {v}" for k, v in section.items()]
            lines.append("")
        return "\n".join(lines)


def _typed(section, key, cast, default):
    if section is None or key not in section:
        return default
    raw = section[key]
    try:
        return cast(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section.name}] {key} = {raw!r}: {exc}") from None


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def load_config(path) -> PipelineConfig:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"config file not found: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    # keep key case (fixed_N)
    cp.optionxform = str
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    base = path.resolve().parent
    p = cp["pipeline"] if cp.has_section("pipeline") else None
    if p is None or "symbols" not in p:
        raise ConfigError("[pipeline] symbols is required")

    def resolve(key, default):
        v = Path(_typed(p, key, str, default))
        return v if v.is_absolute() else base / v

    try:
        sec = cp["session"] if cp.has_section("session") else None
        session = Session(_typed(sec, "open", _clock, Session.open),
                          _typed(sec, "close", _clock, Session.close),
                          _typed(sec, "edge_cut_minutes", float, Session.edge_cut_minutes))
        qs = cp["quadrature"] if cp.has_section("quadrature") else None
        dq = QuadratureSpec()
        quad = QuadratureSpec(_typed(qs, "node_count", int, dq.node_count),
                              _typed(qs, "scheme", str, dq.scheme),
                              _typed(qs, "target_abs_tol", float, dq.target_abs_tol),
                              _typed(qs, "verify", _bool, dq.verify))
        f = cp["fit"] if cp.has_section("fit") else None
        bracket = (_typed(f, "n_lo", float, 1.5), _typed(f, "n_hi", float, 200.0))
        sy = cp["synth"] if cp.has_section("synth") else None
        ds = SynthConfig()
        synth = SynthConfig(**{k: _typed(sy, k, type(v), v)
                               for k, v in dataclasses.asdict(ds).items()})
        sc = cp["scan"] if cp.has_section("scan") else None
        dsc = ScanConfig()
        scan = ScanConfig(_typed(sc, "c_values", _floats, dsc.c_values),
                          _typed(sc, "n_values", _floats, dsc.n_values),
                          _typed(sc, "fixed_c", float, dsc.fixed_c),
                          _typed(sc, "fixed_N", float, dsc.fixed_N))
        return PipelineConfig(
            symbols=parse_symbols(p["symbols"]),
            data_dir=resolve("data_dir", "data"),
            output_dir=resolve("output_dir", "out"),
            session=session,
            interval_seconds=_typed(p, "interval_seconds", int, 60),
            bins=_typed(p, "bins", int, 20),
            exclusion_m=_typed(p, "exclusion_m", int, 50),
            estimator=_typed(p, "estimator", str, "pearson"),
            quadrature=quad,
            fit_bracket=bracket,
            seed=_typed(p, "seed", int, 0),
            synth=synth,
            scan=scan,
        )
    except ConfigError:
        raise
    except VolCopulaError as exc:
        raise ConfigError(str(exc)) from None
