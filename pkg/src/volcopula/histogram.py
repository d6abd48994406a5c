"""Binned copula densities on the unit square."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import BinningMismatch, ParseError

DEFAULT_BINS = 20


@dataclass
class CopulaHistogram:
    """Bin-averaged copula density.

    ``density[i, j]`` covers ``q1`` in bin ``i`` (rows) and ``q2`` in bin ``j``
    (columns), both ascending.  Densities are normalized so that
    ``density.sum() / bins**2 == 1`` whenever ``n_samples > 0``; model grids
    carry ``n_samples = 0``.
    """

    density: np.ndarray
    n_samples: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.density = np.asarray(self.density, dtype=float)
        if self.density.ndim != 2 or self.density.shape[0] != self.density.shape[1]:
            raise BinningMismatch(f"density must be square, got {self.density.shape}")

    @property
    def bins(self) -> int:
        return self.density.shape[0]

    @property
    def mass(self) -> np.ndarray:
        return self.density / self.bins**2

    @classmethod
    def from_counts(cls, counts, meta=None) -> "CopulaHistogram":
        counts = np.asarray(counts)
        n = int(counts.sum())
        bins = counts.shape[0]
        density = counts * (bins * bins / n) if n else np.zeros(counts.shape)
        return cls(density, n, dict(meta or {}))

    def transpose(self) -> "CopulaHistogram":
        return CopulaHistogram(self.density.T.copy(), self.n_samples, dict(self.meta))

    def reflect(self) -> "CopulaHistogram":
        """Point reflection ``q -> 1 - q`` on both axes."""
        return CopulaHistogram(self.density[::-1, ::-1].copy(), self.n_samples, dict(self.meta))

    def check_same_binning(self, other: "CopulaHistogram"):
        if self.density.shape != other.density.shape:
            raise BinningMismatch(f"{self.density.shape} vs {other.density.shape}")

    # text and JSON serialization; floats are written with 17 significant
    # digits so a round trip is exact

    def to_text(self) -> str:
        return format_matrix(self.density)

    def to_json(self) -> str:
        payload = {
            "bins": self.bins,
            "n_samples": int(self.n_samples),
            "orientation": "rows: q1 ascending; columns: q2 ascending",
            "meta": self.meta,
            "density": [[float(v) for v in row] for row in self.density],
        }
        return json.dumps(payload, indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "CopulaHistogram":
        payload = json.loads(text)
        return cls(np.array(payload["density"], dtype=float), payload["n_samples"],
                   payload.get("meta", {}))

    @classmethod
    def from_text(cls, text: str, n_samples: int = 0, meta=None, path="<text>"):
        return cls(parse_matrix(text, path), n_samples, dict(meta or {}))


def format_matrix(a) -> str:
    a = np.asarray(a, dtype=float)
    return "".join(" ".join(f"{v:.17g}" for v in row) + "\n" for row in a)


def parse_matrix(text: str, path="<text>") -> np.ndarray:
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            rows.append([float(tok) for tok in line.split()])
        except ValueError as exc:
            raise ParseError(path, lineno, str(exc)) from None
    if not rows or any(len(r) != len(rows) for r in rows):
        raise ParseError(path, len(rows), "matrix must be square")
    return np.array(rows)
