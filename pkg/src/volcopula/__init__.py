"""Empirical and K-model copulas of per-minute volume imbalances."""
from .errors import VolCopulaError
from .histogram import CopulaHistogram
from .marketdata import Session, StockSeries, TradeRecord, TradeTable
from .models import KModelParams
from .quadrature import QuadratureSpec

__version__ = "0.1.0"

__all__ = ["CopulaHistogram", "KModelParams", "QuadratureSpec", "Session", "StockSeries",
           "TradeRecord", "TradeTable", "VolCopulaError", "__version__"]
