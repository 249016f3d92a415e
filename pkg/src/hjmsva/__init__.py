"""Small-volatility calibration and Monte Carlo pricing for multi-factor HJM models."""

from .calibrator import CalibrationReport, QuoteGrid, Status, SwaptionQuote, bootstrap
from .curve import DiscountCurve, SwapSchedule, atm_rate, forward_grid
from .estimators import FactorDecomposer, HJMSwaptionModel, SVACalibrator
from .factors import FactorSet, FactorVolSurface, decompose
from .mcengine import PathSet, PriceEstimate, SimConfig, monte_carlo, simulate
from .svapprox import ForwardVolSurface, atm_price, sva_normal_vol, sva_price

__version__ = "0.1.0"

__all__ = [
    "CalibrationReport",
    "DiscountCurve",
    "FactorDecomposer",
    "FactorSet",
    "FactorVolSurface",
    "ForwardVolSurface",
    "HJMSwaptionModel",
    "PathSet",
    "PriceEstimate",
    "QuoteGrid",
    "SVACalibrator",
    "SimConfig",
    "Status",
    "SwapSchedule",
    "SwaptionQuote",
    "atm_price",
    "atm_rate",
    "bootstrap",
    "decompose",
    "forward_grid",
    "monte_carlo",
    "simulate",
    "sva_normal_vol",
    "sva_price",
]
