"""Coordinated bidding in a day-ahead auction and its quarter-hourly intraday auction."""

from .curves import DA_GRID, IA_GRID, AggregatedCurve, PriceGrid, aggregate, clear
from .exceptions import AuctionBidError, DegenerateSlope, Unbounded, ValidationError
from .forecasting import ExpertPriceModel, NaivePriceModel, bootstrap_scenarios
from .gains import GainBreakdown, decompose, gain_constrained
from .strategies import (
    STRATEGIES,
    FeeSchedule,
    RiskConfig,
    expand,
    solve_linimp,
    solve_noimp,
    solve_numeric,
    tc_min,
)

__version__ = "0.1.0"

__all__ = [
    "DA_GRID",
    "IA_GRID",
    "STRATEGIES",
    "AggregatedCurve",
    "AuctionBidError",
    "DegenerateSlope",
    "ExpertPriceModel",
    "FeeSchedule",
    "GainBreakdown",
    "NaivePriceModel",
    "PriceGrid",
    "RiskConfig",
    "Unbounded",
    "ValidationError",
    "aggregate",
    "bootstrap_scenarios",
    "clear",
    "decompose",
    "expand",
    "gain_constrained",
    "solve_linimp",
    "solve_noimp",
    "solve_numeric",
    "tc_min",
]
