"""Trading gains, their decomposition and per-MWh averages."""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass, fields

import numpy as np

from .exceptions import ValidationError
from .strategies import (
    DEFAULT_STRUCTURE,
    S_WEIGHTS,
    FeeSchedule,
    MarketStructure,
    expand,
    transaction_cost,
)
from .validation import check_market_vector, check_portfolio


@dataclass(frozen=True)
class GainBreakdown:
    ia_revenue: float
    arbitrage: float
    impact: float
    fees: float
    total: float

    COLUMNS = ("ia_revenue", "arbitrage", "impact", "fees", "total")

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, f.name) for f in fields(self))

    def residual(self) -> float:
        return self.total - (self.ia_revenue + self.arbitrage + self.impact - self.fees)


def gain_constrained(b, prices, fees: FeeSchedule, s=S_WEIGHTS) -> float:
    """Revenue minus fees of a bid vector that exactly covers the portfolio."""
    b = check_market_vector(b, "bids")
    prices = check_market_vector(prices, "prices")
    return float((prices * s) @ b - (fees.array * s) @ np.abs(b))


def gain_full(b, v, prices, fees: FeeSchedule, R, structure: MarketStructure = DEFAULT_STRUCTURE) -> float:
    """Gain including the penalty on any volume left uncovered.

    ``R`` holds one imbalance price per delivery period.
    """
    b = check_market_vector(b, "bids")
    v = check_portfolio(v)
    R = np.asarray(R, dtype=float)
    if R.shape != v.shape or not np.all(np.isfinite(R)):
        raise ValidationError("imbalance prices must be finite, one per delivery period")
    s = structure.s
    imbalance = v - structure.matrix.T @ b
    return gain_constrained(b, prices, fees, s) - float(np.abs(imbalance) @ R)


def decompose(b0: float, v, p0, deltas, fees: FeeSchedule, s=S_WEIGHTS) -> GainBreakdown:
    """Split the constrained gain into IA revenue, DA-IA arbitrage, impact and fees."""
    v = check_portfolio(v)
    p0 = check_market_vector(p0, "prices")
    deltas = check_market_vector(deltas, "price changes")
    b0 = float(b0)
    b = expand(b0, v)
    ia_revenue = float((s[1:] * p0[1:]) @ v)
    arbitrage = float((s[0] * p0[0] - s[1:] @ p0[1:]) * b0)
    impact = float((s * deltas) @ b)
    cost = transaction_cost(b0, v, fees, s)
    total = gain_constrained(b, p0 + deltas, fees, s)
    return GainBreakdown(ia_revenue, arbitrage, impact, cost, total)


def actual_gain(b_hat, realized_p0, realized_deltas, fees: FeeSchedule, s=S_WEIGHTS) -> float:
    """Gain of a submitted bid against realised prices and realised impact."""
    p = check_market_vector(realized_p0, "prices") + check_market_vector(realized_deltas, "price changes")
    return gain_constrained(b_hat, p, fees, s)


@dataclass(frozen=True)
class AverageGain:
    value: float
    n_used: int
    n_excluded: int

    def __float__(self):
        return self.value


def average_gain(series: Iterable[tuple[float, object]]) -> AverageGain:
    """Mean gain per MWh of delivered volume over (gain, v) pairs.

    Hours whose portfolio sums to zero cannot be normalised and are skipped;
    their number is reported.
    """
    total, used, excluded = 0.0, 0, 0
    for gain, v in series:
        level = float(np.sum(v)) / len(v)
        if level == 0.0:
            excluded += 1
            continue
        total += gain / level
        used += 1
    value = total / used if used else float("nan")
    return AverageGain(value, used, excluded)
