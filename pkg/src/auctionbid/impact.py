"""Own-bid price impact estimated from forecast auction curves.

Curves are forecast by a pointwise moving average over the last ``K`` days.
The excess supply ``z(p) = S(p) - D(p)`` of the forecast is tabulated on the
full price grid; inverting it maps a volume offset to a price.  A scenario
price ``p`` is matched by the shift ``xi = D(p) - S(p)``, and a signed bid
``b`` (sell positive) then clears where ``z(p) = -(xi + b)``.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .curves import (
    MARKET_GRIDS,
    SUPPLY,
    AggregatedCurve,
    PriceGrid,
    volume_at,
)
from .exceptions import (
    DegenerateSlope,
    InsufficientHistory,
    NonMonotoneExcess,
    ValidationError,
)
from .validation import N_MARKETS

# one day's curves: per market a (supply, demand) pair
CurveSet = Sequence[tuple[AggregatedCurve, AggregatedCurve]]


@dataclass(frozen=True)
class ImpactConfig:
    delta: float = 1.0
    slope_fraction: float = 0.05
    window: int = 28

    def __post_init__(self):
        if self.delta < 0:
            raise ValidationError("market efficiency factor delta must be >= 0")
        if not 0 < self.slope_fraction < 1:
            raise ValidationError("slope_fraction must lie in (0, 1)")
        if self.window < 1:
            raise ValidationError("curve window K must be >= 1")


@dataclass(frozen=True)
class CurveForecast:
    supply: tuple[AggregatedCurve, ...]
    demand: tuple[AggregatedCurve, ...]
    window: int

    def __post_init__(self):
        if self.window < 1:
            raise ValidationError("window must be >= 1")
        if len(self.supply) != len(self.demand):
            raise ValidationError("supply and demand forecasts must cover the same markets")

    def __len__(self):
        return len(self.supply)

    @classmethod
    def from_curve_set(cls, curves: CurveSet) -> CurveForecast:
        """Use one day's realised curves as a (perfect) forecast."""
        return cls(tuple(c[0] for c in curves), tuple(c[1] for c in curves), 1)


def _average_side(curves: Sequence[AggregatedCurve], grid: PriceGrid | None) -> AggregatedCurve:
    side = curves[0].side
    # union of breakpoints is exact for the continuous pieces; the extra
    # tick next to each curve end reproduces its jump to zero on the grid
    parts = [c.prices for c in curves]
    tick = grid.tick if grid is not None else 0.1
    if side == SUPPLY:
        parts.append(np.array([c.prices[0] - tick for c in curves]))
    else:
        parts.append(np.array([c.prices[-1] + tick for c in curves]))
    xs = np.unique(np.round(np.concatenate(parts), 10))
    if grid is not None:
        xs = xs[(xs >= grid.p_min) & (xs <= grid.p_max)]
    vol = np.mean([volume_at(c, xs) for c in curves], axis=0)
    if side == SUPPLY:
        vol = np.maximum.accumulate(vol)
    else:
        vol = np.maximum.accumulate(vol[::-1])[::-1]
    return AggregatedCurve(side, xs, vol, grid)


def forecast_curves(history: Sequence[CurveSet], window: int, grids: Sequence[PriceGrid | None] | None = None) -> CurveForecast:
    """Pointwise mean of the ``window`` most recent daily curve sets.

    ``history`` is ordered oldest first; every entry holds the same hour's
    curves for all markets.
    """
    if window < 1:
        raise ValidationError("window must be >= 1")
    if len(history) < window:
        raise InsufficientHistory(f"need {window} days of curves, have {len(history)}")
    recent = history[-window:]
    n = len(recent[0])
    if grids is None:
        grids = [recent[0][i][0].grid for i in range(n)]
    supply = tuple(_average_side([day[i][0] for day in recent], grids[i]) for i in range(n))
    demand = tuple(_average_side([day[i][1] for day in recent], grids[i]) for i in range(n))
    return CurveForecast(supply, demand, window)


class ImpactCurve:
    """Excess supply of one market tabulated at every grid tick.

    ``inverse`` maps an excess-supply level to the price where it is reached,
    interpolating between ticks and clamping to the grid bounds.
    """

    def __init__(self, prices: np.ndarray, excess: np.ndarray, grid: PriceGrid):
        prices = np.asarray(prices, dtype=float)
        excess = np.asarray(excess, dtype=float)
        if excess[-1] <= excess[0]:
            raise NonMonotoneExcess("excess supply is flat over the whole grid")
        self.prices = prices
        self.excess = np.maximum.accumulate(excess)
        self.grid = grid
        self.prices.setflags(write=False)
        self.excess.setflags(write=False)

    @classmethod
    def from_curves(cls, supply: AggregatedCurve, demand: AggregatedCurve, grid: PriceGrid) -> ImpactCurve:
        prices = grid.prices()
        return cls(prices, volume_at(supply, prices) - volume_at(demand, prices), grid)

    def z(self, p):
        return np.interp(p, self.prices, self.excess)

    def inverse(self, z):
        """Price at which the excess supply equals ``z``.

        Exact hits on a flat stretch return the stretch midpoint.
        """
        z = np.asarray(z, dtype=float)
        ex, pr = self.excess, self.prices
        n = ex.size
        lo = np.searchsorted(ex, z, side="left")
        lo_c = np.clip(lo, 1, n - 1)
        e0, e1 = ex[lo_c - 1], ex[lo_c]
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.where(e1 > e0, (z - e0) / (e1 - e0), 0.0)
        out = pr[lo_c - 1] + frac * (pr[lo_c] - pr[lo_c - 1])
        exact = ex[np.clip(lo, 0, n - 1)] == z
        if np.any(exact):
            # only exact hits can sit on a flat stretch
            hi = np.searchsorted(ex, z[exact] if z.ndim else z, side="right")
            mid = 0.5 * (pr[np.clip(lo[exact] if z.ndim else lo, 0, n - 1)] + pr[np.clip(hi - 1, 0, n - 1)])
            out = np.array(out, dtype=float)
            out[exact] = mid
        out = np.where(z < ex[0], pr[0], out)
        out = np.where(z > ex[-1], pr[-1], out)
        return float(out) if out.ndim == 0 else out

    def price_for_offset(self, offset):
        """Clearing price after adding ``offset`` MW of excess demand."""
        return self.inverse(-np.asarray(offset, dtype=float))


def build_impact_curve(fc: CurveForecast, grids: Sequence[PriceGrid] | PriceGrid | None = None) -> list[ImpactCurve]:
    """Tabulate the excess supply of every forecast market on its grid."""
    n = len(fc)
    if grids is None:
        grids = [fc.supply[i].grid or MARKET_GRIDS[i] for i in range(n)]
    elif isinstance(grids, PriceGrid):
        grids = [grids] * n
    return [ImpactCurve.from_curves(fc.supply[i], fc.demand[i], grids[i]) for i in range(n)]


def scenario_shift(fc: CurveForecast, p_hat, grids: Sequence[PriceGrid] | None = None) -> np.ndarray:
    """Volume shift aligning the forecast curves with each scenario price.

    ``p_hat`` has shape (..., n_markets); prices are clamped to the grid.
    """
    p_hat = np.asarray(p_hat, dtype=float)
    n = len(fc)
    xi = np.empty_like(p_hat)
    for i in range(n):
        grid = grids[i] if grids is not None else (fc.supply[i].grid or MARKET_GRIDS[i])
        p = grid.clip(p_hat[..., i])
        xi[..., i] = volume_at(fc.demand[i], p) - volume_at(fc.supply[i], p)
    return xi


def impacted_prices(ic: Sequence[ImpactCurve], xi, b) -> np.ndarray:
    """Prices after own bids ``b``; broadcasts ``b`` (..., 5) against ``xi`` (M, 5).

    Output shape is ``b.shape[:-1] + xi.shape``.
    """
    xi = np.asarray(xi, dtype=float)
    b = np.asarray(b, dtype=float)
    offset = xi + b[..., np.newaxis, :] if b.ndim > 1 else xi + b
    out = np.empty(np.broadcast_shapes(offset.shape), dtype=float)
    for i, curve in enumerate(ic):
        out[..., i] = curve.price_for_offset(offset[..., i])
    return out


def raw_deltas(ic: Sequence[ImpactCurve], xi, b) -> np.ndarray:
    """Per-market price change caused by ``b``, before sequential coupling.

    Zero bids give exactly zero change.
    """
    xi = np.asarray(xi, dtype=float)
    base = impacted_prices(ic, xi, np.zeros(xi.shape[-1]))
    return impacted_prices(ic, xi, b) - base


def sequential_adjust(raw, delta_factor: float) -> np.ndarray:
    """Propagate the day-ahead impact into the intraday auctions."""
    if delta_factor < 0:
        raise ValidationError("delta_factor must be >= 0")
    raw = np.asarray(raw, dtype=float)
    out = raw.copy()
    out[..., 1:] += delta_factor * raw[..., :1]
    return out


def demand_basis(fc: CurveForecast, expected_price, grids: Sequence[PriceGrid] | None = None) -> np.ndarray:
    """Forecast demand volume at the expected price, per market."""
    expected_price = np.asarray(expected_price, dtype=float)
    out = np.empty(len(fc))
    for i in range(len(fc)):
        grid = grids[i] if grids is not None else (fc.demand[i].grid or MARKET_GRIDS[i])
        out[i] = volume_at(fc.demand[i], grid.clip(expected_price[i]))
    return out


@dataclass(frozen=True)
class LinearImpact:
    a: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=float)
        if a.shape != (N_MARKETS,) or not np.all(np.isfinite(a)):
            raise ValidationError("linear impact needs 5 finite slopes")
        a.setflags(write=False)
        object.__setattr__(self, "a", a)


def estimate_linear_impact(ic: Sequence[ImpactCurve], xi_mean, config: ImpactConfig, basis) -> LinearImpact:
    """Central-difference slope of the impact curve around the mean shift.

    The step is ``nu = slope_fraction * basis`` and the stored slope is per MW
    of sell bid, so it is non-positive on monotone curves.
    """
    xi_mean = np.asarray(xi_mean, dtype=float)
    nu = config.slope_fraction * np.asarray(basis, dtype=float)
    if np.any(nu <= 0):
        raise ValidationError("slope step nu must be positive")
    a = np.empty(len(ic))
    for i, curve in enumerate(ic):
        up = curve.price_for_offset(xi_mean[i] + nu[i])
        down = curve.price_for_offset(xi_mean[i] - nu[i])
        if up == down and up in (curve.prices[0], curve.prices[-1]):
            raise DegenerateSlope(f"market {i}: both evaluations clamp to {up}")
        a[i] = (up - down) / (2.0 * nu[i])
    return LinearImpact(a)


class ImpactEvaluator:
    """Raw price changes of bid vectors across fixed scenario shifts.

    The unimpacted prices are computed once, so repeated calls during an
    optimisation only pay for the impacted lookup.
    """

    def __init__(self, ic: Sequence[ImpactCurve], xi):
        self.ic = list(ic)
        self.xi = np.asarray(xi, dtype=float)
        self.base = impacted_prices(self.ic, self.xi, np.zeros(self.xi.shape[-1]))

    def __call__(self, b) -> np.ndarray:
        return impacted_prices(self.ic, self.xi, b) - self.base
