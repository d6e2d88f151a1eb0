"""Aggregated auction curves: construction, evaluation, inversion and clearing.

A supply curve gives the cumulative volume offered at prices ``<= p`` and a
demand curve the cumulative volume bid at prices ``>= p``.  Between bidden
prices both are linear.  Below the lowest supply price the supply volume is
zero, above the highest demand price the demand volume is zero; on the other
side they stay at their total.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    EmptyLadder,
    IncompatibleGrids,
    OffGridPrice,
    ValidationError,
    VolumeOutOfRange,
)

SUPPLY = "S"
DEMAND = "D"
_SIDES = (SUPPLY, DEMAND)


@dataclass(frozen=True)
class PriceGrid:
    """Admissible bid prices ``p_min, p_min + tick, ..., p_max``."""

    p_min: float
    p_max: float
    tick: float = 0.1

    def __post_init__(self):
        if not self.p_min < self.p_max:
            raise ValidationError("p_min must be below p_max")
        if not self.tick > 0:
            raise ValidationError("tick must be positive")
        steps = (self.p_max - self.p_min) / self.tick
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ValidationError("price range must be an integer number of ticks")

    @property
    def n_ticks(self) -> int:
        return round((self.p_max - self.p_min) / self.tick) + 1

    def prices(self) -> np.ndarray:
        # integer tick counts keep the samples free of accumulated drift
        return np.round(self.p_min + self.tick * np.arange(self.n_ticks), 10)

    def contains(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        k = (p - self.p_min) / self.tick
        eps = 1e-6
        on_tick = np.abs(k - np.round(k)) <= eps
        return on_tick & (p >= self.p_min - eps * self.tick) & (p <= self.p_max + eps * self.tick)

    def snap(self, p) -> np.ndarray:
        """Round prices to the nearest tick inside the grid."""
        p = np.asarray(p, dtype=float)
        k = np.clip(np.round((p - self.p_min) / self.tick), 0, self.n_ticks - 1)
        return np.round(self.p_min + k * self.tick, 10)

    def clip(self, p) -> np.ndarray:
        return np.clip(np.asarray(p, dtype=float), self.p_min, self.p_max)


DA_GRID = PriceGrid(-500.0, 3000.0, 0.1)
IA_GRID = PriceGrid(-3000.0, 3000.0, 0.1)
MARKET_GRIDS = (DA_GRID, IA_GRID, IA_GRID, IA_GRID, IA_GRID)


@dataclass(frozen=True)
class BidLadder:
    """All bids of one auction side, aggregated per price."""

    side: str
    entries: Mapping[float, float]
    grid: PriceGrid | None = None

    def __post_init__(self):
        if self.side not in _SIDES:
            raise ValidationError(f"side must be 'S' or 'D', got {self.side!r}")
        for price, volume in self.entries.items():
            if not volume >= 0:
                raise ValidationError(f"bid volume at {price} must be non-negative, got {volume}")


@dataclass(frozen=True, eq=False)
class AggregatedCurve:
    """Piecewise-linear cumulative volume as a function of price."""

    side: str
    prices: np.ndarray
    volumes: np.ndarray
    grid: PriceGrid | None = field(default=None)

    def __post_init__(self):
        if self.side not in _SIDES:
            raise ValidationError(f"side must be 'S' or 'D', got {self.side!r}")
        prices = np.array(self.prices, dtype=float)
        volumes = np.array(self.volumes, dtype=float)
        if prices.ndim != 1 or prices.shape != volumes.shape or prices.size == 0:
            raise ValidationError("curve needs matching, non-empty price and volume arrays")
        if np.any(np.diff(prices) <= 0):
            raise ValidationError("curve prices must be strictly increasing")
        steps = np.diff(volumes)
        tol = 1e-9 * max(1.0, float(np.max(np.abs(volumes))))
        if self.side == SUPPLY and np.any(steps < -tol):
            raise ValidationError("supply volumes must be non-decreasing in price")
        if self.side == DEMAND and np.any(steps > tol):
            raise ValidationError("demand volumes must be non-increasing in price")
        prices.setflags(write=False)
        volumes.setflags(write=False)
        object.__setattr__(self, "prices", prices)
        object.__setattr__(self, "volumes", volumes)

    @property
    def breakpoints(self) -> list[tuple[float, float]]:
        return list(zip(self.prices.tolist(), self.volumes.tolist()))

    @property
    def volume_range(self) -> tuple[float, float]:
        return float(self.volumes.min()), float(self.volumes.max())

    def volume_at(self, p):
        return volume_at(self, p)

    def price_at(self, volume):
        return price_at(self, volume)

    def __eq__(self, other):
        if not isinstance(other, AggregatedCurve):
            return NotImplemented
        return (
            self.side == other.side
            and self.grid == other.grid
            and np.array_equal(self.prices, other.prices)
            and np.array_equal(self.volumes, other.volumes)
        )

    def __repr__(self):
        return f"AggregatedCurve(side={self.side!r}, breakpoints={self.breakpoints!r})"


@dataclass(frozen=True)
class ClearingResult:
    price: float
    volume: float
    degenerate: bool = False


def aggregate(ladder: BidLadder | Mapping[float, float], side: str | None = None, grid: PriceGrid | None = None) -> AggregatedCurve:
    """Cumulate a bid ladder into its aggregated curve.

    The breakpoints are exactly the bidden prices.  ``ladder`` may also be a
    plain ``{price: volume}`` mapping together with ``side``.
    """
    if not isinstance(ladder, BidLadder):
        ladder = BidLadder(side, dict(ladder), grid)
    grid = grid if grid is not None else ladder.grid
    if not ladder.entries:
        raise EmptyLadder("cannot aggregate an empty bid ladder")
    prices = np.array(sorted(ladder.entries), dtype=float)
    if grid is not None:
        bad = ~grid.contains(prices)
        if np.any(bad):
            raise OffGridPrice(f"prices off the grid: {prices[bad][:5].tolist()}")
    bids = np.array([ladder.entries[p] for p in prices], dtype=float)
    if ladder.side == SUPPLY:
        volumes = np.cumsum(bids)
    else:
        volumes = np.cumsum(bids[::-1])[::-1]
    return AggregatedCurve(ladder.side, prices, volumes, grid)


def volume_at(curve: AggregatedCurve, p):
    """Cumulative volume at price(s) ``p``."""
    p_arr = np.asarray(p, dtype=float)
    out = np.interp(p_arr, curve.prices, curve.volumes)
    if curve.side == SUPPLY:
        out = np.where(p_arr < curve.prices[0], 0.0, out)
    else:
        out = np.where(p_arr > curve.prices[-1], 0.0, out)
    return float(out) if out.ndim == 0 else out


def _left_limit(curve: AggregatedCurve, p: np.ndarray) -> np.ndarray:
    out = np.interp(p, curve.prices, curve.volumes)
    if curve.side == SUPPLY:
        return np.where(p <= curve.prices[0], 0.0, out)
    return np.where(p > curve.prices[-1], 0.0, out)


def _right_limit(curve: AggregatedCurve, p: np.ndarray) -> np.ndarray:
    out = np.interp(p, curve.prices, curve.volumes)
    if curve.side == SUPPLY:
        return np.where(p < curve.prices[0], 0.0, out)
    return np.where(p >= curve.prices[-1], 0.0, out)


def price_at(curve: AggregatedCurve, volume):
    """Pseudo-inverse of :func:`volume_at` on the curve's volume range.

    On a flat stretch the lowest price is returned for supply and the highest
    for demand, so that ``volume_at(curve, price_at(curve, z)) == z``.
    """
    z = np.asarray(volume, dtype=float)
    lo, hi = curve.volume_range
    tol = 1e-9 * max(1.0, abs(lo), abs(hi))
    if np.any(z < lo - tol) or np.any(z > hi + tol):
        raise VolumeOutOfRange(f"volume outside curve range [{lo}, {hi}]")
    z = np.clip(z, lo, hi)
    if curve.side == SUPPLY:
        prices, volumes = curve.prices, curve.volumes
    else:
        prices, volumes = curve.prices[::-1], curve.volumes[::-1]
    # first breakpoint whose volume reaches z; for demand (reversed) the
    # highest such price
    k = np.searchsorted(volumes, z, side="left")
    k = np.clip(k, 0, volumes.size - 1)
    prev = np.maximum(k - 1, 0)
    dv = volumes[k] - volumes[prev]
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(dv > 0, (z - volumes[prev]) / dv, 1.0)
    out = np.where(k == 0, prices[0], prices[prev] + frac * (prices[k] - prices[prev]))
    return float(out) if out.ndim == 0 else out


def _resolve_span(supply: AggregatedCurve, demand: AggregatedCurve, grid: PriceGrid | None) -> tuple[float, float]:
    if grid is None:
        if supply.grid is not None and demand.grid is not None and supply.grid != demand.grid:
            raise IncompatibleGrids(f"supply grid {supply.grid} differs from demand grid {demand.grid}")
        grid = supply.grid if supply.grid is not None else demand.grid
    if grid is not None:
        return grid.p_min, grid.p_max
    p_min = min(supply.prices[0], demand.prices[0])
    p_max = max(supply.prices[-1], demand.prices[-1])
    return float(p_min), float(p_max)


def _first_nonneg(xs, val, right, left):
    """inf{p : f(p) >= 0} for a non-decreasing piecewise-linear f.

    ``val``, ``right``, ``left`` are f and its one-sided limits at the
    breakpoints ``xs``; f is linear between consecutive breakpoints.
    Returns None when f < 0 everywhere on [xs[0], xs[-1]].
    """
    point_hit = (val >= 0) | (right >= 0)
    seg_hit = np.zeros_like(point_hit)
    seg_hit[:-1] = left[1:] >= 0
    hit = point_hit | seg_hit
    if not np.any(hit):
        return None
    k = int(np.argmax(hit))
    if point_hit[k]:
        return float(xs[k])
    r, l = right[k], left[k + 1]
    return float(xs[k] + (0.0 - r) / (l - r) * (xs[k + 1] - xs[k]))


def clear(supply: AggregatedCurve, demand: AggregatedCurve, grid: PriceGrid | None = None) -> ClearingResult:
    """Intersect supply and demand on ``[p_min, p_max]``.

    The span comes from ``grid``, else from the curves' grid, else from the
    union of their breakpoints.  When the curves do not cross inside the span
    the boundary fallback is used and flagged ``degenerate``.  If the excess
    supply is zero on a whole interval its midpoint is returned.
    """
    if supply.side != SUPPLY or demand.side != DEMAND:
        raise ValidationError("clear expects a supply and a demand curve")
    p_min, p_max = _resolve_span(supply, demand, grid)

    s_lo, d_lo = volume_at(supply, p_min), volume_at(demand, p_min)
    if d_lo < s_lo:
        return ClearingResult(p_min, d_lo, True)
    s_hi, d_hi = volume_at(supply, p_max), volume_at(demand, p_max)
    if s_hi < d_hi:
        return ClearingResult(p_max, s_hi, True)

    xs = np.concatenate(([p_min, p_max], supply.prices, demand.prices))
    xs = np.unique(xs[(xs >= p_min) & (xs <= p_max)])
    val = volume_at(supply, xs) - volume_at(demand, xs)
    right = _right_limit(supply, xs) - _right_limit(demand, xs)
    left = _left_limit(supply, xs) - _left_limit(demand, xs)
    # the excess supply is constant outside the span
    right[-1] = val[-1]
    left[0] = val[0]

    p_lo = _first_nonneg(xs, val, right, left)
    # sup{p : f(p) <= 0} via the mirrored function -f(-q)
    q = _first_nonneg(-xs[::-1], -val[::-1], -left[::-1], -right[::-1])
    p_hi = -q if q is not None else p_lo
    price = 0.5 * (p_lo + p_hi) if p_hi > p_lo else p_lo
    volume = min(volume_at(supply, price), volume_at(demand, price))
    return ClearingResult(float(price), float(volume), False)


def shift_by_own_bid(supply: AggregatedCurve, demand: AggregatedCurve, b: float) -> tuple[AggregatedCurve, AggregatedCurve]:
    """Add an unlimited own bid of signed volume ``b``.

    A sell bid (``b > 0``) at the minimum price lifts every supply volume by
    ``b``; a buy bid lifts every demand volume by ``-b``.  The bidden price
    sets do not change.
    """
    b = float(b)
    if not np.isfinite(b):
        raise ValidationError("own bid must be finite")
    if b > 0:
        supply = AggregatedCurve(SUPPLY, supply.prices, supply.volumes + b, supply.grid)
    elif b < 0:
        demand = AggregatedCurve(DEMAND, demand.prices, demand.volumes - b, demand.grid)
    return supply, demand


def clear_with_bid(supply: AggregatedCurve, demand: AggregatedCurve, b: float, grid: PriceGrid | None = None) -> ClearingResult:
    return clear(*shift_by_own_bid(supply, demand, b), grid=grid)
