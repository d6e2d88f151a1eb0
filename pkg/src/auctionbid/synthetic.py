"""Deterministic synthetic market data for desk-scale studies.

Each hourly auction clears at a target price built from a daily and a weekly
sinusoid plus noise.  The four intraday prices deviate from the day-ahead
price by a zero-sum quarter shape, so the day-ahead price always equals the
quarter average.  Around the target both curves are ladders with constant
slope (the market liquidity), bracketed by large bids at the grid bounds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curves import DEMAND, MARKET_GRIDS, SUPPLY, aggregate, volume_at
from .data_io import CurveHistory, DailySeries, DataBundle, HourlySeries
from .exceptions import ValidationError
from .forecasting import EXOG_COLUMNS, FUEL_COLUMNS, PriceHistory

QUARTER_SHAPE = np.array([-1.5, -0.5, 0.5, 1.5])


@dataclass(frozen=True)
class SyntheticMarketSpec:
    seed: int = 0
    days: int = 60
    start: str = "2024-01-01"
    base_price: float = 50.0
    daily_amplitude: float = 15.0
    weekly_amplitude: float = 5.0
    noise: float = 5.0
    ia_noise: float = 2.0
    da_liquidity: float = 200.0
    ia_liquidity: float = 20.0
    levels: int = 40
    level_step: float = 1.0
    da_volume: float = 20000.0
    ia_volume: float = 2000.0
    load_level: float = 50000.0
    solar_capacity: float = 20000.0
    wind_on_capacity: float = 30000.0
    wind_off_capacity: float = 6000.0
    exog_correlation: float = 0.7

    def __post_init__(self):
        if self.days < 1:
            raise ValidationError("days must be >= 1")
        if self.da_liquidity <= 0 or self.ia_liquidity <= 0:
            raise ValidationError("liquidity slopes must be positive")
        if self.noise < 0 or self.ia_noise < 0:
            raise ValidationError("noise scales must be >= 0")
        if self.levels < 2 or self.level_step <= 0:
            raise ValidationError("need at least 2 ladder levels and a positive step")
        if abs(round(self.level_step / 0.1) * 0.1 - self.level_step) > 1e-9:
            raise ValidationError("level_step must be a multiple of the 0.1 tick")
        if not 0 <= self.exog_correlation <= 1:
            raise ValidationError("exog_correlation must lie in [0, 1]")

    @property
    def dates(self) -> np.ndarray:
        return np.datetime64(self.start, "D") + np.arange(self.days)


def _profile(spec: SyntheticMarketSpec, dates, hour_pos):
    day = dates.astype(np.int64)[:, np.newaxis]
    daily = spec.daily_amplitude * np.sin(2 * np.pi * (hour_pos - 8.0) / 24.0)
    weekly = spec.weekly_amplitude * np.sin(2 * np.pi * day / 7.0)
    return spec.base_price + daily + weekly


def target_prices(spec: SyntheticMarketSpec) -> np.ndarray:
    """Noise-free clearing prices, shape (days, 24, 5)."""
    dates = spec.dates
    hours = np.arange(24, dtype=float)[np.newaxis, :]
    da = _profile(spec, dates, hours + 0.5)
    ramp = 0.25 * (_profile(spec, dates, hours + 1.0) - _profile(spec, dates, hours))
    out = np.empty((spec.days, 24, 5))
    out[..., 0] = da
    out[..., 1:] = da[..., np.newaxis] + ramp[..., np.newaxis] * QUARTER_SHAPE
    return out


def ladder_curves(price: float, liquidity: float, volume: float, grid, levels: int, step: float):
    """Supply and demand curves crossing at ``price`` with slope ``liquidity`` MW/EUR per side."""
    centre = float(grid.snap(price))
    half = levels // 2
    ks = np.arange(-half, levels - half + 1)
    level_prices = np.round(centre + ks * step, 10)
    level_prices = level_prices[(level_prices > grid.p_min) & (level_prices < grid.p_max)]
    block = liquidity * step
    big = 10.0 * volume

    supply = {grid.p_min: volume, grid.p_max: big}
    demand = {grid.p_min: big}
    for p in level_prices:
        supply[float(p)] = block
        demand[float(p)] = block
    S = aggregate(supply, SUPPLY, grid)
    base = aggregate({**demand, grid.p_max: 0.0}, DEMAND, grid)
    demand[grid.p_max] = float(volume_at(S, price) - volume_at(base, price))
    D = aggregate(demand, DEMAND, grid)
    return S, D


def generate_synthetic(spec: SyntheticMarketSpec) -> DataBundle:
    dates = spec.dates
    n = spec.days
    root = np.random.SeedSequence(spec.seed)
    path_seed, *day_seeds = root.spawn(n + 1)
    path_rng = np.random.default_rng(path_seed)

    hours = np.arange(24)
    # exogenous series
    load_shape = 1.0 + 0.15 * np.sin(2 * np.pi * (hours - 8.0) / 24.0)
    daylight = np.clip(np.sin(np.pi * (hours - 6.0) / 12.0), 0.0, None)
    wind_state = np.empty(n * 24)
    x = 0.0
    shocks = path_rng.normal(0.0, 0.25, size=n * 24)
    for k in range(n * 24):
        x = 0.97 * x + shocks[k]
        wind_state[k] = x
    wind_share = (1.0 / (1.0 + np.exp(-wind_state))).reshape(n, 24)
    offshore_share = np.clip(wind_share + path_rng.normal(0.0, 0.05, size=(n, 24)), 0.0, 1.0)
    fuel_steps = path_rng.normal(0.0, 1.0, size=(n, 4)) * np.array([0.8, 1.0, 0.5, 0.8])
    fuels = np.array([80.0, 100.0, 30.0, 80.0]) + np.cumsum(fuel_steps, axis=0)

    prices = target_prices(spec)
    exog = np.empty((n, 24, 4))
    rho = spec.exog_correlation
    for d in range(n):
        rng = np.random.default_rng(day_seeds[d])
        common = rng.normal(size=24)
        idio = rng.normal(size=24)
        quarter = rng.normal(size=(24, 4))
        clouds = rng.uniform(0.3, 1.0)
        load_noise = rng.normal(size=24)
        shock = rho * common + np.sqrt(1.0 - rho**2) * idio
        prices[d, :, :] += spec.noise * shock[:, np.newaxis]
        prices[d, :, 1:] += spec.ia_noise * (quarter - quarter.mean(axis=1, keepdims=True))
        exog[d, :, 0] = spec.load_level * load_shape * (1.0 + 0.02 * common) + 200.0 * load_noise
        exog[d, :, 1] = spec.solar_capacity * clouds * daylight
        exog[d, :, 2] = spec.wind_on_capacity * wind_share[d]
        exog[d, :, 3] = spec.wind_off_capacity * offshore_share[d]
    for i, grid in enumerate(MARKET_GRIDS):
        prices[..., i] = np.clip(prices[..., i], grid.p_min + 50.0, grid.p_max - 50.0)
    # the day-ahead price stays exactly the quarter average
    prices[..., 0] = prices[..., 1:].mean(axis=-1)

    curves = []
    for d in range(n):
        day = []
        for h in range(24):
            hour = []
            for i, grid in enumerate(MARKET_GRIDS):
                liquidity, volume = (spec.da_liquidity, spec.da_volume) if i == 0 else (spec.ia_liquidity, spec.ia_volume)
                hour.append(ladder_curves(prices[d, h, i], liquidity, volume, grid, spec.levels, spec.level_step))
            day.append(tuple(hour))
        curves.append(tuple(day))

    return DataBundle(
        PriceHistory(dates, prices),
        CurveHistory(dates, tuple(curves)),
        HourlySeries(dates, exog, EXOG_COLUMNS),
        DailySeries(dates, fuels, FUEL_COLUMNS),
    )
