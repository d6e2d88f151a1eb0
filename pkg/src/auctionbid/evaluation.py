"""Forecast scores and the paired bootstrap test on mean gain differences."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import AlignmentError, LengthMismatch, ValidationError

QUANTILE_LEVELS = np.arange(1, 100) / 100.0


def _align(scenarios, truth):
    scenarios = np.asarray(scenarios, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if scenarios.ndim < 1 or scenarios.shape[:-1] != truth.shape or scenarios.shape[-1] == 0:
        raise AlignmentError(f"scenario array {scenarios.shape} does not match realisations {truth.shape}")
    return scenarios, truth


def lower_quantiles(scenarios, levels=QUANTILE_LEVELS) -> np.ndarray:
    """Empirical quantiles as the order statistic at ``ceil(r * M)``; levels on the last axis."""
    scenarios = np.sort(np.asarray(scenarios, dtype=float), axis=-1)
    M = scenarios.shape[-1]
    idx = np.maximum(np.ceil(np.asarray(levels) * M - 1e-9).astype(int), 1) - 1
    return scenarios[..., idx]


def pinball(q, y, r):
    """Quantile loss of ``q`` at level ``r`` for outcome ``y``."""
    diff = np.asarray(y, dtype=float) - np.asarray(q, dtype=float)
    return diff * (r - (diff < 0))


def rmse(scenarios, truth) -> float:
    scenarios, truth = _align(scenarios, truth)
    return float(np.sqrt(np.mean((scenarios.mean(axis=-1) - truth) ** 2)))


def mae(scenarios, truth) -> float:
    scenarios, truth = _align(scenarios, truth)
    return float(np.mean(np.abs(np.median(scenarios, axis=-1) - truth)))


def crps(scenarios, truth, levels=QUANTILE_LEVELS) -> float:
    """CRPS approximated by twice the average pinball loss over ``levels``."""
    scenarios, truth = _align(scenarios, truth)
    q = lower_quantiles(scenarios, levels)
    loss = pinball(q, truth[..., np.newaxis], np.asarray(levels))
    return float(2.0 * loss.mean())


def crps_exact(scenarios, truth) -> float:
    """Closed-form CRPS of the empirical distribution, ``E|X - y| - E|X - X'| / 2``."""
    scenarios, truth = _align(scenarios, truth)
    first = np.abs(scenarios - truth[..., np.newaxis]).mean(axis=-1)
    spread = np.abs(scenarios[..., :, np.newaxis] - scenarios[..., np.newaxis, :]).mean(axis=(-1, -2))
    return float(np.mean(first - 0.5 * spread))


def bias(scenarios, truth) -> float:
    scenarios, truth = _align(scenarios, truth)
    return float(np.mean(scenarios.mean(axis=-1) - truth))


@dataclass(frozen=True)
class MetricsReport:
    rmse: float
    mae: float
    crps: float
    bias: float

    COLUMNS = ("rmse", "mae", "crps", "bias")

    @classmethod
    def from_scenarios(cls, scenarios, truth) -> MetricsReport:
        return cls(rmse(scenarios, truth), mae(scenarios, truth), crps(scenarios, truth), bias(scenarios, truth))

    def as_tuple(self) -> tuple:
        return (self.rmse, self.mae, self.crps, self.bias)


def bootstrap_mean_test(gains_a, gains_b, B: int = 10_000, seed=0, chunk: int = 500) -> tuple[float, float]:
    """One-sided p-values for "A beats B" and "B beats A".

    The paired differences are resampled with replacement ``B`` times.
    ``p_ab`` is the share of resampled means at or below zero, with exact
    zeros counted as one half; ``p_ba`` mirrors it.
    """
    a = np.asarray(gains_a, dtype=float).ravel()
    b = np.asarray(gains_b, dtype=float).ravel()
    if a.shape != b.shape:
        raise LengthMismatch(f"series lengths differ: {a.size} vs {b.size}")
    if a.size == 0:
        raise ValidationError("cannot test empty series")
    if B < 1:
        raise ValidationError("B must be >= 1")
    d = a - b
    n = d.size
    rng = np.random.default_rng(seed)
    below = above = ties = 0
    for start in range(0, B, chunk):
        size = min(chunk, B - start)
        means = d[rng.integers(0, n, size=(size, n))].mean(axis=1)
        below += int(np.count_nonzero(means < 0))
        above += int(np.count_nonzero(means > 0))
        ties += int(np.count_nonzero(means == 0))
    p_ab = (below + 0.5 * ties) / B
    p_ba = (above + 0.5 * ties) / B
    return p_ab, p_ba

