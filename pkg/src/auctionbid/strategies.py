"""Optimal day-ahead bids under the imbalance constraint.

With the intraday bids fixed by ``b_i = v_i - b0`` every strategy reduces to
choosing the scalar day-ahead bid ``b0``.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from .exceptions import EmptyGains, SingularS2, Unbounded, ValidationError
from .validation import N_MARKETS, check_portfolio, check_scenarios

STRATEGIES = (
    "ia_only",
    "tc_min",
    "e_noimp",
    "e_linimp",
    "e_linimpmeff",
    "e_meff",
    "e",
    "mv",
    "var",
    "cvar",
)
NUMERIC_STRATEGIES = ("e_meff", "e", "mv", "var", "cvar")

INV_PHI = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class FeeSchedule:
    """Per-market fees in EUR/MWh, day-ahead first."""

    tau: tuple = (0.05, 0.10, 0.10, 0.10, 0.10)

    def __post_init__(self):
        tau = tuple(float(t) for t in self.tau)
        if len(tau) != N_MARKETS or any(t < 0 for t in tau):
            raise ValidationError("fee schedule needs 5 non-negative fees")
        object.__setattr__(self, "tau", tau)

    @classmethod
    def from_pair(cls, tau_da: float, tau_ia: float) -> FeeSchedule:
        return cls((tau_da,) + (tau_ia,) * 4)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.tau)


@dataclass(frozen=True, eq=False)
class MarketStructure:
    """Which markets deliver in which periods.

    ``S1`` (n_periods x n_first) and ``S2`` (n_periods x n_periods) follow
    ``v = S1 b1 + S2 b2``; ``s`` holds each product's delivery length as a
    fraction of the whole span.
    """

    S1: np.ndarray = field(default_factory=lambda: np.ones((4, 1)))
    S2: np.ndarray = field(default_factory=lambda: np.eye(4))

    def __post_init__(self):
        S1 = np.atleast_2d(np.asarray(self.S1, dtype=float))
        if S1.shape[0] == 1 and S1.shape[1] > 1:
            S1 = S1.T
        S2 = np.atleast_2d(np.asarray(self.S2, dtype=float))
        if S2.shape[0] != S2.shape[1] or S1.shape[0] != S2.shape[0]:
            raise ValidationError("S2 must be square with as many rows as S1")
        object.__setattr__(self, "S1", S1)
        object.__setattr__(self, "S2", S2)

    @property
    def matrix(self) -> np.ndarray:
        """Summation matrix with rows = markets, columns = delivery periods."""
        return np.hstack([self.S1, self.S2]).T

    @property
    def s(self) -> np.ndarray:
        S = self.matrix
        return S.sum(axis=1) / S.shape[1]


DEFAULT_STRUCTURE = MarketStructure()
S_WEIGHTS = DEFAULT_STRUCTURE.s


@dataclass(frozen=True)
class RiskConfig:
    kind: str = "expectation"
    gamma: float = 0.25
    alpha: float = 0.05

    def __post_init__(self):
        if self.kind not in ("expectation", "mean_variance", "var", "cvar"):
            raise ValidationError(f"unknown risk functional {self.kind!r}")
        if self.gamma < 0:
            raise ValidationError("gamma must be >= 0")
        if not 0 < self.alpha < 1:
            raise ValidationError("alpha must lie in (0, 1)")


@dataclass(frozen=True)
class QuadraticObjective:
    Q0: float
    Q1: float
    Q2: float


def expand(b0, v) -> np.ndarray:
    """Full bid vector ``(b0, v1 - b0, ..., v4 - b0)``; broadcasts over ``b0``."""
    b0 = np.asarray(b0, dtype=float)
    v = np.asarray(v, dtype=float)
    return np.concatenate([b0[..., np.newaxis], v - b0[..., np.newaxis]], axis=-1)


def generalized_expand(S1, S2, v, b1) -> np.ndarray:
    """Bids ``(b1, S2^-1 (v - S1 b1))`` meeting ``S1 b1 + S2 b2 = v`` exactly."""
    S1 = np.atleast_2d(np.asarray(S1, dtype=float))
    if S1.shape[0] == 1 and S1.shape[1] > 1:
        S1 = S1.T
    S2 = np.atleast_2d(np.asarray(S2, dtype=float))
    b1 = np.atleast_1d(np.asarray(b1, dtype=float))
    v = np.asarray(v, dtype=float)
    try:
        if np.linalg.cond(S2) > 1e12:
            raise np.linalg.LinAlgError
        b2 = np.linalg.solve(S2, v - S1 @ b1)
    except np.linalg.LinAlgError:
        raise SingularS2("S2 is not invertible") from None
    return np.concatenate([b1, b2])


def transaction_cost(b0, v, fees: FeeSchedule, s=S_WEIGHTS):
    """Fees of the constrained bid vector; convex and piecewise linear in ``b0``."""
    b = expand(b0, v)
    out = np.abs(b) @ (fees.array * s)
    return float(out) if out.ndim == 0 else out


def _kinks_and_weights(v, fees: FeeSchedule, s=S_WEIGHTS):
    points = np.concatenate([[0.0], np.asarray(v, dtype=float)])
    weights = fees.array * s
    return points, weights


def tc_min(v, fees: FeeSchedule, s=S_WEIGHTS) -> float:
    """Smallest minimiser of the transaction costs: the leftmost weighted median of (0, v)."""
    v = check_portfolio(v)
    points, weights = _kinks_and_weights(v, fees, s)
    total = weights.sum()
    if total == 0:
        return 0.0
    order = np.argsort(points, kind="stable")
    cum = np.cumsum(weights[order])
    k = int(np.argmax(cum >= 0.5 * total - 1e-12 * total))
    return float(points[order][k])


def _slope_of_costs(b0: float, v, fees: FeeSchedule, s=S_WEIGHTS) -> float:
    points, weights = _kinks_and_weights(v, fees, s)
    signs = np.concatenate([[np.sign(b0)], np.sign(b0 - points[1:])])
    return float(weights @ signs)


def _argmax_tiebreak(candidates: np.ndarray, values: np.ndarray, rtol: float = 1e-12) -> float:
    """Smallest candidate whose value is within rounding of the best."""
    best = np.max(values)
    tol = rtol * max(1.0, abs(best), float(np.max(np.abs(values))))
    ok = values >= best - tol
    return float(np.min(candidates[ok]))


def arbitrage_slope(prices, s=S_WEIGHTS) -> float:
    """Sample-mean DA price minus the sample-mean delivery-weighted IA price."""
    mean = np.asarray(prices, dtype=float).reshape(-1, N_MARKETS).mean(axis=0)
    return float(s[0] * mean[0] - s[1:] @ mean[1:])


def _solve_linear(slope: float, v, fees: FeeSchedule, s=S_WEIGHTS) -> float:
    """Maximise ``slope * b0 - T(b0)`` over the kinks of ``T``."""
    points, _ = _kinks_and_weights(v, fees, s)
    corners = np.unique(points)
    candidates = np.concatenate([corners, [corners[-1] + 1.0, corners[0] - 1.0]])
    values = slope * candidates - transaction_cost(candidates, v, fees, s)
    b0 = _argmax_tiebreak(candidates, values)
    if b0 > corners[-1]:
        raise Unbounded("objective increases without bound as b0 grows", float(corners[-1]))
    if b0 < corners[0]:
        raise Unbounded("objective increases without bound as b0 falls", float(corners[0]))
    return b0


def solve_noimp(scenarios, v, fees: FeeSchedule, s=S_WEIGHTS) -> float:
    """Expected-gain optimum without market impact.

    Raises :class:`Unbounded` when the arbitrage slope beats every fee slope.
    """
    prices = check_scenarios(getattr(scenarios, "prices", scenarios))
    v = check_portfolio(v)
    return _solve_linear(arbitrage_slope(prices, s), v, fees, s)


def q_coefficients(scenarios, a, v, s=S_WEIGHTS, delta: float = 0.0) -> QuadraticObjective:
    """Expected revenue incl. linear impact ``E[delta] = a * b`` as a quadratic in ``b0``.

    A positive ``delta`` also passes ``delta * a0 * b0`` on to every
    intraday price, as the sequential adjustment does.
    """
    prices = check_scenarios(getattr(scenarios, "prices", scenarios))
    a = np.asarray(getattr(a, "a", a), dtype=float)
    v = check_portfolio(v)
    mean = prices.mean(axis=0)
    sa = s[1:] * a[1:]
    coupling = delta * a[0]
    Q0 = float(s[1:] @ (mean[1:] * v) + sa @ (v * v))
    Q1 = float(s[0] * mean[0] - s[1:] @ mean[1:] - 2.0 * sa @ v + coupling * (s[1:] @ v))
    Q2 = float(s[0] * a[0] + sa.sum() - coupling * s[1:].sum())
    return QuadraticObjective(Q0, Q1, Q2)


def solve_linimp(q: QuadraticObjective, v, fees: FeeSchedule, s=S_WEIGHTS) -> float:
    """Exact maximiser of ``Q(b0) - T(b0)`` by checking each linear piece of ``T``."""
    v = check_portfolio(v)
    if q.Q2 > 0:
        raise ValidationError("quadratic coefficient must be non-positive")
    if q.Q2 == 0:
        return _solve_linear(q.Q1, v, fees, s)
    points, _ = _kinks_and_weights(v, fees, s)
    corners = np.unique(points)
    edges = np.concatenate([[-np.inf], corners, [np.inf]])
    candidates = []
    for lo, hi in itertools.pairwise(edges):
        probe = lo + 1.0 if np.isinf(hi) else (hi - 1.0 if np.isinf(lo) else 0.5 * (lo + hi))
        slope = _slope_of_costs(probe, v, fees, s)
        vertex = -(q.Q1 - slope) / (2.0 * q.Q2)
        candidates.append(float(np.clip(vertex, lo, hi)))
    candidates = np.unique(np.concatenate([candidates, corners]))
    values = q.Q0 + q.Q1 * candidates + q.Q2 * candidates**2 - transaction_cost(candidates, v, fees, s)
    return _argmax_tiebreak(candidates, values)


def risk_functional(gains, config: RiskConfig):
    """Risk functional of sampled gains along the last axis."""
    gains = np.asarray(gains, dtype=float)
    if gains.size == 0 or gains.shape[-1] == 0:
        raise EmptyGains("no gains to evaluate")
    M = gains.shape[-1]
    if config.kind == "expectation":
        out = gains.mean(axis=-1)
    elif config.kind == "mean_variance":
        out = gains.mean(axis=-1) - config.gamma * gains.var(axis=-1)
    else:
        k = max(1, math.ceil(config.alpha * M - 1e-9))
        lowest = np.partition(gains, k - 1, axis=-1)[..., :k]
        if config.kind == "var":
            out = lowest.max(axis=-1)
        else:
            out = lowest.mean(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def recenter_da(prices, s=S_WEIGHTS) -> np.ndarray:
    """Shift every scenario's DA price so the sample arbitrage slope is zero."""
    prices = np.array(prices, dtype=float)
    prices[:, 0] -= arbitrage_slope(prices, s) / s[0]
    return prices


class ScenarioGains:
    """Gains of constrained bid vectors across price scenarios.

    ``impact`` maps bids of shape (G, 5) to raw price changes (G, M, 5); the
    day-ahead change is propagated into the intraday markets with factor
    ``delta``.  ``None`` means no impact.
    """

    def __init__(self, prices, v, fees: FeeSchedule, impact: Callable | None = None, delta: float = 1.0, s=S_WEIGHTS):
        self.prices = check_scenarios(prices)
        self.v = check_portfolio(v)
        self.fees = fees
        self.impact = impact
        self.delta = float(delta)
        self.s = np.asarray(s, dtype=float)

    def impact_term(self, b0) -> np.ndarray:
        """Price-dependent part of the gain, shape (G, M), without meff shift."""
        b0 = np.atleast_1d(np.asarray(b0, dtype=float))
        b = expand(b0, self.v)
        prices = np.broadcast_to(self.prices, (b0.size,) + self.prices.shape)
        if self.impact is not None:
            raw = self.impact(b)
            adj = raw.copy()
            adj[..., 1:] += self.delta * raw[..., :1]
            prices = prices + adj
        revenue = np.einsum("gmi,gi->gm", prices, b * self.s)
        return revenue - transaction_cost(b0, self.v, self.fees, self.s)[:, np.newaxis]

    def __call__(self, b0, da_shift: float = 0.0) -> np.ndarray:
        b0 = np.atleast_1d(np.asarray(b0, dtype=float))
        out = self.impact_term(b0)
        if da_shift:
            out = out + (da_shift * self.s[0] * b0)[:, np.newaxis]
        return out


def _golden_max(f, a: float, b: float, tol: float):
    """Golden-section search for a maximum of ``f`` on ``[a, b]``."""
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def search_domain(v, span: float | None = None, n_grid: int = 201) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    lo, hi = min(0.0, v.min()), max(0.0, v.max())
    if span is None:
        span = 3.0 * max(float(np.max(np.abs(v))), 1.0)
    return np.linspace(lo - span, hi + span, n_grid)


def solve_numeric(
    v,
    fees: FeeSchedule,
    scenarios,
    impact: Callable | None = None,
    config: RiskConfig | None = None,
    meff: bool = False,
    delta: float = 1.0,
    n_grid: int = 201,
    span: float | None = None,
    tol: float = 1e-4,
    s=S_WEIGHTS,
    model: ScenarioGains | None = None,
    grid_gains: np.ndarray | None = None,
) -> float:
    """Maximise a risk functional of the scenario gains over ``b0``.

    A coarse grid (plus the kinks of the fee function) locates the best
    bracket, golden-section search refines it.  ``meff`` shifts every
    scenario's DA price so that the sample arbitrage slope vanishes.
    ``model``/``grid_gains`` let callers reuse work across strategies.
    """
    v = check_portfolio(v)
    if config is None:
        config = RiskConfig()
    if model is None:
        model = ScenarioGains(getattr(scenarios, "prices", scenarios), v, fees, impact, delta, s)
    da_shift = -arbitrage_slope(model.prices, s) / s[0] if meff else 0.0

    grid = search_domain(v, span, n_grid)
    if grid_gains is None:
        grid_gains = model.impact_term(grid)
    if da_shift:
        grid_gains = grid_gains + (da_shift * s[0] * grid)[:, np.newaxis]
    grid_vals = risk_functional(grid_gains, config)

    def objective(x):
        return risk_functional(model(np.array([x]), da_shift)[0], config)

    k = int(np.argmax(grid_vals))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    x_ref, f_ref = _golden_max(objective, a, b, tol)

    kinks = np.unique(np.concatenate([[0.0], v]))
    kink_vals = risk_functional(model(kinks, da_shift), config)
    candidates = np.concatenate([[x_ref, grid[k]], kinks])
    values = np.concatenate([[f_ref, grid_vals[k]], kink_vals])
    return _argmax_tiebreak(candidates, values, rtol=1e-10)
