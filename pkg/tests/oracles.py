"""Brute-force reference implementations used only by the tests.

They deliberately avoid the package's algorithms: dense scans instead of
breakpoint logic, plain loops instead of vectorised searches.
"""

from __future__ import annotations

import math

import numpy as np

S = np.array([1.0, 0.25, 0.25, 0.25, 0.25])


def step_volume(bids: dict, side: str, p: float) -> float:
    """Cumulative volume of a ladder at ``p`` with linear interpolation between bid prices."""
    prices = sorted(bids)
    cum, total = [], 0.0
    seq = prices if side == "S" else prices[::-1]
    for q in seq:
        total += bids[q]
        cum.append(total)
    if side == "D":
        cum = cum[::-1]
    if side == "S" and p < prices[0]:
        return 0.0
    if side == "D" and p > prices[-1]:
        return 0.0
    if p <= prices[0]:
        return cum[0]
    if p >= prices[-1]:
        return cum[-1]
    for k in range(len(prices) - 1):
        if prices[k] <= p <= prices[k + 1]:
            w = (p - prices[k]) / (prices[k + 1] - prices[k])
            return cum[k] + w * (cum[k + 1] - cum[k])
    raise AssertionError("unreachable")


def scan_clearing_price(supply: dict, demand: dict, p_min: float, p_max: float, step: float) -> float:
    """First price on a dense grid where excess supply turns non-negative."""
    n = round((p_max - p_min) / step)
    for k in range(n + 1):
        p = p_min + k * step
        if step_volume(supply, "S", p) - step_volume(demand, "D", p) >= 0:
            return p
    return p_max


def cost(b0: float, v, tau_da: float, tau_ia: float) -> float:
    return tau_da * abs(b0) + 0.25 * sum(tau_ia * abs(x - b0) for x in v)


def grid_argmax(f, lo: float, hi: float, step: float) -> float:
    n = round((hi - lo) / step)
    best_x, best_f = lo, -math.inf
    for k in range(n + 1):
        x = lo + k * step
        fx = f(x)
        if fx > best_f + 1e-12:
            best_x, best_f = x, fx
    return best_x


def var_oracle(gains, alpha: float) -> float:
    g = sorted(gains)
    k = math.ceil(alpha * len(g) - 1e-9)
    return g[max(k, 1) - 1]


def cvar_oracle(gains, alpha: float) -> float:
    g = sorted(gains)
    k = max(math.ceil(alpha * len(g) - 1e-9), 1)
    return sum(g[:k]) / k


def mean_variance_oracle(gains, gamma: float) -> float:
    n = len(gains)
    m = sum(gains) / n
    return m - gamma * sum((x - m) ** 2 for x in gains) / n


def empirical_crps(xs, y) -> float:
    """E|X - y| - E|X - X'| / 2 for the empirical distribution of ``xs``."""
    n = len(xs)
    first = sum(abs(x - y) for x in xs) / n
    second = sum(abs(a - b) for a in xs for b in xs) / (n * n)
    return first - 0.5 * second


def gain(b, prices, tau) -> float:
    return sum(S[i] * (prices[i] * b[i] - tau[i] * abs(b[i])) for i in range(5))
