"""Small input-validation helpers shared by the estimators and solvers."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import LayoutMismatch, ValidationError

N_MARKETS = 5
N_QUARTERS = 4


def check_portfolio(v) -> np.ndarray:
    """Return ``v`` as a finite float vector of length 4."""
    v = np.asarray(v, dtype=float)
    if v.shape != (N_QUARTERS,):
        raise ValidationError(f"portfolio must have 4 quarter-hour values, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValidationError("portfolio values must be finite")
    return v


def check_market_vector(x, name: str = "vector") -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (N_MARKETS,):
        raise ValidationError(f"{name} must have 5 market entries on its last axis, got shape {x.shape}")
    return x


def check_scenarios(prices) -> np.ndarray:
    """Validate an (M, 5) matrix of scenario prices."""
    prices = check_array(prices, dtype=float, ensure_2d=True)
    if prices.shape[1] != N_MARKETS:
        raise ValidationError(f"scenario matrix must have 5 columns, got {prices.shape[1]}")
    return prices


def check_design(X, n_features: int | None = None, allow_nan: bool = False) -> np.ndarray:
    """Validate a per-market design tensor of shape (n_samples, 5, n_features)."""
    X = check_array(
        X,
        dtype=float,
        allow_nd=True,
        ensure_all_finite="allow-nan" if allow_nan else True,
        ensure_2d=False,
    )
    if X.ndim != 3 or X.shape[1] != N_MARKETS:
        raise LayoutMismatch(f"design must have shape (n, 5, k), got {X.shape}")
    if n_features is not None and X.shape[2] != n_features:
        raise LayoutMismatch(f"design has {X.shape[2]} regressors, model expects {n_features}")
    return X
