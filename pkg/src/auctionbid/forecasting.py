"""Expected-price models and bootstrap price scenarios.

Both price models consume the same per-market design tensor of shape
``(n_samples, 5, 21)`` built by :func:`build_design`, so they can be swapped
inside the backtest and compose with scikit-learn tooling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import (
    EmptyResiduals,
    LayoutMismatch,
    MissingHistory,
    ValidationError,
    WindowTooShort,
)
from .validation import N_MARKETS, check_design, check_market_vector

MARKETS = ("da", "ia1", "ia2", "ia3", "ia4")
PRICE_COLUMNS = tuple(f"p_{m}" for m in MARKETS)
EXOG_COLUMNS = ("load", "solar", "wind_on", "wind_off")
FUEL_COLUMNS = ("eua", "coal", "gas", "oil")

FEATURE_NAMES = (
    "lag1",
    "lag2",
    "lag7",
    "lag1_h24",
    "lag1_min",
    "lag1_max",
    *(f"dow{k}" for k in range(1, 8)),
    *EXOG_COLUMNS,
    *(f"{f}_lag2" for f in FUEL_COLUMNS),
)
N_FEATURES = len(FEATURE_NAMES)
MAX_LAG = 7
_LAG1, _LAG7 = 0, 2
_DOW = slice(6, 13)


def weekday(dates) -> np.ndarray:
    """ISO weekday, 1 = Monday ... 7 = Sunday."""
    days = np.asarray(dates, dtype="datetime64[D]").astype(np.int64)
    # 1970-01-01 was a Thursday
    return (days + 3) % 7 + 1


@dataclass(frozen=True, eq=False)
class PriceHistory:
    """Unimpacted clearing prices, shape (n_days, 24, 5), on contiguous days."""

    dates: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        dates = np.asarray(self.dates, dtype="datetime64[D]")
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 3 or values.shape[1:] != (24, N_MARKETS) or values.shape[0] != dates.size:
            raise ValidationError(f"price history must have shape (n_days, 24, 5), got {values.shape}")
        if dates.size > 1 and np.any(np.diff(dates.astype(np.int64)) != 1):
            raise ValidationError("price history must cover contiguous days")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.dates.size

    def __eq__(self, other):
        if not isinstance(other, PriceHistory):
            return NotImplemented
        return np.array_equal(self.dates, other.dates) and np.array_equal(self.values, other.values)

    def index_of(self, date) -> int:
        k = int((np.datetime64(date, "D") - self.dates[0]).astype(np.int64))
        if not 0 <= k < len(self):
            raise MissingHistory(f"{date} is outside the price history")
        return k

    def replace_values(self, values) -> PriceHistory:
        return PriceHistory(self.dates, values)

    def to_frame(self) -> pd.DataFrame:
        n = len(self)
        frame = pd.DataFrame(self.values.reshape(n * 24, N_MARKETS), columns=list(PRICE_COLUMNS))
        frame.insert(0, "hour", np.tile(np.arange(1, 25), n))
        frame.insert(0, "delivery_date", np.repeat(self.dates, 24).astype(str))
        return frame


def naive_forecast(history: PriceHistory, d, h: int) -> np.ndarray:
    """Last week's prices on Monday, Saturday and Sunday, yesterday's otherwise."""
    t = history.index_of(d) if not isinstance(d, (int, np.integer)) else int(d)
    dow = int(weekday(history.dates[0] + t))
    lag = 7 if dow in (1, 6, 7) else 1
    if t - lag < 0:
        raise MissingHistory(f"naive forecast for day {t} needs day {t - lag}")
    return history.values[t - lag, h - 1].copy()


def build_design(prices: np.ndarray, exog: np.ndarray, fuels: np.ndarray, dates, days, hour: int) -> np.ndarray:
    """Regressor tensor (len(days), 5, 21) for delivery ``hour`` (1..24).

    ``prices`` is (n_days, 24, 5), ``exog`` (n_days, 24, 4) and ``fuels``
    (n_days, 4), all aligned with ``dates``.  Rows needing data before the
    first day are filled with NaN.
    """
    days = np.asarray(days, dtype=int)
    h = hour - 1
    n = days.size
    X = np.full((n, N_MARKETS, N_FEATURES), np.nan)

    def lagged(arr, lag):
        idx = days - lag
        ok = idx >= 0
        out = np.full((n,) + arr.shape[1:], np.nan)
        out[ok] = arr[idx[ok]]
        return out

    X[:, :, 0] = lagged(prices[:, h], 1)
    X[:, :, 1] = lagged(prices[:, h], 2)
    X[:, :, 2] = lagged(prices[:, h], 7)
    X[:, :, 3] = lagged(prices[:, 23], 1)
    X[:, :, 4] = lagged(prices.min(axis=1), 1)
    X[:, :, 5] = lagged(prices.max(axis=1), 1)
    dow = weekday(np.asarray(dates, dtype="datetime64[D]")[days])
    X[:, :, _DOW] = 0.0
    X[np.arange(n), :, 5 + dow] = 1.0
    X[:, :, 13:17] = exog[days, h][:, np.newaxis, :]
    X[:, :, 17:21] = lagged(fuels, 2)[:, np.newaxis, :]
    return X


class NaivePriceModel(BaseEstimator, RegressorMixin):
    """Weekday-dependent persistence forecast on the shared design layout.

    ``fit`` only stores the in-sample residuals used for bootstrapping.
    """

    def fit(self, X, y):
        X = check_design(X, N_FEATURES, allow_nan=True)
        y = check_market_vector(y, "targets")
        keep = ~np.isnan(self._predict(X)).any(axis=1) & ~np.isnan(y).any(axis=1)
        if not np.any(keep):
            raise WindowTooShort("no complete rows to compute naive residuals")
        self.n_features_in_ = N_FEATURES
        self.residuals_ = y[keep] - self._predict(X[keep])
        return self

    @staticmethod
    def _predict(X):
        dow = np.argmax(X[:, 0, _DOW], axis=1) + 1
        weekly = np.isin(dow, (1, 6, 7))
        return np.where(weekly[:, np.newaxis], X[:, :, _LAG7], X[:, :, _LAG1])

    def predict(self, X):
        check_is_fitted(self, "residuals_")
        return self._predict(check_design(X, N_FEATURES))


class ExpertPriceModel(BaseEstimator, RegressorMixin):
    """Autoregressive model with exogenous regressors, one OLS fit per market.

    No separate intercept is added: the seven weekday dummies span it.
    Coefficients are the minimum-norm least-squares solution, so duplicated
    or constant regressors are handled without special casing.
    """

    def __init__(self, rcond=None):
        self.rcond = rcond

    def fit(self, X, y):
        X = check_design(X, allow_nan=True)
        y = check_market_vector(y, "targets")
        if y.shape[0] != X.shape[0]:
            raise LayoutMismatch("design and targets differ in length")
        # rows with any missing regressor are dropped, never imputed
        keep = ~np.isnan(X).any(axis=(1, 2)) & ~np.isnan(y).any(axis=1)
        X, y = X[keep], y[keep]
        k = X.shape[2]
        if X.shape[0] < k:
            raise WindowTooShort(f"{X.shape[0]} complete rows for {k} regressors")
        coef = np.empty((N_MARKETS, k))
        for i in range(N_MARKETS):
            coef[i] = np.linalg.lstsq(X[:, i, :], y[:, i], rcond=self.rcond)[0]
        self.coef_ = coef
        self.n_features_in_ = k
        self.residuals_ = y - np.einsum("nik,ik->ni", X, coef)
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_design(X, self.n_features_in_)
        return np.einsum("nik,ik->ni", X, self.coef_)


def fit_expert(rows, targets) -> ExpertPriceModel:
    return ExpertPriceModel().fit(rows, targets)


def expert_forecast(fit: ExpertPriceModel, row) -> np.ndarray:
    row = np.asarray(row, dtype=float)
    return fit.predict(row[np.newaxis])[0]


@dataclass(frozen=True, eq=False)
class ScenarioSet:
    prices: np.ndarray
    expected: np.ndarray
    indices: np.ndarray
    seed: object = None

    @property
    def size(self) -> int:
        return self.prices.shape[0]


def scenario_seed(master: int, day_ordinal: int, hour: int) -> np.random.SeedSequence:
    """Child seed for one delivery (day, hour), independent of run order."""
    return np.random.SeedSequence([int(master), int(day_ordinal), int(hour)])


def bootstrap_scenarios(expected, residuals, M: int, seed) -> ScenarioSet:
    """``M`` price vectors, each the forecast plus one whole residual row."""
    expected = check_market_vector(expected, "expected price")
    residuals = np.asarray(residuals, dtype=float)
    if residuals.ndim != 2 or residuals.shape[0] == 0:
        raise EmptyResiduals("residual store is empty")
    if M < 1:
        raise ValidationError("M must be >= 1")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, residuals.shape[0], size=M)
    return ScenarioSet(expected + residuals[idx], expected.copy(), idx, seed)
