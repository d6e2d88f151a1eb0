"""Rolling-window evaluation of bidding strategies.

For every out-of-sample delivery (day, hour) the price models are refitted on
the trailing ``window`` days, bootstrap scenarios are drawn, the auction
curves are forecast from the last ``curve_window`` days and each configured
strategy picks its day-ahead bid.  Gains are then settled against the
realised prices and the realised curves.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .data_io import CURVE_MARKETS, DataBundle, write_frame
from .evaluation import (
    QUANTILE_LEVELS,
    MetricsReport,
    bootstrap_mean_test,
    lower_quantiles,
    pinball,
)
from .exceptions import (
    ConfigError,
    DegenerateSlope,
    InsufficientHistory,
    MissingCurves,
    Unbounded,
    ValidationError,
)
from .forecasting import (
    MAX_LAG,
    ExpertPriceModel,
    NaivePriceModel,
    PriceHistory,
    bootstrap_scenarios,
    build_design,
    scenario_seed,
)
from .gains import GainBreakdown, decompose
from .impact import (
    CurveForecast,
    ImpactConfig,
    ImpactEvaluator,
    build_impact_curve,
    demand_basis,
    estimate_linear_impact,
    forecast_curves,
    scenario_shift,
    sequential_adjust,
)
from .strategies import (
    NUMERIC_STRATEGIES,
    STRATEGIES,
    FeeSchedule,
    RiskConfig,
    ScenarioGains,
    q_coefficients,
    recenter_da,
    search_domain,
    solve_linimp,
    solve_noimp,
    solve_numeric,
    tc_min,
)

SETTINGS = ("new_player", "rebidding")
MODELS = ("naive", "expert", "perfect")
SERIES = {"wind": (2, 3), "solar": (1,), "load": (0,)}
RISK_KINDS = {"e_meff": "expectation", "e": "expectation", "mv": "mean_variance", "var": "var", "cvar": "cvar"}
CELL_COLUMNS = ("date", "hour", "strategy", *GainBreakdown.COLUMNS, "b0", "fallback")


@dataclass(frozen=True)
class PortfolioSpec:
    """Either a constant MW level or a fraction of a day-ahead forecast series."""

    kind: str = "constant"
    value: float = 1.0
    side: str = "sell"
    series: str = "wind"
    fraction: float = 0.01

    def __post_init__(self):
        if self.kind not in ("constant", "fraction"):
            raise ValidationError("portfolio kind must be 'constant' or 'fraction'")
        if self.side not in ("sell", "buy"):
            raise ValidationError("portfolio side must be 'sell' or 'buy'")
        if self.kind == "fraction":
            if self.series not in SERIES:
                raise ValidationError(f"portfolio series must be one of {', '.join(SERIES)}")
            if not self.fraction > 0:
                raise ValidationError("portfolio fraction must be > 0")

    @classmethod
    def parse(cls, text: str) -> PortfolioSpec:
        """``constant:<MW>:<sell|buy>`` or ``fraction:<wind|solar|load>:<share>``."""
        parts = text.strip().split(":")
        try:
            if parts[0] == "constant" and len(parts) == 3:
                return cls("constant", value=float(parts[1]), side=parts[2])
            if parts[0] == "fraction" and len(parts) == 3:
                return cls("fraction", series=parts[1], fraction=float(parts[2]))
        except ValueError:
            pass
        raise ValidationError(f"cannot parse portfolio {text!r}; use constant:<MW>:<sell|buy> or fraction:<series>:<share>")

    def __str__(self):
        if self.kind == "constant":
            return f"constant:{self.value!r}:{self.side}"
        return f"fraction:{self.series}:{self.fraction!r}"

    def volumes(self, exog: np.ndarray) -> np.ndarray:
        """Portfolio per quarter for every (day, hour); ``exog`` is (n_days, 24, 4)."""
        n = exog.shape[0]
        if self.kind == "constant":
            level = np.full((n, 24), self.value * (1.0 if self.side == "sell" else -1.0))
        else:
            level = self.fraction * exog[..., list(SERIES[self.series])].sum(axis=-1)
            if self.series == "load":
                level = -level
        return np.repeat(level[..., np.newaxis], 4, axis=-1)


@dataclass(frozen=True)
class BacktestConfig:
    window: int = 730
    out_of_sample: int = 1
    scenarios: int = 1000
    curve_window: int = 28
    tau_da: float = 0.05
    tau_ia: float = 0.10
    delta: float = 1.0
    slope_fraction: float = 0.05
    gamma: float = 0.25
    alpha: float = 0.05
    seed: int = 0
    setting: str = "new_player"
    strategies: tuple = STRATEGIES
    models: tuple = ("naive", "expert")
    portfolio: PortfolioSpec = field(default_factory=PortfolioSpec)
    grid_points: int = 201
    span: float | None = None
    tolerance: float = 1e-4
    bootstrap_resamples: int = 10_000
    workers: int = 1

    def __post_init__(self):
        if self.window < MAX_LAG + 1:
            raise ConfigError(f"window must be >= {MAX_LAG + 1}")
        if self.out_of_sample < 1 or self.scenarios < 1 or self.curve_window < 1:
            raise ConfigError("out_of_sample, scenarios and curve_window must be >= 1")
        if self.setting not in SETTINGS:
            raise ConfigError(f"setting must be one of {', '.join(SETTINGS)}")
        unknown = [s for s in self.strategies if s not in STRATEGIES]
        if unknown or not self.strategies:
            raise ConfigError(f"unknown strategy {', '.join(unknown) or '(none)'}; valid ids: {', '.join(STRATEGIES)}")
        bad_models = [m for m in self.models if m not in MODELS]
        if bad_models or not self.models:
            raise ConfigError(f"unknown model {', '.join(bad_models) or '(none)'}; valid: {', '.join(MODELS)}")
        if self.grid_points < 3 or self.tolerance <= 0 or self.bootstrap_resamples < 1 or self.workers < 1:
            raise ConfigError("grid_points >= 3, tolerance > 0, bootstrap_resamples >= 1 and workers >= 1 required")
        # delegate the remaining range checks
        self.fees, self.impact_config, self.risk_config("expectation")

    @property
    def fees(self) -> FeeSchedule:
        return FeeSchedule.from_pair(self.tau_da, self.tau_ia)

    @property
    def impact_config(self) -> ImpactConfig:
        return ImpactConfig(self.delta, self.slope_fraction, self.curve_window)

    def risk_config(self, kind: str) -> RiskConfig:
        return RiskConfig(kind, self.gamma, self.alpha)

    @property
    def first_day(self) -> int:
        """Index of the first out-of-sample day in the data."""
        return max(self.window + MAX_LAG, self.curve_window)


@dataclass
class BacktestResult:
    config: BacktestConfig
    cells: dict
    averages: pd.DataFrame
    da_weights: pd.DataFrame
    pvalues: dict
    metrics: pd.DataFrame

    def write(self, directory) -> list[Path]:
        directory = Path(directory)
        written = []

        def put(frame, name):
            write_frame(frame, directory / name)
            written.append(directory / name)

        for model, frame in self.cells.items():
            put(frame, f"cells_{model}.csv")
        put(self.averages, "averages.csv")
        put(self.da_weights, "da_weights.csv")
        for model, frame in self.pvalues.items():
            put(frame, f"pvalues_{model}.csv")
        put(self.metrics, "metrics.csv")
        return written


def realized_evaluator(curves_dh, p0) -> ImpactEvaluator:
    """Impact of bids on one delivery's own curves, anchored at price ``p0``."""
    fc = CurveForecast.from_curve_set(curves_dh)
    ic = build_impact_curve(fc)
    return ImpactEvaluator(ic, scenario_shift(fc, np.asarray(p0, dtype=float)[np.newaxis]))


def realized_impact(curves_dh, p0, b, delta: float, evaluator: ImpactEvaluator | None = None) -> np.ndarray:
    """Adjusted price changes caused by ``b`` on one delivery's own curves."""
    if evaluator is None:
        evaluator = realized_evaluator(curves_dh, p0)
    raw = evaluator(np.asarray(b, dtype=float))[0]
    return sequential_adjust(raw, delta)


def rebid_adjust(history: PriceHistory, curves, portfolio: np.ndarray, fees: FeeSchedule, delta: float = 1.0) -> PriceHistory:
    """Remove the impact of our own past minimum-cost bids from observed prices.

    ``portfolio`` holds the quarter volumes for every (day, hour).
    """
    values = history.values.copy()
    if curves is None or len(curves.curves) < len(history):
        raise MissingCurves("rebidding needs the curves of every historical day")
    for d in range(len(history)):
        for h in range(24):
            v = portfolio[d, h]
            if not np.any(v):
                continue
            b0 = tc_min(v, fees)
            b = np.concatenate([[b0], v - b0])
            values[d, h] -= realized_impact(curves.curves[d][h], history.values[d, h], b, delta)
    return history.replace_values(values)


def _solve(strategy: str, ctx: dict) -> tuple[float, bool]:
    """Day-ahead bid of one strategy; the flag marks a fallback."""
    v, fees, config = ctx["v"], ctx["fees"], ctx["config"]
    if strategy == "ia_only":
        return 0.0, False
    if strategy == "tc_min":
        return tc_min(v, fees), False
    if strategy == "e_noimp":
        try:
            return solve_noimp(ctx["prices"], v, fees), False
        except Unbounded as exc:
            return exc.fallback, True
    if strategy in ("e_linimp", "e_linimpmeff"):
        a = ctx["a"]
        if a is None:
            return tc_min(v, fees), True
        prices = ctx["prices"] if strategy == "e_linimp" else ctx["recentered"]
        q = q_coefficients(prices, a, v, delta=config.delta)
        try:
            return solve_linimp(q, v, fees), False
        except Unbounded as exc:
            return exc.fallback, True
        except ValidationError:
            return tc_min(v, fees), True
    kind = RISK_KINDS[strategy]
    b0 = solve_numeric(
        v,
        fees,
        None,
        config=config.risk_config(kind),
        meff=strategy == "e_meff",
        n_grid=config.grid_points,
        span=config.span,
        tol=config.tolerance,
        model=ctx["gains_model"],
        grid_gains=ctx["grid_gains"],
    )
    return b0, False


@dataclass
class _Context:
    bundle: DataBundle
    config: BacktestConfig
    p0: np.ndarray
    volumes: np.ndarray
    score_only: bool = False


_WORKER: _Context | None = None


def _init_worker(ctx: _Context):
    global _WORKER
    _WORKER = ctx


def _day_task(t: int):
    return _run_day(_WORKER, t)


def _expected_and_residuals(model: str, ctx: _Context, t: int, h: int, X_train, y_train, x_today):
    if model == "perfect":
        return ctx.p0[t, h - 1].copy(), np.zeros((1, 5))
    est = NaivePriceModel() if model == "naive" else ExpertPriceModel()
    est.fit(X_train, y_train)
    return est.predict(x_today)[0], est.residuals_


def _run_day(ctx: _Context, t: int) -> list:
    return [row for h in range(1, 25) for row in run_cell(ctx, t, h)]


def run_cell(ctx: _Context, t: int, h: int) -> list:
    """Forecast, optimise and settle one delivery (day index ``t``, hour ``h``).

    Returns one ``(model, t, h, rows, scores)`` tuple per price model, where
    ``rows`` holds ``(strategy, GainBreakdown, b0, fallback)`` or is ``None``
    for a zero-volume hour.
    """
    config, bundle = ctx.config, ctx.bundle
    fees = config.fees
    dates = bundle.dates
    ordinal = int(dates[t].astype(np.int64))
    train_days = np.arange(t - config.window, t)
    v = ctx.volumes[t, h - 1]
    p0 = ctx.p0[t, h - 1]
    realized_curves = bundle.curves.curves[t][h - 1]
    X = build_design(ctx.p0, bundle.exogenous.values, bundle.fuels.values, dates, np.append(train_days, t), h)
    X_train, x_today = X[:-1], X[-1:]
    y_train = ctx.p0[train_days, h - 1]
    fc_hist = ic_hist = settle = None
    out = []
    for model in config.models:
        expected, residuals = _expected_and_residuals(model, ctx, t, h, X_train, y_train, x_today)
        scen = bootstrap_scenarios(expected, residuals, config.scenarios, scenario_seed(config.seed, ordinal, h))
        scores = _cell_scores(scen.prices, p0)
        if ctx.score_only or not np.any(v):
            out.append((model, t, h, None, scores))
            continue
        if model == "perfect":
            fc = CurveForecast.from_curve_set(realized_curves)
            ic = build_impact_curve(fc)
        else:
            if fc_hist is None:
                history = [bundle.curves.curves[d][h - 1] for d in range(t - config.curve_window, t)]
                fc_hist = forecast_curves(history, config.curve_window)
                ic_hist = build_impact_curve(fc_hist)
            fc, ic = fc_hist, ic_hist
        xi = scenario_shift(fc, scen.prices)
        try:
            a = estimate_linear_impact(ic, xi.mean(axis=0), config.impact_config, demand_basis(fc, scen.expected))
        except (DegenerateSlope, ValidationError):
            a = None
        gains_model = ScenarioGains(scen.prices, v, fees, ImpactEvaluator(ic, xi), config.delta)
        grid_gains = None
        if any(s in NUMERIC_STRATEGIES for s in config.strategies):
            grid_gains = gains_model.impact_term(search_domain(v, config.span, config.grid_points))
        solve_ctx = {
            "v": v,
            "fees": fees,
            "config": config,
            "prices": scen.prices,
            "recentered": recenter_da(scen.prices),
            "a": a,
            "gains_model": gains_model,
            "grid_gains": grid_gains,
        }
        if settle is None:
            settle = realized_evaluator(realized_curves, p0)
        rows = []
        for strategy in config.strategies:
            b0, fallback = _solve(strategy, solve_ctx)
            b = np.concatenate([[b0], v - b0])
            deltas = realized_impact(realized_curves, p0, b, config.delta, settle)
            rows.append((strategy, decompose(b0, v, p0, deltas, fees), b0, fallback))
        out.append((model, t, h, rows, scores))
    return out


def _cell_scores(scenarios: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Per market: error of the mean, absolute error of the median, CRPS."""
    s = scenarios.T
    err = s.mean(axis=1) - truth
    abs_med = np.abs(np.median(s, axis=1) - truth)
    q = lower_quantiles(s)
    crps = 2.0 * pinball(q, truth[:, np.newaxis], QUANTILE_LEVELS).mean(axis=1)
    return np.stack([err, abs_med, crps], axis=1)


def _metrics_frame(scores_by_model: dict) -> pd.DataFrame:
    rows = []
    for model, scores in scores_by_model.items():
        arr = np.asarray(scores)  # (cells, 5, 3)
        for label, sel in [("all", slice(None))] + [(m, i) for i, m in enumerate(CURVE_MARKETS)]:
            part = arr[:, sel, :].reshape(-1, 3)
            report = MetricsReport(
                float(np.sqrt(np.mean(part[:, 0] ** 2))),
                float(np.mean(part[:, 1])),
                float(np.mean(part[:, 2])),
                float(np.mean(part[:, 0])),
            )
            rows.append((model, label, *report.as_tuple()))
    return pd.DataFrame(rows, columns=["model", "market", *MetricsReport.COLUMNS])


def prepare(config: BacktestConfig, bundle: DataBundle) -> _Context:
    n = len(bundle)
    if n < config.first_day + config.out_of_sample:
        raise InsufficientHistory(
            f"data has {n} days; need {config.first_day} for estimation plus {config.out_of_sample} out of sample"
        )
    volumes = config.portfolio.volumes(bundle.exogenous.values)
    if config.setting == "rebidding":
        p0 = rebid_adjust(bundle.prices, bundle.curves, volumes, config.fees, config.delta).values
    else:
        p0 = bundle.prices.values
    return _Context(bundle, config, p0, volumes)


def run(config: BacktestConfig, bundle: DataBundle, score_only: bool = False) -> BacktestResult:
    """Run the study; ``score_only`` skips the strategies and only scores the forecasts."""
    ctx = prepare(config, bundle)
    ctx.score_only = score_only
    days = list(range(config.first_day, config.first_day + config.out_of_sample))
    if config.workers > 1 and len(days) > 1:
        with ProcessPoolExecutor(max_workers=config.workers, initializer=_init_worker, initargs=(ctx,)) as pool:
            parts = list(pool.map(_day_task, days))
    else:
        parts = [_run_day(ctx, t) for t in days]
    results = [row for part in parts for row in part]
    return _assemble(config, bundle, ctx, results)


def _assemble(config: BacktestConfig, bundle: DataBundle, ctx: _Context, results: list) -> BacktestResult:
    dates = bundle.dates.astype(str)
    cells, averages, weights, pvalues, scores = {}, [], [], {}, {}
    for m_idx, model in enumerate(config.models):
        mine = sorted((r for r in results if r[0] == model), key=lambda r: (r[1], r[2]))
        scores[model] = [r[4] for r in mine]
        records = []
        excluded = 0
        for _, t, h, rows, _ in mine:
            if rows is None:
                excluded += 1
                continue
            level = float(ctx.volumes[t, h - 1].mean())
            for strategy, br, b0, fallback in rows:
                records.append((dates[t], h, strategy, *br.as_tuple(), b0, int(fallback), level))
        frame = pd.DataFrame(records, columns=[*CELL_COLUMNS, "level"])
        cells[model] = frame[list(CELL_COLUMNS)].reset_index(drop=True)
        per_mwh = {}
        for strategy in config.strategies:
            sub = frame[frame["strategy"] == strategy]
            g = (sub["total"] / sub["level"]).to_numpy()
            per_mwh[strategy] = g
            comp = {c: float((sub[c] / sub["level"]).mean()) if len(sub) else float("nan") for c in GainBreakdown.COLUMNS}
            averages.append(
                (model, strategy, float(g.mean()) if g.size else float("nan"), g.size, excluded, int(sub["fallback"].sum()),
                 *(comp[c] for c in GainBreakdown.COLUMNS[:-1]))
            )
            w = sub.assign(weight=sub["b0"] / sub["level"]).groupby("date", sort=True)["weight"].mean()
            for date, value in w.items():
                weights.append((date, model, strategy, float(value)))
        n_s = len(config.strategies)
        mat = np.full((n_s, n_s), np.nan)
        for i in range(n_s):
            for j in range(i + 1, n_s):
                a, b = per_mwh[config.strategies[i]], per_mwh[config.strategies[j]]
                if a.size == 0:
                    continue
                seed = np.random.SeedSequence([config.seed, m_idx, i, j])
                mat[i, j], mat[j, i] = bootstrap_mean_test(a, b, config.bootstrap_resamples, seed)
        pv = pd.DataFrame(mat, columns=list(config.strategies))
        pv.insert(0, "strategy", list(config.strategies))
        pvalues[model] = pv
    avg = pd.DataFrame(
        averages,
        columns=["model", "strategy", "average_gain", "n_hours", "n_excluded", "n_fallback",
                 "ia_revenue", "arbitrage", "impact", "fees"],
    )
    wf = pd.DataFrame(weights, columns=["date", "model", "strategy", "da_weight"])
    scored = {m: s for m, s in scores.items() if m != "perfect"}
    metrics = _metrics_frame(scored) if scored else pd.DataFrame(columns=["model", "market", *MetricsReport.COLUMNS])
    return BacktestResult(config, cells, avg, wf, pvalues, metrics)
