"""Command line entry point.

Exit codes: 0 on success, 2 on invalid input, 1 on any other failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from .backtest import BacktestConfig, prepare, run, run_cell
from .config import RunConfig, format_config, load_config, schema_text
from .data_io import atomic_write_text, load_bundle, save_bundle, write_frame
from .exceptions import ConfigError, ValidationError
from .gains import decompose
from .strategies import STRATEGIES, FeeSchedule, expand, tc_min
from .synthetic import SyntheticMarketSpec, generate_synthetic


def _fmt(x: float) -> str:
    return f"{float(x):.10g}"


def _vector(text: str, n: int, name: str) -> np.ndarray:
    try:
        values = np.array([float(p) for p in text.split(",")])
    except ValueError:
        raise ValidationError(f"{name} must be {n} comma-separated numbers") from None
    if values.size != n:
        raise ValidationError(f"{name} must have {n} values, got {values.size}")
    return values


def _load_run(args) -> tuple[RunConfig, BacktestConfig]:
    rc = load_config(args.config)
    bt = rc.backtest
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "workers", None) is not None:
        overrides["workers"] = args.workers
    if overrides:
        bt = BacktestConfig(**{**bt.__dict__, **overrides})
    rc.check_files()
    return rc, bt


def cmd_simulate(args) -> int:
    spec = SyntheticMarketSpec(
        seed=args.seed,
        days=args.days,
        start=args.start,
        noise=args.noise,
        da_liquidity=args.da_liquidity,
        ia_liquidity=args.ia_liquidity,
        level_step=args.level_step,
    )
    out = Path(args.out)
    save_bundle(generate_synthetic(spec), out)
    window = max(8, min(28, args.days - 12))
    curve_window = min(28, window)
    first = max(window + 7, curve_window)
    template = BacktestConfig(
        window=window,
        out_of_sample=max(1, args.days - first),
        scenarios=200,
        curve_window=curve_window,
        seed=args.seed,
        bootstrap_resamples=1000,
    )
    atomic_write_text(out / "run.cfg", format_config(RunConfig(template, Path("."))))
    print(f"wrote {args.days} synthetic days to {out}")
    return 0


def cmd_backtest(args) -> int:
    rc, bt = _load_run(args)
    result = run(bt, load_bundle(rc.data_dir))
    for path in result.write(args.out):
        print(path)
    return 0


def cmd_forecast(args) -> int:
    rc, bt = _load_run(args)
    result = run(bt, load_bundle(rc.data_dir), score_only=True)
    write_frame(result.metrics, Path(args.out) / "metrics.csv")
    print(result.metrics.to_string(index=False))
    return 0


def _print_bid(strategy: str, b0: float, v, breakdown) -> None:
    b = expand(b0, v)
    print(f"strategy={strategy} b0={_fmt(b0)} b=({','.join(_fmt(x) for x in b)})")
    print(" ".join(f"{k}={_fmt(getattr(breakdown, k))}" for k in breakdown.COLUMNS))


def cmd_optimize(args) -> int:
    strategies = [s for s in args.strategy.split(",") if s]
    bad = [s for s in strategies if s not in STRATEGIES]
    if bad or not strategies:
        raise ValidationError(f"unknown strategy {', '.join(bad) or '(none)'}; valid ids: {', '.join(STRATEGIES)}")
    if args.config is None:
        if args.v is None:
            raise ValidationError("optimize needs --v (with tc_min or ia_only) or --config with --date and --hour")
        offline = [s for s in strategies if s not in ("tc_min", "ia_only")]
        if offline:
            raise ValidationError(f"{', '.join(offline)} need price scenarios; pass --config, --date and --hour")
        v = _vector(args.v, 4, "--v")
        fees = FeeSchedule.from_pair(args.tau_da, args.tau_ia)
        prices = _vector(args.prices, 5, "--prices") if args.prices else np.zeros(5)
        for s in strategies:
            b0 = 0.0 if s == "ia_only" else tc_min(v, fees)
            _print_bid(s, b0, v, decompose(b0, v, prices, np.zeros(5), fees))
        return 0
    if args.date is None or args.hour is None:
        raise ValidationError("--config needs --date and --hour")
    rc, bt = _load_run(args)
    bundle = load_bundle(rc.data_dir)
    models = (args.model,) if args.model else bt.models
    bt = BacktestConfig(**{**bt.__dict__, "strategies": tuple(strategies), "models": models})
    ctx = prepare(bt, bundle)
    try:
        t = int(np.flatnonzero(bundle.dates == np.datetime64(args.date, "D"))[0])
    except IndexError:
        raise ValidationError(f"{args.date} is not in the data") from None
    if t < bt.first_day:
        raise ValidationError(f"{args.date} lies inside the estimation window; first usable day is {bundle.dates[bt.first_day]}")
    if not 1 <= args.hour <= 24:
        raise ValidationError("--hour must be 1..24")
    v = ctx.volumes[t, args.hour - 1]
    for model, _, _, rows, _ in run_cell(ctx, t, args.hour):
        print(f"model={model}")
        if rows is None:
            print("zero portfolio, nothing to trade")
            continue
        for strategy, breakdown, b0, _ in rows:
            _print_bid(strategy, b0, v, breakdown)
    return 0


def cmd_report(args) -> int:
    src, out = Path(args.results), Path(args.out)
    try:
        averages = pd.read_csv(src / "averages.csv")
        weights = pd.read_csv(src / "da_weights.csv")
    except OSError as exc:
        raise ValidationError(f"cannot read backtest results in {src}: {exc}") from None
    table = averages.pivot(index="strategy", columns="model", values="average_gain")
    order = [s for s in STRATEGIES if s in table.index]
    table = table.loc[order].reset_index()
    write_frame(table, out / "table_average_gain.csv")
    parts = averages[["model", "strategy", "ia_revenue", "arbitrage", "impact", "fees"]]
    write_frame(parts, out / "table_components.csv")
    plot = weights.pivot_table(index=["model", "date"], columns="strategy", values="da_weight").reset_index()
    write_frame(plot, out / "plot_da_weights.csv")
    print(table.to_string(index=False))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="auctionbid", description="Coordinated day-ahead and intraday auction bidding.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a synthetic market data bundle")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--days", type=int, default=40)
    p.add_argument("--start", default="2024-01-01")
    p.add_argument("--noise", type=float, default=5.0)
    p.add_argument("--da-liquidity", type=float, default=200.0)
    p.add_argument("--ia-liquidity", type=float, default=20.0)
    p.add_argument("--level-step", type=float, default=2.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    for name, func, helptext in (
        ("backtest", cmd_backtest, "run the rolling-window study"),
        ("forecast", cmd_forecast, "score the price forecasts only"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int)
        p.set_defaults(func=func)

    p = sub.add_parser("optimize", help="bids and gain breakdown for a single delivery hour")
    p.add_argument("--strategy", default="tc_min", help="comma-separated ids: " + ", ".join(STRATEGIES))
    p.add_argument("--v", help="portfolio, four comma-separated MW values")
    p.add_argument("--tau-da", type=float, default=0.05)
    p.add_argument("--tau-ia", type=float, default=0.10)
    p.add_argument("--prices", help="five unimpacted prices for the breakdown")
    p.add_argument("--config")
    p.add_argument("--date")
    p.add_argument("--hour", type=int)
    p.add_argument("--model", choices=("naive", "expert", "perfect"))
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("report", help="tables and plot data from backtest results")
    p.add_argument("--results", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}\nconfig keys:\n{schema_text()}", file=sys.stderr)
        return 2
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - any other failure is internal
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
