"""Flat ``key = value`` run configuration.

Blank lines and lines starting with ``#`` are ignored.  Unknown keys,
repeated keys and unparsable values are errors.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, fields
from pathlib import Path

from .backtest import BacktestConfig, PortfolioSpec
from .data_io import FILES
from .exceptions import ConfigError, ValidationError


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _list(text: str) -> tuple:
    return tuple(item.strip() for item in text.split(",") if item.strip())


def _optional_float(text: str):
    return None if text.lower() in ("", "none", "auto") else float(text)


@dataclass(frozen=True)
class Key:
    parse: Callable
    help: str


SCHEMA: dict[str, Key] = {
    "data_dir": Key(str, "directory holding prices.csv, curves.csv, exogenous.csv and fuels.csv"),
    "window": Key(int, "estimation window D in days"),
    "out_of_sample": Key(int, "number of out-of-sample days N"),
    "scenarios": Key(int, "bootstrap scenarios M per delivery hour"),
    "curve_window": Key(int, "days K averaged for the curve forecast"),
    "tau_da": Key(float, "day-ahead fee in EUR/MWh"),
    "tau_ia": Key(float, "intraday fee in EUR/MWh"),
    "delta": Key(float, "share of the day-ahead impact passed on to intraday prices"),
    "slope_fraction": Key(float, "step of the linear impact slope as a share of cleared demand"),
    "gamma": Key(float, "mean-variance risk aversion"),
    "alpha": Key(float, "tail level of VaR and CVaR"),
    "seed": Key(int, "master seed for scenario draws and tests"),
    "setting": Key(str, "new_player or rebidding"),
    "strategies": Key(_list, "comma-separated strategy ids"),
    "models": Key(_list, "comma-separated price models: naive, expert, perfect"),
    "portfolio": Key(PortfolioSpec.parse, "constant:<MW>:<sell|buy> or fraction:<wind|solar|load>:<share>"),
    "grid_points": Key(int, "coarse grid size of the numeric optimiser"),
    "span": Key(_optional_float, "search margin in MW around the portfolio (auto = 3 x max |v|)"),
    "tolerance": Key(float, "golden-section tolerance in MW"),
    "bootstrap_resamples": Key(int, "resamples B of the mean-difference test"),
    "workers": Key(int, "parallel worker processes"),
}


def schema_text() -> str:
    width = max(map(len, SCHEMA))
    return "\n".join(f"  {k.ljust(width)}  {v.help}" for k, v in SCHEMA.items())


@dataclass(frozen=True)
class RunConfig:
    backtest: BacktestConfig
    data_dir: Path | None = None

    def check_files(self) -> None:
        if self.data_dir is None:
            raise ConfigError("data_dir is required")
        missing = [name for name in FILES.values() if not (self.data_dir / name).is_file()]
        if missing:
            raise ConfigError(f"missing data files in {self.data_dir}: {', '.join(missing)}")


def parse_config(text: str, base_dir=None) -> RunConfig:
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, value = (part.strip() for part in line.partition("="))
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: {key!r} given twice")
        try:
            values[key] = SCHEMA[key].parse(value)
        except (ValueError, ValidationError) as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from None
    data_dir = values.pop("data_dir", None)
    if data_dir is not None:
        data_dir = Path(data_dir)
        if base_dir is not None and not data_dir.is_absolute():
            data_dir = Path(base_dir) / data_dir
    known = {f.name for f in fields(BacktestConfig)}
    assert set(values) <= known
    return RunConfig(BacktestConfig(**values), data_dir)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, base_dir=path.parent)


def format_config(config: RunConfig) -> str:
    bt = config.backtest
    lines = []
    if config.data_dir is not None:
        lines.append(f"data_dir = {config.data_dir}")
    for f in fields(BacktestConfig):
        value = getattr(bt, f.name)
        if isinstance(value, tuple):
            value = ",".join(value)
        elif value is None:
            value = "auto"
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"
