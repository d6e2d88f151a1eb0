"""CSV ingestion and export of market data.

File layouts (UTF-8, header row required):

* prices:    ``delivery_date,hour,p_da,p_ia1,p_ia2,p_ia3,p_ia4``
* exogenous: ``delivery_date,hour,load,solar,wind_on,wind_off``
* fuels:     ``date,eua,coal,gas,oil``
* curves:    ``delivery_date,hour,market,side,price,volume`` with one row per
  breakpoint of the aggregated curve (cumulative volume), ``market`` in
  ``DA, IA1..IA4`` (case-insensitive) and ``side`` in ``S, D``.

Days always have 24 hours; hour labels outside 1..24 (daylight-saving days)
are rejected.  Every write goes to a temporary file that is then renamed.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .curves import DEMAND, MARKET_GRIDS, SUPPLY, AggregatedCurve
from .exceptions import DuplicateRow, GapError, SchemaError, ValidationError
from .forecasting import EXOG_COLUMNS, FUEL_COLUMNS, PRICE_COLUMNS, PriceHistory

CURVE_COLUMNS = ("delivery_date", "hour", "market", "side", "price", "volume")
CURVE_MARKETS = ("DA", "IA1", "IA2", "IA3", "IA4")
FILES = {"prices": "prices.csv", "curves": "curves.csv", "exogenous": "exogenous.csv", "fuels": "fuels.csv"}


@dataclass(frozen=True, eq=False)
class HourlySeries:
    dates: np.ndarray
    values: np.ndarray
    columns: tuple

    def __eq__(self, other):
        return (
            isinstance(other, HourlySeries)
            and self.columns == other.columns
            and np.array_equal(self.dates, other.dates)
            and np.array_equal(self.values, other.values)
        )


@dataclass(frozen=True, eq=False)
class DailySeries:
    dates: np.ndarray
    values: np.ndarray
    columns: tuple

    def __eq__(self, other):
        return (
            isinstance(other, DailySeries)
            and self.columns == other.columns
            and np.array_equal(self.dates, other.dates)
            and np.array_equal(self.values, other.values)
        )


@dataclass(frozen=True, eq=False)
class CurveHistory:
    """``curves[d][h][i]`` is the (supply, demand) pair of market ``i``."""

    dates: np.ndarray
    curves: tuple

    def day_hour(self, d: int, h: int):
        return self.curves[d][h - 1]

    def __eq__(self, other):
        return (
            isinstance(other, CurveHistory)
            and np.array_equal(self.dates, other.dates)
            and self.curves == other.curves
        )


@dataclass(frozen=True, eq=False)
class DataBundle:
    prices: PriceHistory
    curves: CurveHistory
    exogenous: HourlySeries
    fuels: DailySeries

    def __post_init__(self):
        for name, dates in (("curves", self.curves.dates), ("exogenous", self.exogenous.dates), ("fuels", self.fuels.dates)):
            if not np.array_equal(dates, self.prices.dates):
                raise GapError(f"{name} do not cover the same days as prices")

    @property
    def dates(self) -> np.ndarray:
        return self.prices.dates

    def __len__(self):
        return len(self.prices)

    def __eq__(self, other):
        return (
            isinstance(other, DataBundle)
            and self.prices == other.prices
            and self.curves == other.curves
            and self.exogenous == other.exogenous
            and self.fuels == other.fuels
        )


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_frame(frame: pd.DataFrame, path) -> None:
    atomic_write_text(path, frame.to_csv(index=False, lineterminator="\n"))


def _read(path, columns) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except (OSError, UnicodeDecodeError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise SchemaError(f"{path}: cannot read CSV ({exc})") from None
    if tuple(frame.columns) != tuple(columns):
        raise SchemaError(f"{path}: expected header {','.join(columns)}, got {','.join(frame.columns)}")
    return frame


def _rows(mask) -> str:
    # header is line 1, so data row k sits on line k + 2
    lines = (np.flatnonzero(np.asarray(mask)) + 2).tolist()
    return ", ".join(map(str, lines[:10]))


def _numeric(frame, path, columns) -> np.ndarray:
    out = np.empty((len(frame), len(columns)))
    for j, col in enumerate(columns):
        try:
            # numpy parses decimal strings exactly, unlike the fast pandas parser
            values = frame[col].to_numpy().astype(float)
        except ValueError:
            values = pd.to_numeric(frame[col], errors="coerce").to_numpy(dtype=float)
        bad = ~np.isfinite(values)
        if bad.any():
            raise SchemaError(f"{path}: non-numeric or missing {col} on line(s) {_rows(bad)}")
        out[:, j] = values
    return out


def _dates(frame, col, path) -> np.ndarray:
    parsed = pd.to_datetime(frame[col], format="%Y-%m-%d", errors="coerce")
    bad = parsed.isna().to_numpy()
    if bad.any():
        raise SchemaError(f"{path}: invalid {col} on line(s) {_rows(bad)}")
    return parsed.to_numpy().astype("datetime64[D]")


def _hours(frame, path) -> np.ndarray:
    hours = pd.to_numeric(frame["hour"], errors="coerce").to_numpy()
    bad = ~np.isin(hours, np.arange(1, 25))
    if bad.any():
        raise SchemaError(f"{path}: hour must be 1..24 (daylight-saving days are not supported), line(s) {_rows(bad)}")
    return hours.astype(int)


def _day_range(dates) -> np.ndarray:
    return np.arange(dates.min(), dates.max() + np.timedelta64(1, "D"))


def _load_hourly(path, columns) -> tuple[np.ndarray, np.ndarray]:
    header = ("delivery_date", "hour") + tuple(columns)
    frame = _read(path, header)
    if frame.empty:
        raise SchemaError(f"{path}: no data rows")
    dates = _dates(frame, "delivery_date", path)
    hours = _hours(frame, path)
    values = _numeric(frame, path, columns)
    keys = pd.DataFrame({"d": dates, "h": hours})
    dup = keys.duplicated(keep=False).to_numpy()
    if dup.any():
        raise DuplicateRow(f"{path}: duplicate (delivery_date, hour) on line(s) {_rows(dup)}")
    days = _day_range(dates)
    idx = (dates - days[0]).astype(np.int64)
    table = np.full((days.size, 24, len(columns)), np.nan)
    table[idx, hours - 1] = values
    missing = np.isnan(table[..., 0])
    if missing.any():
        d, h = np.argwhere(missing)[0]
        raise GapError(f"{path}: missing delivery_date={days[d]} hour={h + 1}")
    return days, table


def load_prices(path) -> PriceHistory:
    days, table = _load_hourly(path, PRICE_COLUMNS)
    for i, grid in enumerate(MARKET_GRIDS):
        p = table[..., i]
        if np.any((p < grid.p_min) | (p > grid.p_max)):
            raise SchemaError(f"{path}: {PRICE_COLUMNS[i]} outside [{grid.p_min}, {grid.p_max}]")
    return PriceHistory(days, table)


def load_exogenous(path) -> HourlySeries:
    days, table = _load_hourly(path, EXOG_COLUMNS)
    return HourlySeries(days, table, EXOG_COLUMNS)


def load_fuels(path) -> DailySeries:
    frame = _read(path, ("date",) + FUEL_COLUMNS)
    if frame.empty:
        raise SchemaError(f"{path}: no data rows")
    dates = _dates(frame, "date", path)
    values = _numeric(frame, path, FUEL_COLUMNS)
    dup = pd.Series(dates).duplicated(keep=False).to_numpy()
    if dup.any():
        raise DuplicateRow(f"{path}: duplicate date on line(s) {_rows(dup)}")
    days = _day_range(dates)
    table = np.full((days.size, len(FUEL_COLUMNS)), np.nan)
    table[(dates - days[0]).astype(np.int64)] = values
    missing = np.isnan(table[:, 0])
    if missing.any():
        raise GapError(f"{path}: missing date={days[np.argmax(missing)]}")
    return DailySeries(days, table, FUEL_COLUMNS)


def load_curves(path) -> CurveHistory:
    frame = _read(path, CURVE_COLUMNS)
    if frame.empty:
        raise SchemaError(f"{path}: no data rows")
    dates = _dates(frame, "delivery_date", path)
    hours = _hours(frame, path)
    market = frame["market"].str.upper().map({m: i for i, m in enumerate(CURVE_MARKETS)})
    if market.isna().any():
        raise SchemaError(f"{path}: market must be one of {','.join(CURVE_MARKETS)}, line(s) {_rows(market.isna())}")
    side = frame["side"].to_numpy()
    bad_side = ~np.isin(side, (SUPPLY, DEMAND))
    if bad_side.any():
        raise SchemaError(f"{path}: side must be S or D, line(s) {_rows(bad_side)}")
    values = _numeric(frame, path, ("price", "volume"))
    market = market.to_numpy(dtype=int)
    is_demand = (side == DEMAND).astype(int)

    keys = pd.DataFrame({"d": dates, "h": hours, "m": market, "s": is_demand, "p": values[:, 0]})
    dup = keys.duplicated(keep=False).to_numpy()
    if dup.any():
        raise DuplicateRow(f"{path}: duplicate (delivery_date, hour, market, side, price) on line(s) {_rows(dup)}")

    days = _day_range(dates)
    day_idx = (dates - days[0]).astype(np.int64)
    order = np.lexsort((values[:, 0], is_demand, market, hours, day_idx))
    group = ((day_idx * 24 + hours - 1) * 5 + market) * 2 + is_demand
    g_sorted = group[order]
    starts = np.flatnonzero(np.r_[True, g_sorted[1:] != g_sorted[:-1]])
    ends = np.r_[starts[1:], g_sorted.size]
    n_groups = days.size * 24 * 5 * 2
    found = dict(zip(g_sorted[starts].tolist(), zip(starts.tolist(), ends.tolist())))
    if len(found) != n_groups:
        missing = min(set(range(n_groups)) - set(found))
        d, rest = divmod(missing, 240)
        h, rest = divmod(rest, 10)
        m, s = divmod(rest, 2)
        raise GapError(
            f"{path}: missing curve delivery_date={days[d]} hour={h + 1} market={CURVE_MARKETS[m]} side={'DS'[s]}"
        )
    prices, vols = values[order, 0], values[order, 1]
    out = []
    for d in range(days.size):
        day = []
        for h in range(24):
            hour = []
            for m in range(5):
                pair = []
                for s, side_label in enumerate((SUPPLY, DEMAND)):
                    a, b = found[((d * 24 + h) * 5 + m) * 2 + s]
                    try:
                        pair.append(AggregatedCurve(side_label, prices[a:b], vols[a:b], MARKET_GRIDS[m]))
                    except ValidationError as exc:
                        raise SchemaError(
                            f"{path}: invalid curve delivery_date={days[d]} hour={h + 1} market={CURVE_MARKETS[m]}: {exc}"
                        ) from None
                hour.append(tuple(pair))
            day.append(tuple(hour))
        out.append(tuple(day))
    return CurveHistory(days, tuple(out))


def prices_frame(history: PriceHistory) -> pd.DataFrame:
    return history.to_frame()


def hourly_frame(series: HourlySeries) -> pd.DataFrame:
    n = series.dates.size
    frame = pd.DataFrame(series.values.reshape(n * 24, -1), columns=list(series.columns))
    frame.insert(0, "hour", np.tile(np.arange(1, 25), n))
    frame.insert(0, "delivery_date", np.repeat(series.dates, 24).astype(str))
    return frame


def fuels_frame(series: DailySeries) -> pd.DataFrame:
    frame = pd.DataFrame(series.values, columns=list(series.columns))
    frame.insert(0, "date", series.dates.astype(str))
    return frame


def curves_frame(history: CurveHistory) -> pd.DataFrame:
    cols = {c: [] for c in CURVE_COLUMNS}
    for d, date in enumerate(history.dates.astype(str)):
        for h in range(24):
            for m, name in enumerate(CURVE_MARKETS):
                for curve in history.curves[d][h][m]:
                    n = curve.prices.size
                    cols["delivery_date"].append(np.full(n, date, dtype=object))
                    cols["hour"].append(np.full(n, h + 1))
                    cols["market"].append(np.full(n, name, dtype=object))
                    cols["side"].append(np.full(n, curve.side, dtype=object))
                    cols["price"].append(curve.prices)
                    cols["volume"].append(curve.volumes)
    return pd.DataFrame({c: np.concatenate(v) for c, v in cols.items()})


def save_prices(history: PriceHistory, path) -> None:
    write_frame(prices_frame(history), path)


def save_exogenous(series: HourlySeries, path) -> None:
    write_frame(hourly_frame(series), path)


def save_fuels(series: DailySeries, path) -> None:
    write_frame(fuels_frame(series), path)


def save_curves(history: CurveHistory, path) -> None:
    write_frame(curves_frame(history), path)


def save_bundle(bundle: DataBundle, directory) -> None:
    directory = Path(directory)
    save_prices(bundle.prices, directory / FILES["prices"])
    save_curves(bundle.curves, directory / FILES["curves"])
    save_exogenous(bundle.exogenous, directory / FILES["exogenous"])
    save_fuels(bundle.fuels, directory / FILES["fuels"])


def load_bundle(directory) -> DataBundle:
    directory = Path(directory)
    return DataBundle(
        load_prices(directory / FILES["prices"]),
        load_curves(directory / FILES["curves"]),
        load_exogenous(directory / FILES["exogenous"]),
        load_fuels(directory / FILES["fuels"]),
    )
