import pandas as pd
import pytest

from auctionbid.backtest import BacktestConfig, PortfolioSpec
from auctionbid.cli import main
from auctionbid.config import (
    SCHEMA,
    RunConfig,
    format_config,
    load_config,
    parse_config,
)
from auctionbid.exceptions import ConfigError
from auctionbid.strategies import STRATEGIES


class TestParseConfig:
    def test_values_and_comments(self):
        rc = parse_config(
            "# study\n\nwindow = 30\nstrategies = tc_min, e_meff\nportfolio = constant:1000:sell\nspan = auto\n",
            base_dir="/data",
        )
        bt = rc.backtest
        assert bt.window == 30 and bt.strategies == ("tc_min", "e_meff")
        assert bt.portfolio == PortfolioSpec("constant", 1000.0, "sell")
        assert bt.span is None and rc.data_dir is None

    def test_relative_data_dir(self, tmp_path):
        rc = parse_config("data_dir = bundle\n", base_dir=tmp_path)
        assert rc.data_dir == tmp_path / "bundle"

    @pytest.mark.parametrize(
        "text, match",
        [
            ("windw = 3\n", "line 1: unknown key 'windw'"),
            ("window = 30\nwindow = 31\n", "line 2: 'window' given twice"),
            ("window = thirty\n", "bad value for 'window'"),
            ("portfolio = half\n", "bad value for 'portfolio'"),
            ("just words\n", "expected 'key = value'"),
            ("strategies = tc_min,foo\n", "valid ids"),
        ],
    )
    def test_errors(self, text, match):
        with pytest.raises(ConfigError, match=match):
            parse_config(text)

    def test_format_round_trip(self, tmp_path):
        bt = BacktestConfig(window=40, strategies=("tc_min", "cvar"), span=50.0, portfolio=PortfolioSpec.parse("fraction:wind:0.02"))
        path = tmp_path / "run.cfg"
        path.write_text(format_config(RunConfig(bt, tmp_path)))
        rc = load_config(path)
        assert rc.backtest == bt and rc.data_dir == tmp_path

    def test_schema_covers_config(self):
        from dataclasses import fields

        assert {f.name for f in fields(BacktestConfig)} | {"data_dir"} == set(SCHEMA)

    def test_missing_files(self, tmp_path):
        with pytest.raises(ConfigError, match="missing data files"):
            parse_config(f"data_dir = {tmp_path}\n").check_files()


class TestOptimizeOffline:
    def test_example_portfolio(self, capsys):
        assert main(["optimize", "--v", "2,3,5,8", "--tau-da", "0.05", "--tau-ia", "0.10"]) == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0] == "strategy=tc_min b0=2 b=(2,0,1,3,6)"
        assert out[1].startswith("ia_revenue=")

    def test_breakdown_with_prices(self, capsys):
        args = ["optimize", "--strategy", "ia_only,tc_min", "--v", "1,1,1,1", "--prices", "50,40,40,40,40"]
        assert main(args) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "strategy=ia_only b0=0 b=(0,1,1,1,1)"
        assert "total=39.9" in lines[1]
        assert lines[2] == "strategy=tc_min b0=1 b=(1,0,0,0,0)"
        assert "arbitrage=10" in lines[3] and "total=49.95" in lines[3]

    def test_unknown_strategy(self, capsys):
        assert main(["optimize", "--strategy", "magic", "--v", "1,1,1,1"]) == 2
        err = capsys.readouterr().err
        assert "unknown strategy magic" in err
        assert all(s in err for s in STRATEGIES)

    def test_bad_vector(self, capsys):
        assert main(["optimize", "--v", "1,2"]) == 2
        assert "--v must have 4 values" in capsys.readouterr().err

    def test_needs_scenarios(self, capsys):
        assert main(["optimize", "--strategy", "e_meff", "--v", "1,1,1,1"]) == 2


@pytest.fixture(scope="module")
def bundle_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert main(["simulate", "--seed", "7", "--days", "20", "--out", str(out)]) == 0
    return out


def write_cfg(path, data_dir, **extra):
    lines = {
        "data_dir": str(data_dir),
        "window": "8",
        "curve_window": "5",
        "out_of_sample": "1",
        "scenarios": "40",
        "strategies": "ia_only,tc_min,e_meff",
        "models": "naive",
        "bootstrap_resamples": "100",
        "grid_points": "41",
        **extra,
    }
    path.write_text("".join(f"{k} = {v}\n" for k, v in lines.items()))
    return path


class TestEndToEnd:
    def test_simulate_writes_bundle_and_template(self, bundle_dir):
        names = {p.name for p in bundle_dir.iterdir()}
        assert {"prices.csv", "curves.csv", "exogenous.csv", "fuels.csv", "run.cfg"} <= names
        rc = load_config(bundle_dir / "run.cfg")
        rc.check_files()
        assert rc.backtest.first_day + rc.backtest.out_of_sample == 20

    def test_backtest_and_report(self, bundle_dir, tmp_path, capsys):
        cfg = write_cfg(tmp_path / "run.cfg", bundle_dir)
        assert main(["backtest", "--config", str(cfg), "--out", str(tmp_path / "res")]) == 0
        avg = pd.read_csv(tmp_path / "res" / "averages.csv")
        assert list(avg["strategy"]) == ["ia_only", "tc_min", "e_meff"]
        assert main(["report", "--results", str(tmp_path / "res"), "--out", str(tmp_path / "rep")]) == 0
        table = pd.read_csv(tmp_path / "rep" / "table_average_gain.csv")
        assert list(table.columns) == ["strategy", "naive"]

    def test_optimize_with_config(self, bundle_dir, tmp_path, capsys):
        cfg = write_cfg(tmp_path / "run.cfg", bundle_dir)
        date = str(pd.read_csv(bundle_dir / "prices.csv")["delivery_date"].iloc[-1])
        args = ["optimize", "--config", str(cfg), "--date", date, "--hour", "12", "--strategy", "tc_min,e_meff"]
        assert main(args) == 0
        out = capsys.readouterr().out
        assert "model=naive" in out and "strategy=e_meff" in out

    def test_forecast(self, bundle_dir, tmp_path):
        cfg = write_cfg(tmp_path / "run.cfg", bundle_dir)
        assert main(["forecast", "--config", str(cfg), "--out", str(tmp_path / "f")]) == 0
        assert len(pd.read_csv(tmp_path / "f" / "metrics.csv")) == 6

    def test_config_error_exit_code(self, bundle_dir, tmp_path, capsys):
        cfg = write_cfg(tmp_path / "run.cfg", bundle_dir, windw="3")
        assert main(["backtest", "--config", str(cfg), "--out", str(tmp_path / "x")]) == 2
        err = capsys.readouterr().err
        assert "unknown key 'windw'" in err and "config keys:" in err
        assert err.count("bootstrap_resamples") == 1

    def test_validation_error_exit_code(self, tmp_path, capsys):
        (tmp_path / "prices.csv").write_text("nope\n")
        for name in ("curves.csv", "exogenous.csv", "fuels.csv"):
            (tmp_path / name).write_text("nope\n")
        cfg = write_cfg(tmp_path / "run.cfg", tmp_path)
        assert main(["backtest", "--config", str(cfg), "--out", str(tmp_path / "x")]) == 2

    def test_internal_error_exit_code(self, tmp_path, capsys):
        (tmp_path / "averages.csv").write_text("a,b\n1,2\n")
        (tmp_path / "da_weights.csv").write_text("a,b\n1,2\n")
        assert main(["report", "--results", str(tmp_path), "--out", str(tmp_path / "r")]) == 1
        assert "internal error" in capsys.readouterr().err
