import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from auctionbid.curves import PriceGrid
from auctionbid.synthetic import SyntheticMarketSpec, generate_synthetic

SMALL_GRID = PriceGrid(-100.0, 100.0, 0.1)


def random_ladder(rng, grid: PriceGrid, n_levels: int, max_volume: float = 50.0) -> dict:
    ticks = rng.choice(grid.n_ticks, size=n_levels, replace=False)
    prices = np.round(grid.p_min + ticks * grid.tick, 10)
    return {float(p): float(v) for p, v in zip(prices, rng.uniform(0.1, max_volume, n_levels))}


@pytest.fixture(scope="session")
def small_bundle():
    spec = SyntheticMarketSpec(seed=3, days=30, level_step=2.0)
    return generate_synthetic(spec)


_ACCEPTANCE: dict = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    failed = report.failed or (report.when == "call" and report.outcome != "passed")
    if report.when == "call" or failed:
        _ACCEPTANCE[name] = _ACCEPTANCE.get(name, True) and not failed


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE):
        number, _, label = name.removeprefix("test_criterion_").partition("_")
        status = "PASS" if _ACCEPTANCE[name] else "FAIL"
        terminalreporter.write_line(f"criterion {int(number):2d} {label.replace('_', ' ')}: {status}")
