import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import gain

from auctionbid.exceptions import ValidationError
from auctionbid.gains import (
    GainBreakdown,
    actual_gain,
    average_gain,
    decompose,
    gain_constrained,
    gain_full,
)
from auctionbid.strategies import FeeSchedule, expand, tc_min, transaction_cost

FEES = FeeSchedule.from_pair(0.05, 0.10)
vectors = st.lists(st.floats(-200, 200), min_size=5, max_size=5).map(np.array)
portfolios = st.lists(st.floats(-50, 50), min_size=4, max_size=4).map(np.array)


class TestGainFull:
    def test_constrained_has_no_penalty(self):
        v = np.array([1.0, 2.0, 3.0, 4.0])
        b = expand(1.5, v)
        p = np.array([40.0, 41, 42, 43, 44])
        assert gain_full(b, v, p, FEES, np.full(4, 99.0)) == pytest.approx(gain_constrained(b, p, FEES))

    def test_uncovered_penalty(self):
        assert gain_full(np.zeros(5), np.ones(4), np.full(5, 30.0), FEES, np.full(4, 10.0)) == -40.0

    def test_zero_prices(self):
        v = np.array([1.0, -2.0, 3.0, 0.5])
        assert gain_full(expand(0.7, v), v, np.zeros(5), FeeSchedule.from_pair(0, 0), np.ones(4)) == 0.0

    def test_bad_imbalance_prices(self):
        with pytest.raises(ValidationError):
            gain_full(np.zeros(5), np.ones(4), np.zeros(5), FEES, np.ones(3))


class TestGainConstrained:
    def test_da_only(self):
        assert gain_constrained([1, 0, 0, 0, 0], [40, 0, 0, 0, 0], FEES) == pytest.approx(39.95)

    def test_ia_only(self):
        v = np.array([1.0, -2.0, 3.0, 4.0])
        expected = 55.0 * v.sum() / 4 - 0.10 * np.abs(v).sum() / 4
        assert gain_constrained(expand(0.0, v), np.full(5, 55.0), FEES) == pytest.approx(expected)

    @settings(max_examples=100, deadline=None)
    @given(vectors, vectors)
    def test_sign_symmetry_and_oracle(self, b, p):
        assert gain_constrained(-b, -p, FEES) == pytest.approx(gain_constrained(b, p, FEES), abs=1e-9)
        assert gain_constrained(b, p, FEES) == pytest.approx(gain(b, p, FEES.tau), abs=1e-6)


class TestDecompose:
    def test_no_impact_at_tc_min(self):
        v = np.array([2.0, 3.0, 5.0, 8.0])
        br = decompose(tc_min(v, FEES), v, np.full(5, 50.0), np.zeros(5), FEES)
        assert br.impact == 0.0

    def test_no_arbitrage_without_da(self):
        v = np.array([2.0, 3.0, 5.0, 8.0])
        br = decompose(0.0, v, np.array([90.0, 1, 2, 3, 4]), np.zeros(5), FEES)
        assert br.arbitrage == 0.0

    def test_fees_are_transaction_cost(self):
        v = np.array([2.0, -3.0, 5.0, 8.0])
        assert decompose(1.3, v, np.ones(5), np.zeros(5), FEES).fees == transaction_cost(1.3, v, FEES)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(-100, 100), portfolios, vectors, st.lists(st.floats(-20, 20), min_size=5, max_size=5))
    def test_identity(self, b0, v, p0, deltas):
        br = decompose(b0, v, p0, np.array(deltas), FEES)
        assert abs(br.residual()) <= 1e-9 * max(1.0, abs(br.total))
        assert br.total == pytest.approx(gain_constrained(expand(b0, v), p0 + np.array(deltas), FEES), abs=0)

    def test_columns(self):
        br = GainBreakdown(1.0, 2.0, 3.0, 4.0, 2.0)
        assert br.as_tuple() == (1.0, 2.0, 3.0, 4.0, 2.0)
        assert br.residual() == 0.0


class TestAverages:
    def test_single(self):
        assert average_gain([(37.43, np.ones(4))]).value == pytest.approx(37.43)

    def test_constant_sell_day(self):
        # 24 hours, 1 MW sold through the DA at price p with zero impact
        p = 48.0
        v = np.ones(4)
        b0 = tc_min(v, FEES)
        series = [(actual_gain(expand(b0, v), np.full(5, p), np.zeros(5), FEES), v) for _ in range(24)]
        assert average_gain(series).value == pytest.approx(p - 0.05)

    def test_zero_hours_excluded(self):
        res = average_gain([(10.0, np.full(4, 2.0)), (5.0, np.zeros(4)), (3.0, np.array([1.0, -1.0, 2.0, -2.0]))])
        assert (res.value, res.n_used, res.n_excluded) == (5.0, 1, 2)
