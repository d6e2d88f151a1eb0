import numpy as np
import pytest
from conftest import SMALL_GRID, random_ladder
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import scan_clearing_price, step_volume

from auctionbid.curves import (
    DA_GRID,
    DEMAND,
    SUPPLY,
    AggregatedCurve,
    BidLadder,
    PriceGrid,
    aggregate,
    clear,
    clear_with_bid,
    price_at,
    shift_by_own_bid,
    volume_at,
)
from auctionbid.exceptions import (
    EmptyLadder,
    IncompatibleGrids,
    OffGridPrice,
    ValidationError,
    VolumeOutOfRange,
)

SUP = AggregatedCurve(SUPPLY, [-500, 20], [10, 15])
DEM = AggregatedCurve(DEMAND, [10, 3000], [16, 12])


class TestPriceGrid:
    def test_rejects_bad_ranges(self):
        with pytest.raises(ValidationError):
            PriceGrid(1.0, 1.0)
        with pytest.raises(ValidationError):
            PriceGrid(0.0, 1.0, 0.0)
        with pytest.raises(ValidationError):
            PriceGrid(0.0, 1.05, 0.1)

    def test_ticks_and_snap(self):
        g = PriceGrid(-1.0, 1.0, 0.1)
        assert g.n_ticks == 21
        assert g.prices()[0] == -1.0 and g.prices()[-1] == 1.0
        assert g.snap(0.04) == 0.0
        assert g.snap(5.0) == 1.0
        assert bool(g.contains(0.3)) and not bool(g.contains(0.35))


class TestAggregate:
    def test_supply_cumsum(self):
        c = aggregate({-500: 10, 20: 5}, SUPPLY, DA_GRID)
        assert c.breakpoints == [(-500.0, 10.0), (20.0, 15.0)]

    def test_demand_reverse_cumsum(self):
        c = aggregate({3000: 12, 10: 4}, DEMAND, DA_GRID)
        assert c.breakpoints == [(10.0, 16.0), (3000.0, 12.0)]

    def test_single_bid_extension(self):
        c = aggregate({0: 5}, SUPPLY)
        assert c.breakpoints == [(0.0, 5.0)]
        assert volume_at(c, -0.1) == 0.0
        assert volume_at(c, 100.0) == 5.0

    def test_errors(self):
        with pytest.raises(EmptyLadder):
            aggregate({}, SUPPLY)
        with pytest.raises(OffGridPrice):
            aggregate({0.05: 1.0}, SUPPLY, DA_GRID)
        with pytest.raises(ValidationError):
            BidLadder(SUPPLY, {0.0: -1.0})

    def test_matches_cumulative_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            bids = random_ladder(rng, SMALL_GRID, 6)
            for side in (SUPPLY, DEMAND):
                c = aggregate(bids, side, SMALL_GRID)
                for p in rng.uniform(-120, 120, 20):
                    assert volume_at(c, p) == pytest.approx(step_volume(bids, side, p), abs=1e-9)


class TestVolumeAndPrice:
    @pytest.mark.parametrize("p, expected", [(-500, 10), (-240, 12.5), (100, 15)])
    def test_volume_at(self, p, expected):
        assert volume_at(SUP, p) == pytest.approx(expected)

    @pytest.mark.parametrize("z, expected", [(12, -292), (15, 20), (10, -500)])
    def test_price_at(self, z, expected):
        assert price_at(SUP, z) == pytest.approx(expected)

    def test_out_of_range(self):
        with pytest.raises(VolumeOutOfRange):
            price_at(SUP, 16)

    def test_flat_stretch_extremes(self):
        s = AggregatedCurve(SUPPLY, [0, 10, 20], [5, 5, 8])
        d = AggregatedCurve(DEMAND, [0, 10, 20], [8, 5, 5])
        assert price_at(s, 5) == 0.0
        assert price_at(d, 5) == 20.0

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_inverse_consistency(self, seed):
        rng = np.random.default_rng(seed)
        bids = random_ladder(rng, SMALL_GRID, int(rng.integers(1, 8)))
        for side in (SUPPLY, DEMAND):
            c = aggregate(bids, side, SMALL_GRID)
            lo, hi = c.volume_range
            for z in np.linspace(lo, hi, 7):
                assert volume_at(c, price_at(c, z)) == pytest.approx(z, abs=1e-9)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_monotone(self, seed):
        rng = np.random.default_rng(seed)
        bids = random_ladder(rng, SMALL_GRID, 5)
        grid = np.linspace(-110, 110, 400)
        assert np.all(np.diff(volume_at(aggregate(bids, SUPPLY), grid)) >= -1e-12)
        assert np.all(np.diff(volume_at(aggregate(bids, DEMAND), grid)) <= 1e-12)


class TestClear:
    def test_example_crossing(self):
        res = clear(SUP, DEM, DA_GRID)
        assert res.price == pytest.approx(757.5)
        assert res.volume == pytest.approx(15.0)
        assert not res.degenerate

    def test_symmetric(self):
        s = AggregatedCurve(SUPPLY, [0, 100], [0, 10])
        d = AggregatedCurve(DEMAND, [0, 100], [10, 0])
        res = clear(s, d)
        assert (res.price, res.volume, res.degenerate) == (50.0, 5.0, False)

    def test_upper_fallback(self):
        s = AggregatedCurve(SUPPLY, [0, 100], [0, 10])
        d = AggregatedCurve(DEMAND, [0, 100], [20, 12])
        res = clear(s, d)
        assert (res.price, res.volume, res.degenerate) == (100.0, 10.0, True)

    def test_lower_fallback(self):
        s = AggregatedCurve(SUPPLY, [0, 100], [30, 40])
        d = AggregatedCurve(DEMAND, [0, 100], [20, 0])
        res = clear(s, d)
        assert (res.price, res.volume, res.degenerate) == (0.0, 20.0, True)

    def test_flat_overlap_midpoint(self):
        s = AggregatedCurve(SUPPLY, [0, 10, 20, 30], [0, 5, 5, 10])
        d = AggregatedCurve(DEMAND, [0, 10, 20, 30], [10, 5, 5, 0])
        assert clear(s, d).price == pytest.approx(15.0)

    def test_incompatible_grids(self):
        s = aggregate({0: 1.0}, SUPPLY, DA_GRID)
        d = aggregate({0: 1.0}, DEMAND, SMALL_GRID)
        with pytest.raises(IncompatibleGrids):
            clear(s, d)

    def test_against_scan_oracle(self):
        rng = np.random.default_rng(5)
        grid = PriceGrid(-50.0, 50.0, 0.1)
        for _ in range(60):
            sb = random_ladder(rng, grid, 4)
            db = random_ladder(rng, grid, 4)
            sb[grid.p_min] = sb.get(grid.p_min, 0.0) + 1.0
            db[grid.p_max] = db.get(grid.p_max, 0.0) + 1.0
            res = clear(aggregate(sb, SUPPLY, grid), aggregate(db, DEMAND, grid))
            if res.degenerate:
                continue
            ref = scan_clearing_price(sb, db, grid.p_min, grid.p_max, grid.tick / 10)
            assert abs(res.price - ref) <= grid.tick


class TestShift:
    def test_identity(self):
        assert shift_by_own_bid(SUP, DEM, 0.0) == (SUP, DEM)

    def test_supply_shift(self):
        s, d = shift_by_own_bid(SUP, DEM, 3.0)
        assert s.breakpoints == [(-500.0, 13.0), (20.0, 18.0)]
        assert d == DEM

    def test_demand_shift(self):
        s, d = shift_by_own_bid(SUP, DEM, -2.0)
        assert d.breakpoints == [(10.0, 18.0), (3000.0, 14.0)]
        assert s == SUP

    def test_rejects_nan(self):
        with pytest.raises(ValidationError):
            shift_by_own_bid(SUP, DEM, float("nan"))

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(-30, 30))
    def test_shift_identity_and_direction(self, seed, b):
        rng = np.random.default_rng(seed)
        sb = random_ladder(rng, SMALL_GRID, 5)
        db = random_ladder(rng, SMALL_GRID, 5)
        sb[SMALL_GRID.p_min] = sb.get(SMALL_GRID.p_min, 0.0) + 1.0
        db[SMALL_GRID.p_max] = db.get(SMALL_GRID.p_max, 0.0) + 1.0
        s, d = aggregate(sb, SUPPLY, SMALL_GRID), aggregate(db, DEMAND, SMALL_GRID)
        s2, d2 = shift_by_own_bid(s, d, b)
        # bit-exact at the bidden prices, to rounding in between
        np.testing.assert_array_equal(s2.volumes, s.volumes + max(b, 0.0))
        np.testing.assert_array_equal(d2.volumes, d.volumes + max(-b, 0.0))
        np.testing.assert_array_equal(s2.prices, s.prices)
        ps = np.linspace(SMALL_GRID.p_min, SMALL_GRID.p_max, 50)
        np.testing.assert_allclose(volume_at(s2, ps), volume_at(s, ps) + max(b, 0.0), rtol=0, atol=1e-12)
        np.testing.assert_allclose(volume_at(d2, ps), volume_at(d, ps) + max(-b, 0.0), rtol=0, atol=1e-12)
        base = clear(s, d).price
        moved = clear_with_bid(s, d, b).price
        if b > 0:
            assert moved <= base + 1e-12
        elif b < 0:
            assert moved >= base - 1e-12
