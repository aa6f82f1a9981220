import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bessmarket.agc import mileage_series
from bessmarket.bilevel import BilevelConfig
from bessmarket.model import table_one_battery, validate_case
from bessmarket.report import regulation_flattening, sweep_table
from bessmarket.sweep import (DEFAULT_CAPACITIES, DEFAULT_COSTS, DEFAULT_RATES, SweepGrid, read_sweep,
                              run_point, sweep_battery, write_sweep)
from bessmarket.synth import draw_mileage_ratios, hourly_to_intervals, synthesize_scenario

from cases import micro


class TestSynthesis:
    def test_desk_shape(self):
        case = synthesize_scenario()
        assert (case.grid.T, case.grid.Z, case.grid.dt) == (12, 9, 2.0)
        assert case.batteries[0].segment_count == 8
        assert validate_case(case) == []

    def test_full_shape(self):
        case = synthesize_scenario(full=True)
        assert (case.grid.T, case.grid.Z) == (96, 45)
        assert case.grid.dz == pytest.approx(20 / 3600)
        assert case.batteries[0].segment_count == 16

    def test_mileage_matches_requirement(self):
        case = synthesize_scenario(seed=5)
        assert np.allclose(mileage_series(case.agc), case.profiles.rgm, rtol=1e-9, atol=0)

    def test_custom_battery(self):
        case = synthesize_scenario(battery=table_one_battery(bus=2, rate=25.0))
        assert case.batteries[0].rate == 25.0 and case.batteries[0].bus == 2

    def test_hourly_average(self):
        v = np.arange(24.0)
        assert hourly_to_intervals(v, 24).tolist() == v.tolist()
        assert hourly_to_intervals(v, 12).tolist() == (v.reshape(12, 2).mean(axis=1)).tolist()
        assert hourly_to_intervals(v, 96).tolist() == np.repeat(v, 4).tolist()

    @settings(max_examples=40)
    @given(st.integers(1, 200), st.integers(0, 2**31))
    def test_ratio_draws(self, T, seed):
        rho = draw_mileage_ratios(T, seed)
        assert rho.min() >= 1.35 and rho.max() <= 1.65
        assert abs(rho.mean() - 1.5) <= 1e-9

    def test_seed_changes_draws(self):
        assert not np.array_equal(draw_mileage_ratios(12, 0), draw_mileage_ratios(12, 1))


class TestSweep:
    def test_default_grid(self):
        assert len(DEFAULT_CAPACITIES) == len(DEFAULT_RATES) == 20 and len(DEFAULT_COSTS) == 6
        pts = SweepGrid().points()
        assert len(pts) == 120 == len(set(pts))
        assert all(r == c / 4 for c, r, _ in pts)

    def test_grid_validation(self):
        with pytest.raises(ValueError):
            SweepGrid(capacities=(100.0,), rates=())
        with pytest.raises(ValueError):
            SweepGrid(capacities=(0.0,), rates=(1.0,))

    def test_battery_scaling_keeps_proportions(self):
        b = sweep_battery(table_one_battery(segment_count=8), 1000.0, 250.0, 1000.0)
        assert (b.capacity, b.rate, b.replacement_cost, b.segment_count) == (1000, 250, 1000, 8)
        assert (b.soc_min, b.soc_max, b.soc_init) == pytest.approx((100, 900, 450))

    def test_point_and_csv_round_trip(self, tmp_path):
        row = run_point(micro(), (200.0, 50.0, 200000.0), BilevelConfig())
        assert row["status"] in ("optimal", "time_limit")
        write_sweep([row], tmp_path)
        recs = read_sweep(tmp_path / "sweep.csv")
        assert len(recs) == 5
        assert {r["market"] for r in recs} == set(row["revenue"])


def _records(values):
    out = []
    for (cap, rate, cost), rev in values.items():
        for market, v in zip(("energy", "reserve", "reg_capacity", "reg_mileage", "degradation"), rev):
            out.append({"capacity": cap, "rate": rate, "repl_cost": cost, "market": market,
                        "revenue": v})
    return out


class TestReport:
    def test_reserve_monotone_flag(self):
        recs = _records({(100, 25, 1.0): (1, 5, 0, 0, -1), (200, 50, 1.0): (2, 4, 0, 0, -1)})
        rows = sweep_table(recs)
        assert [r[-1] for r in rows] == [True, False]
        assert rows[0][-2] == pytest.approx(5.0)

    def test_flattening_uses_large_rates_only(self):
        recs = _records({(100, 25, 1.0): (0, 0, 10, 5, 0), (400, 100, 1.0): (0, 0, 40, 20, 0),
                         (800, 200, 1.0): (0, 0, 40, 20, 0)})
        out = regulation_flattening(recs, max_rgc=100.0)
        assert out["1.0"] == {"points": 2, "relative_spread": 0.0}
