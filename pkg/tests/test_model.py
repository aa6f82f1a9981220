from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bessmarket.model import (BatteryUnit, Generator, ScenarioError, SystemProfiles,
                              build_time_grid, load_scenario, save_scenario, synthesize_offers,
                              table_one_battery, validate_case)

from cases import make_case, merit_order, micro


def assert_same_case(a, b):
    assert a.grid == b.grid and a.buses == b.buses and a.lines == b.lines
    assert a.generators == b.generators and a.batteries == b.batteries
    assert (a.price_floor, a.price_cap, a.name) == (b.price_floor, b.price_cap, b.name)
    for x, y in ((a.offers, b.offers), (a.agc, b.agc), (a.profiles.load, b.profiles.load),
                 (a.profiles.rs, b.profiles.rs), (a.profiles.rgc, b.profiles.rgc),
                 (a.profiles.rgm, b.profiles.rgm)):
        assert x.shape == y.shape
        assert np.array_equal(x, y)


class TestTimeGrid:
    def test_quarter_hour_with_20s_agc(self):
        g = build_time_grid(0.25, 20 / 3600, 96)
        assert (g.T, g.Z) == (96, 45)

    def test_single_subinterval(self):
        assert build_time_grid(1.0, 1.0, 24).Z == 1

    def test_non_multiple_rejected(self):
        with pytest.raises(ValueError):
            build_time_grid(0.25, 0.1, 96)

    def test_empty_horizon_rejected(self):
        with pytest.raises(ValueError):
            build_time_grid(0.25, 0.25, 0)


class TestValidation:
    def test_table_one_battery_is_valid(self):
        case = micro()
        b = case.batteries[0]
        assert (b.rate, b.capacity, b.soc_min, b.soc_max, b.soc_init, b.eta) == \
            (50.0, 200.0, 20.0, 180.0, 90.0, 0.95)
        assert validate_case(case) == []

    def test_initial_soc_above_max(self):
        case = micro().with_batteries([table_one_battery(2, soc_init=190.0)])
        assert any("SOC^Init" in v for v in validate_case(case))

    def test_insufficient_generation(self):
        case = make_case([Generator(1, 0, 100, 0, 0)], [10], [[150]])
        bad = validate_case(case)
        assert any("insufficient generation" in v for v in bad)

    def test_negative_load(self):
        case = merit_order()
        case = replace(case, profiles=SystemProfiles([[-5.0]], [0.0], [0.0], [0.0]))
        assert any("negative demand" in v for v in validate_case(case))

    def test_mileage_mismatch(self):
        case = micro()
        p = case.profiles
        case = replace(case, profiles=SystemProfiles(p.load, p.rs, p.rgc, p.rgm + 1.0))
        assert any("mileage" in v for v in validate_case(case))

    def test_validation_is_side_effect_free(self):
        case = micro()
        first = validate_case(case)
        assert validate_case(case) == first
        assert_same_case(case, micro())


class TestScenarioFiles:
    def test_micro_dimensions(self):
        case = micro()
        assert len(case.buses) == 3 and len(case.generators) == 2 and len(case.batteries) == 1
        assert (case.grid.T, case.grid.Z) == (2, 2)

    def test_round_trip_is_bit_identical(self, tmp_path):
        case = micro()
        again = load_scenario(save_scenario(case, tmp_path))
        assert_same_case(case, again)

    def test_empty_generator_file(self, tmp_path):
        path = save_scenario(micro(), tmp_path)
        (tmp_path / "generators.csv").write_text("bus,pmin,pmax,rs_ramp,rg_ramp\n")
        with pytest.raises(ScenarioError, match="no generators"):
            load_scenario(path)

    def test_bad_number_names_file_and_line(self, tmp_path):
        path = save_scenario(micro(), tmp_path)
        lines = (tmp_path / "lines.csv").read_text().splitlines()
        lines[2] = "2,3,ten,80.0"
        (tmp_path / "lines.csv").write_text("\n".join(lines) + "\n")
        with pytest.raises(ScenarioError, match=r"lines\.csv:3"):
            load_scenario(path)

    def test_invalid_case_raises_with_all_violations(self, tmp_path):
        bad = micro().with_batteries([table_one_battery(2, soc_init=190.0, eta=1.5)])
        path = save_scenario(bad, tmp_path)
        with pytest.raises(ScenarioError) as exc:
            load_scenario(path)
        assert len(exc.value.violations) >= 2

    @settings(max_examples=25, deadline=None)
    @given(st.lists(st.floats(0, 1e4, allow_nan=False, allow_subnormal=False), min_size=6, max_size=6),
           st.floats(1e-6, 1.0, allow_subnormal=False))
    def test_round_trip_random_values(self, vals, eta):
        import tempfile
        case = micro()
        load = np.array(vals).reshape(3, 2)
        case = replace(case, profiles=SystemProfiles(load, case.profiles.rs, case.profiles.rgc,
                                                     case.profiles.rgm),
                       batteries=(replace(case.batteries[0], eta=eta),))
        with tempfile.TemporaryDirectory() as d:
            again = load_scenario(save_scenario(case, d), validate=False)
        assert_same_case(case, again)


class TestOfferSynthesis:
    def test_fixed_ratios(self):
        rs, rgc, rgm = synthesize_offers([10.0])
        assert (rs[0], rgc[0], rgm[0]) == pytest.approx((1.5, 4.0, 0.7), abs=1e-12)

    def test_zero_offer(self):
        assert [float(a[0]) for a in synthesize_offers([0.0])] == [0.0, 0.0, 0.0]

    def test_negative_offer_rejected(self):
        with pytest.raises(ValueError):
            synthesize_offers([-1.0])

    @given(st.lists(st.floats(0, 1e4, allow_nan=False), min_size=1, max_size=20))
    def test_linear_in_energy_offer(self, alpha):
        a = np.array(alpha)
        for r, arr in zip((0.15, 0.4, 0.07), synthesize_offers(a)):
            assert np.allclose(arr, r * a, rtol=0, atol=1e-9)


def test_battery_defaults():
    b = BatteryUnit(1, 50, 200, 20, 180, 90, 0.95)
    assert (b.life_cycles, b.reference_depth, b.aging_exponent, b.segment_count) == \
        (6000.0, 0.8, 2.03, 16)
