import csv
import filecmp
import json

import numpy as np
import pytest

from bessmarket.cli import main
from bessmarket.model import bundled_path, load_scenario, save_scenario

from cases import arbitrage

MICRO = str(bundled_path("micro", "scenario.manifest"))


def revenue_rows(path):
    with open(path) as fh:
        return {r["component"]: float(r["dollars"]) for r in csv.DictReader(fh)}


def test_validate_ok(capsys):
    assert main(["validate", "--scenario", MICRO]) == 0
    assert "ok" in capsys.readouterr().out


def test_validate_failure(tmp_path, capsys):
    save_scenario(load_scenario(MICRO), tmp_path)
    (tmp_path / "battery.csv").write_text(
        "bus,rate,capacity,soc_min,soc_max,soc_init,eta,replacement_cost\n"
        "2,50,200,20,180,190,0.95,200000\n")
    assert main(["validate", "--scenario", str(tmp_path / "scenario.manifest")]) == 1
    assert "SOC^Init" in capsys.readouterr().out


def test_missing_file_is_invalid(tmp_path):
    assert main(["validate", "--scenario", str(tmp_path / "nope.manifest")]) == 1


def test_synth_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["synth", "--out", str(a), "--seed", "3"]) == 0
    assert main(["synth", "--out", str(b), "--seed", "3"]) == 0
    names = sorted(p.name for p in a.iterdir())
    match, mismatch, errors = filecmp.cmpfiles(a, b, names, shallow=False)
    assert not mismatch and not errors


def test_synth_fixed_rho_and_ratios(tmp_path):
    assert main(["synth", "--out", str(tmp_path), "--rho-fixed", "1.5",
                 "--ratios", "0.1", "0.2", "0.3"]) == 0
    case = load_scenario(tmp_path / "scenario.manifest")
    assert np.allclose(case.profiles.rgm / case.profiles.rgc, 1.5, rtol=1e-12)
    assert np.array_equal(case.offers[..., 3], 0.3 * case.offers[..., 0])


def test_clear_writes_market(tmp_path):
    assert main(["clear", "--scenario", MICRO, "--out", str(tmp_path)]) == 0
    data = json.loads((tmp_path / "clearing.json").read_text())
    assert len(data["lmp"]) == 3
    assert (tmp_path / "market.csv").exists()
    assert main(["clear", "--scenario", MICRO, "--out", str(tmp_path), "--price-taker"]) == 0


def test_run_micro_revenue_table(tmp_path, capsys):
    assert main(["run", "--scenario", MICRO, "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    for name in ("energy", "reserve", "reg_capacity", "reg_mileage", "degradation", "profit"):
        assert name in out
    rev = revenue_rows(tmp_path / "revenue.csv")
    assert rev["degradation"] <= 0
    assert (tmp_path / "solution.json").exists()


def test_run_without_requirements(tmp_path):
    scen = save_scenario(arbitrage(), tmp_path / "scen")
    assert main(["run", "--scenario", str(scen), "--out", str(tmp_path / "o")]) == 0
    rev = revenue_rows(tmp_path / "o" / "revenue.csv")
    assert rev["reserve"] == rev["reg_capacity"] == rev["reg_mileage"] == 0.0
    # charge 50 MW at 10 $/MWh, discharge 50 MW at 20 $/MWh
    assert rev["energy"] == pytest.approx(500.0, rel=1e-6)


def test_run_is_reproducible(tmp_path):
    for d in ("a", "b"):
        assert main(["run", "--scenario", MICRO, "--out", str(tmp_path / d)]) == 0
    for f in ("schedules.csv", "revenue.csv", "prices.csv"):
        assert filecmp.cmp(tmp_path / "a" / f, tmp_path / "b" / f, shallow=False), f


def test_solver_failure_exit_code(tmp_path, capsys):
    code = main(["run", "--scenario", MICRO, "--out", str(tmp_path),
                 "--solver-cmd", "false {model} {solution}"])
    assert code == 2
    assert "solver failure" in capsys.readouterr().err


def test_single_point_sweep_matches_run(tmp_path):
    assert main(["run", "--scenario", MICRO, "--out", str(tmp_path / "run")]) == 0
    assert main(["sweep", "--scenario", MICRO, "--out", str(tmp_path / "sw"), "--workers", "1",
                 "--capacities", "200", "--rates", "50", "--costs", "200000"]) == 0
    run_rev = revenue_rows(tmp_path / "run" / "revenue.csv")
    with open(tmp_path / "sw" / "sweep.csv") as fh:
        sweep_rev = {r["market"]: float(r["revenue"]) for r in csv.DictReader(fh)}
    assert set(sweep_rev) == {"energy", "reserve", "reg_capacity", "reg_mileage", "degradation"}
    for k, v in sweep_rev.items():
        assert v == pytest.approx(run_rev[k], rel=1e-9, abs=1e-9), k


def test_sweep_partial_failure_exit_code(tmp_path):
    code = main(["sweep", "--scenario", MICRO, "--out", str(tmp_path), "--workers", "1",
                 "--capacities", "200", "--rates", "50", "--costs", "1000",
                 "--solver-cmd", "false {model} {solution}"])
    assert code == 3
    with open(tmp_path / "sweep_points.csv") as fh:
        assert next(csv.DictReader(fh))["status"] == "failed"


def test_report_from_run(tmp_path, capsys):
    assert main(["run", "--scenario", MICRO, "--out", str(tmp_path)]) == 0
    capsys.readouterr()
    assert main(["report", "--out", str(tmp_path)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert {"fig2_revenue", "fig3_schedule"} <= set(summary["files"])


def test_report_needs_results(tmp_path):
    assert main(["report", "--out", str(tmp_path)]) == 1
