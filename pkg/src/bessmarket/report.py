"""Figure-ready tables from ``run`` and ``sweep`` output directories."""

from __future__ import annotations

import csv
import json
from collections import defaultdict
from pathlib import Path

from .bilevel.assemble import REVENUE_ROWS
from .model import load_scenario
from .sweep import read_sweep


def _write(path: Path, header, rows) -> Path:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def schedule_by_interval(solution: dict) -> list[list]:
    """Interval-level battery schedule with end-of-interval SOC (first battery)."""
    bat = solution["battery_schedule"][0]
    soc = solution["soc"][0]
    rows = []
    for t, (p, s) in enumerate(zip(bat, soc)):
        rows.append([t + 1, *(repr(float(v)) for v in p), repr(float(s[-1])),
                     repr(float(min(s))), repr(float(max(s)))])
    return rows


def sweep_table(records: list[dict]):
    """Wide table per (capacity, repl_cost) plus the reserve monotonicity flag."""
    wide = defaultdict(dict)
    rates = {}
    for r in records:
        key = (r["capacity"], r["repl_cost"])
        wide[key][r["market"]] = r["revenue"]
        rates[key] = r["rate"]
    rows = []
    last_reserve = {}
    for cap, cost in sorted(wide, key=lambda k: (k[1], k[0])):
        vals = wide[(cap, cost)]
        reserve = vals.get("reserve", 0.0)
        mono = reserve >= last_reserve.get(cost, float("-inf")) - 1e-6
        last_reserve[cost] = reserve
        total = sum(vals.get(m, 0.0) for m in REVENUE_ROWS)
        rows.append([cap, rates[(cap, cost)], cost, *(vals.get(m, 0.0) for m in REVENUE_ROWS),
                     total, mono])
    return rows


def regulation_flattening(records: list[dict], max_rgc: float) -> dict:
    """Relative spread of regulation revenue among points with rate >= max R^RgC."""
    by_cost = defaultdict(list)
    for r in records:
        if r["market"] in ("reg_capacity", "reg_mileage") and r["rate"] >= max_rgc:
            by_cost[r["repl_cost"]].append((r["capacity"], r["market"], r["revenue"]))
    out = {}
    for cost, items in by_cost.items():
        per_cap = defaultdict(float)
        for cap, _m, rev in items:
            per_cap[cap] += rev
        vals = list(per_cap.values())
        top = max(abs(v) for v in vals) or 1.0
        out[repr(cost)] = {"points": len(vals), "relative_spread": (max(vals) - min(vals)) / top}
    return out


def build_report(results_dir) -> dict:
    d = Path(results_dir)
    written = {}
    summary = {}
    sol_path = d / "solution.json"
    if sol_path.exists():
        sol = json.loads(sol_path.read_text())
        rows = [[k, repr(float(sol["revenue"][k]))] for k in REVENUE_ROWS[:-1]]
        rows.append(["degradation", repr(-float(sol["degradation_cost"]))])
        written["fig2_revenue"] = str(_write(d / "fig2_revenue.csv", ["component", "dollars"], rows))
        written["fig3_schedule"] = str(_write(
            d / "fig3_schedule.csv",
            ["t", "energy", "reserve", "reg_capacity", "reg_mileage", "soc_end", "soc_min", "soc_max"],
            schedule_by_interval(sol)))
        summary["profit"] = sol["profit"]
        summary["status"] = sol["status"]
    sweep_path = d / "sweep.csv"
    if sweep_path.exists():
        records = read_sweep(sweep_path)
        rows = sweep_table(records)
        written["fig4_sweep"] = str(_write(
            d / "fig4_sweep.csv",
            ["capacity", "rate", "repl_cost", *REVENUE_ROWS, "total", "reserve_monotone"],
            [[repr(float(v)) if isinstance(v, float) else v for v in r] for r in rows]))
        summary["sweep_points"] = len(rows)
        summary["reserve_monotone_in_capacity"] = all(r[-1] for r in rows)
        manifest = d / "scenario" / "scenario.manifest"
        if manifest.exists():
            case = load_scenario(manifest, validate=False)
            max_rgc = float(case.profiles.rgc.max())
            summary["max_reg_capacity_requirement"] = max_rgc
            summary["regulation_flattening"] = regulation_flattening(records, max_rgc)
    if not written:
        raise FileNotFoundError(f"{d}: no solution.json or sweep.csv to report on")
    summary["files"] = written
    (d / "report.json").write_text(json.dumps(summary, indent=2))
    return summary
