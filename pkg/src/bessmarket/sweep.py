"""Capacity x replacement-cost sweep."""

from __future__ import annotations

import csv
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .bilevel import BilevelConfig, assemble_and_solve
from .bilevel.assemble import REVENUE_ROWS
from .model import BatteryUnit, ScenarioCase
from .solver import SolverError

DEFAULT_CAPACITIES = tuple(float(c) for c in range(100, 2001, 100))
DEFAULT_RATES = tuple(float(r) for r in range(25, 501, 25))
DEFAULT_COSTS = (200_000.0, 150_000.0, 100_000.0, 50_000.0, 25_000.0, 1_000.0)
# per-point MILP limit (s) when the config sets none; retried once, longer,
# if the solver stops without an incumbent
POINT_TIME_LIMIT = 12.0
RETRY_FACTOR = 5.0


@dataclass(frozen=True)
class SweepGrid:
    capacities: tuple[float, ...] = DEFAULT_CAPACITIES
    rates: tuple[float, ...] = DEFAULT_RATES
    costs: tuple[float, ...] = DEFAULT_COSTS

    def __post_init__(self):
        if len(self.capacities) != len(self.rates):
            raise ValueError("need one rate per capacity")
        if any(v <= 0 for v in self.capacities + self.rates) or any(c < 0 for c in self.costs):
            raise ValueError("capacities and rates must be positive, costs non-negative")

    def points(self) -> list[tuple[float, float, float]]:
        return [(c, r, k) for c, r in zip(self.capacities, self.rates) for k in self.costs]


def sweep_battery(base: BatteryUnit, capacity: float, rate: float, cost: float) -> BatteryUnit:
    """Scale ``base`` to a new size keeping its SOC proportions and its
    segment count."""
    f = capacity / base.capacity
    return replace(base, rate=rate, capacity=capacity, soc_min=base.soc_min * f,
                   soc_max=base.soc_max * f, soc_init=base.soc_init * f,
                   replacement_cost=cost)


def run_point(case: ScenarioCase, point, config: BilevelConfig) -> dict:
    capacity, rate, cost = point
    bat = sweep_battery(case.batteries[0], capacity, rate, cost)
    row = {"capacity": capacity, "rate": rate, "repl_cost": cost, "segments": bat.segment_count}
    t0 = time.perf_counter()
    if config.time_limit is None:
        config = replace(config, time_limit=POINT_TIME_LIMIT)
    scen = case.with_batteries([bat])
    try:
        try:
            sol = assemble_and_solve(scen, config)
        except SolverError:
            sol = assemble_and_solve(scen, replace(config,
                                                   time_limit=config.time_limit * RETRY_FACTOR))
    except Exception as exc:  # recorded per point, the sweep goes on
        row.update(status="failed", error=f"{type(exc).__name__}: {exc}"[:300])
    else:
        row.update(status=sol.status, mip_gap=sol.mip_gap, profit=sol.profit, error="",
                   revenue=dict(sol.revenue_table()))
    row["seconds"] = time.perf_counter() - t0
    return row


def _run_point_args(args):
    return run_point(*args)


def run_sweep(case: ScenarioCase, grid: SweepGrid, config: BilevelConfig | None = None,
              workers: int | None = None, progress=None) -> list[dict]:
    config = config or BilevelConfig()
    pts = grid.points()
    workers = workers or os.cpu_count() or 1
    tasks = [(case, p, config) for p in pts]
    if workers == 1:
        out = []
        for task in tasks:
            out.append(_run_point_args(task))
            if progress:
                progress(out[-1])
        return out
    with ProcessPoolExecutor(max_workers=workers) as pool:
        out = []
        for row in pool.map(_run_point_args, tasks):
            out.append(row)
            if progress:
                progress(row)
    return out


def write_sweep(rows: list[dict], out_dir) -> tuple[Path, Path]:
    """``sweep.csv`` (capacity, rate, repl_cost, market, revenue) and
    ``sweep_points.csv`` with per-point status, gap and timing."""
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    long_path = d / "sweep.csv"
    with long_path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["capacity", "rate", "repl_cost", "market", "revenue"])
        for r in rows:
            if "revenue" not in r:
                continue
            for market in REVENUE_ROWS:
                w.writerow([repr(r["capacity"]), repr(r["rate"]), repr(r["repl_cost"]), market,
                            repr(float(r["revenue"][market]))])
    pts_path = d / "sweep_points.csv"
    with pts_path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["capacity", "rate", "repl_cost", "segments", "status", "mip_gap", "profit",
                    "error"])
        for r in rows:
            gap = r.get("mip_gap")
            w.writerow([repr(r["capacity"]), repr(r["rate"]), repr(r["repl_cost"]), r["segments"],
                        r["status"], "" if gap is None else repr(float(gap)),
                        repr(float(r.get("profit", np.nan))), r.get("error", "")])
    return long_path, pts_path


def read_sweep(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return [{"capacity": float(r["capacity"]), "rate": float(r["rate"]),
                 "repl_cost": float(r["repl_cost"]), "market": r["market"],
                 "revenue": float(r["revenue"])} for r in csv.DictReader(fh)]
