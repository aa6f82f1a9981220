"""Command-line driver: validate, synth, clear, run, sweep, report.

Exit codes: 0 success, 1 validation failure, 2 solver failure,
3 partial sweep (some points failed).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bilevel import BilevelConfig, VerificationError, assemble_and_solve, verify_solution
from .bilevel.assemble import write_solution_csvs
from .clearing import Bids, MarketInfeasible, baseline_without_bess, build_llp, clear_market
from .model import OFFER_RATIOS, ScenarioError, load_scenario, save_scenario, validate_case
from .report import build_report
from .solver import SolverError
from .sweep import SweepGrid, run_sweep, write_sweep
from .synth import synthesize_scenario

EXIT_OK, EXIT_INVALID, EXIT_SOLVER, EXIT_PARTIAL = 0, 1, 2, 3


def _common(p: argparse.ArgumentParser, solver: bool = False) -> None:
    p.add_argument("--scenario", help="scenario manifest (default: synthesize the bundled one)")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--full", action="store_true", help="T=96, Z=45, K=16 instead of desk scale")
    if solver:
        p.add_argument("--gap", type=float, default=1e-3)
        p.add_argument("--time-limit", type=float, default=None)
        p.add_argument("--solver-cmd", default=None,
                       help="command template with {model} and {solution}; overrides BESS_SOLVER_CMD")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bessmarket",
                                 description="Price-maker battery bidding in joint energy, "
                                             "reserve and regulation markets.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a scenario")
    p.add_argument("--scenario", required=True)

    p = sub.add_parser("synth", help="write a synthetic scenario")
    _common(p)
    p.add_argument("--base", default=None, help="base-data manifest")
    p.add_argument("--rho-fixed", type=float, default=None,
                   help="use this mileage/capacity ratio in every interval")
    p.add_argument("--ratios", type=float, nargs=3, default=OFFER_RATIOS,
                   metavar=("RS", "RGC", "RGM"), help="ancillary offer ratios")

    p = sub.add_parser("clear", help="clear the market without the battery (or price-taker offers)")
    _common(p)
    p.add_argument("--price-taker", action="store_true",
                   help="battery offers full quantity at zero price")

    p = sub.add_parser("run", help="solve the bilevel model for one scenario")
    _common(p, solver=True)

    p = sub.add_parser("sweep", help="capacity x replacement-cost sweep")
    _common(p, solver=True)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--capacities", type=float, nargs="+", default=None)
    p.add_argument("--rates", type=float, nargs="+", default=None)
    p.add_argument("--costs", type=float, nargs="+", default=None)

    p = sub.add_parser("report", help="figure-ready tables from run/sweep output")
    p.add_argument("--out", default="out", help="directory written by run or sweep")
    return ap


def _case(args):
    if args.scenario:
        return load_scenario(args.scenario)
    return synthesize_scenario(full=args.full, seed=args.seed)


def _config(args) -> BilevelConfig:
    return BilevelConfig(gap=args.gap, time_limit=args.time_limit, solver_cmd=args.solver_cmd)


def cmd_validate(args) -> int:
    case = load_scenario(args.scenario, validate=False)
    bad = validate_case(case)
    for v in bad:
        print(v)
    if bad:
        return EXIT_INVALID
    print(f"{case.name}: ok ({len(case.buses)} buses, {len(case.generators)} generators, "
          f"{len(case.batteries)} batteries, T={case.grid.T}, Z={case.grid.Z})")
    return EXIT_OK


def cmd_synth(args) -> int:
    case = synthesize_scenario(args.base, full=args.full, seed=args.seed,
                               rho_fixed=args.rho_fixed, ratios=tuple(args.ratios))
    path = save_scenario(case, args.out)
    print(path)
    return EXIT_OK


def cmd_clear(args) -> int:
    case = _case(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.price_taker:
        res = clear_market(build_llp(case, Bids.full(case)))
    else:
        res = baseline_without_bess(case)
    res.to_csv(case, out / "market.csv")
    summary = {"objective": res.objective, "lmp": res.lmp.tolist(),
               "price_reserve": res.price_rs.tolist(), "price_reg_capacity": res.price_rgc.tolist(),
               "price_reg_mileage": res.price_rgm.tolist()}
    (out / "clearing.json").write_text(json.dumps(summary, indent=2))
    print(f"objective {res.objective:.6g}")
    return EXIT_OK


def cmd_run(args) -> int:
    case = _case(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_scenario(case, out / "scenario")
    sol = assemble_and_solve(case, _config(args))
    try:
        sol.diagnostics["verification"] = verify_solution(sol, case)
    except VerificationError as exc:
        sol.diagnostics["verification"] = {"error": str(exc)}
    base = baseline_without_bess(case)
    sol.to_json(out / "solution.json")
    write_solution_csvs(sol, case, out, base)
    for name, val in sol.revenue_table():
        print(f"{name:>14} {val:14.2f}")
    print(f"{'profit':>14} {sol.profit:14.2f}  ({sol.status}, gap {sol.mip_gap})")
    return EXIT_OK


def cmd_sweep(args) -> int:
    case = _case(args)
    kw = {}
    if args.capacities:
        kw["capacities"] = tuple(args.capacities)
        kw["rates"] = tuple(args.rates) if args.rates else tuple(c / 4 for c in args.capacities)
    if args.costs:
        kw["costs"] = tuple(args.costs)
    grid = SweepGrid(**kw)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_scenario(case, out / "scenario")

    def progress(row):
        print(f"{row['capacity']:7g} MWh {row['repl_cost']:9g} $/MWh  {row['status']}", flush=True)

    rows = run_sweep(case, grid, _config(args), args.workers, progress)
    write_sweep(rows, out)
    failed = sum(r["status"] == "failed" for r in rows)
    print(f"{len(rows) - failed}/{len(rows)} points solved")
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_report(args) -> int:
    summary = build_report(args.out)
    print(json.dumps(summary, indent=2))
    return EXIT_OK


COMMANDS = {"validate": cmd_validate, "synth": cmd_synth, "clear": cmd_clear, "run": cmd_run,
            "sweep": cmd_sweep, "report": cmd_report}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for v in exc.violations[1:]:
            print(f"  {v}", file=sys.stderr)
        return EXIT_INVALID
    except (SolverError, MarketInfeasible) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
