"""Stand-alone solver process: ``python -m bessmarket.solver.runner MODEL SOLUTION``.

Reads a free MPS file, solves it with HiGHS (through scipy) and writes a
solution in the generic ``name value`` format understood by
:func:`bessmarket.solver.external.parse_generic_solution`. LPs also get a
``[duals]`` section. This is the default external solver when no
``BESS_SOLVER_CMD`` is configured.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from .mps import read_mps
from .result import ERROR, INFEASIBLE, OPTIMAL, TIME_LIMIT, UNBOUNDED


def solve_arrays(model, gap=1e-3, time_limit=None):
    c, A, sense, rhs, lb, ub, integrality = model.arrays()
    if not integrality.any():
        g, l, e = sense == "G", sense == "L", sense == "E"
        from scipy import sparse
        A_ub = sparse.vstack([-A[g], A[l]]).tocsr()
        b_ub = np.concatenate([-rhs[g], rhs[l]])
        options = {"presolve": True}
        if time_limit:
            options["time_limit"] = float(time_limit)
        res = linprog(c, A_ub=A_ub if A_ub.shape[0] else None,
                      b_ub=b_ub if A_ub.shape[0] else None,
                      A_eq=A[e] if e.any() else None, b_eq=rhs[e] if e.any() else None,
                      bounds=list(zip(np.where(np.isfinite(lb), lb, None),
                                      np.where(np.isfinite(ub), ub, None))),
                      method="highs", options=options)
        status = {0: OPTIMAL, 1: TIME_LIMIT, 2: INFEASIBLE, 3: UNBOUNDED}.get(res.status, ERROR)
        duals = None
        if status == OPTIMAL:
            duals = np.zeros(len(sense))
            ng = int(g.sum())
            mub = res.ineqlin.marginals if A_ub.shape[0] else np.zeros(0)
            duals[np.nonzero(g)[0]] = -mub[:ng]
            duals[np.nonzero(l)[0]] = mub[ng:]
            if e.any():
                duals[np.nonzero(e)[0]] = res.eqlin.marginals
        x = res.x if status == OPTIMAL else None
        obj = float(res.fun) + model.obj_constant if x is not None else float("nan")
        return status, obj, x, duals, 0.0, res.message
    lo = np.where(sense == "L", -np.inf, rhs)
    hi = np.where(sense == "G", np.inf, rhs)
    options = {"mip_rel_gap": float(gap), "presolve": True}
    if time_limit:
        options["time_limit"] = float(time_limit)
    res = milp(c, constraints=LinearConstraint(A, lo, hi) if A.shape[0] else None,
               integrality=integrality.astype(int), bounds=Bounds(lb, ub), options=options)
    if res.status == 0:
        status = OPTIMAL
    elif res.status == 1:
        status = TIME_LIMIT
    elif res.status == 2:
        status = INFEASIBLE
    elif res.status == 3:
        status = UNBOUNDED
    else:
        status = ERROR
    x = res.x if res.x is not None else None
    obj = float(res.fun) + model.obj_constant if x is not None else float("nan")
    gap_out = getattr(res, "mip_gap", None)
    return status, obj, x, None, gap_out, res.message


def write_generic_solution(path, model, status, obj, x, duals, gap=None):
    lines = [f"status {status}", f"objective {obj!r}"]
    if gap is not None:
        lines.append(f"gap {float(gap)!r}")
    if x is not None:
        lines.append("[columns]")
        lines.extend(f"{n} {float(v)!r}" for n, v in zip(model.col_names, x))
    if duals is not None:
        lines.append("[duals]")
        lines.extend(f"{n} {float(v)!r}" for n, v in zip(model.row_names, duals))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="bessmarket.solver.runner")
    ap.add_argument("model")
    ap.add_argument("solution")
    ap.add_argument("--gap", type=float, default=1e-3)
    ap.add_argument("--time-limit", type=float, default=None)
    args = ap.parse_args(argv)
    model, indicators = read_mps(args.model)
    if indicators:
        print("indicator constraints are not supported by this runner", file=sys.stderr)
        return 4
    status, obj, x, duals, gap, message = solve_arrays(model, args.gap, args.time_limit)
    write_generic_solution(args.solution, model, status, obj, x, duals, gap)
    print(f"{status}: {message}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
