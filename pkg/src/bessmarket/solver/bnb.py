"""Depth-first branch-and-bound over reference-simplex relaxations.

A micro-MILP oracle: no presolve, no cuts, branching on the most
fractional integer column. Kept small on purpose.
"""

from __future__ import annotations

import math

import numpy as np

from ..lp import LinearModel
from .result import INFEASIBLE, OPTIMAL, UNBOUNDED, SolveResult
from .simplex import reference_simplex

MAX_INTEGERS = 30
INT_TOL = 1e-7


def reference_bnb(model: LinearModel, gap: float = 0.0,
                  max_integers: int = MAX_INTEGERS) -> SolveResult:
    ints = [j for j, f in enumerate(model.integer) if f]
    if len(ints) > max_integers:
        raise ValueError(f"reference_bnb size guard: {len(ints)} integer columns > {max_integers}")
    base = model.relaxed()
    best_x, best_obj = None, math.inf
    stack = [(list(base.lb), list(base.ub))]
    nodes = 0
    while stack:
        lb, ub = stack.pop()
        nodes += 1
        sub = base.copy()
        sub.lb, sub.ub = lb, ub
        res = reference_simplex(sub)
        if res.status == INFEASIBLE:
            continue
        if res.status == UNBOUNDED:
            return SolveResult(UNBOUNDED, log=f"nodes={nodes}")
        if res.objective >= best_obj - gap * max(1.0, abs(best_obj)) - 1e-9:
            continue
        frac = [(abs(res.x[j] - round(res.x[j])), j) for j in ints]
        worst, j = max(frac, default=(0.0, -1))
        if worst <= INT_TOL:
            x = res.x.copy()
            for k in ints:
                x[k] = round(x[k])
            best_x, best_obj = x, res.objective
            continue
        v = res.x[j]
        down = (list(lb), list(ub))
        down[1][j] = math.floor(v)
        up = (list(lb), list(ub))
        up[0][j] = math.ceil(v)
        # explore the nearer side first
        if v - math.floor(v) < 0.5:
            stack.extend([up, down])
        else:
            stack.extend([down, up])
    if best_x is None:
        return SolveResult(INFEASIBLE, log=f"nodes={nodes}")
    return SolveResult(OPTIMAL, best_obj, np.asarray(best_x), log=f"nodes={nodes}")
