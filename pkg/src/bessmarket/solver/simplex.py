"""Dense two-phase tableau simplex with Bland's rule.

Only meant as an oracle for desk-scale LPs (a few hundred rows); it is
slow but easy to audit. Row duals are recovered from the optimal basis by
solving ``B^T y = c_B``; their sign follows ``d objective / d rhs`` of the
original (minimisation) model, so ``>=`` rows carry non-negative duals.
"""

from __future__ import annotations

import numpy as np

from ..lp import LinearModel
from .result import INFEASIBLE, OPTIMAL, UNBOUNDED, SolveResult

TOL = 1e-9
MAX_COLS = 4000


def _standard_form(model: LinearModel):
    c, A, sense, rhs, lb, ub, _ = model.arrays()
    A = A.toarray()
    m, n = A.shape
    # column map: original x_j = shift_j + sum(coef * z_k)
    zcols: list[list[tuple[int, float]]] = []
    shift = np.zeros(n)
    cols, costs = [], []
    extra_rows = []  # (z index, cap)
    for j in range(n):
        lo, hi = lb[j], ub[j]
        if np.isfinite(lo):
            shift[j] = lo
            k = len(cols)
            cols.append(A[:, j])
            costs.append(c[j])
            zcols.append([(k, 1.0)])
            if np.isfinite(hi):
                extra_rows.append((k, hi - lo))
        elif np.isfinite(hi):
            shift[j] = hi
            k = len(cols)
            cols.append(-A[:, j])
            costs.append(-c[j])
            zcols.append([(k, -1.0)])
        else:
            k = len(cols)
            cols.append(A[:, j])
            cols.append(-A[:, j])
            costs.extend([c[j], -c[j]])
            zcols.append([(k, 1.0), (k + 1, -1.0)])
    nz = len(cols)
    Az = np.column_stack(cols) if cols else np.zeros((m, 0))
    b = rhs - A @ shift
    # bound rows z_k <= cap
    rows = [Az[i] for i in range(m)]
    senses = list(sense)
    bvec = list(b)
    for k, cap in extra_rows:
        r = np.zeros(nz)
        r[k] = 1.0
        rows.append(r)
        senses.append("L")
        bvec.append(cap)
    M = np.array(rows) if rows else np.zeros((0, nz))
    bvec = np.array(bvec, dtype=float)
    # slacks
    n_slack = sum(1 for s in senses if s != "E")
    S = np.zeros((len(senses), n_slack))
    k = 0
    for i, s in enumerate(senses):
        if s == "G":
            S[i, k] = -1.0
            k += 1
        elif s == "L":
            S[i, k] = 1.0
            k += 1
    full = np.hstack([M, S])
    cost = np.concatenate([np.asarray(costs, dtype=float), np.zeros(n_slack)])
    flip = np.where(bvec < 0, -1.0, 1.0)
    full = full * flip[:, None]
    bvec = bvec * flip
    return full, bvec, cost, flip, zcols, shift, nz, m


def _pivot(T, r, k):
    T[r] /= T[r, k]
    col = T[:, k].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])


def _run(T, basis, n_allowed, max_iter):
    """Minimise the objective held in the last row of tableau T (reduced
    costs in T[-1, :-1], negated objective in T[-1, -1])."""
    m = T.shape[0] - 1
    for _ in range(max_iter):
        red = T[-1, :n_allowed]
        entering = np.nonzero(red < -TOL)[0]
        if entering.size == 0:
            return OPTIMAL
        k = int(entering[0])
        colk = T[:m, k]
        pos = np.nonzero(colk > TOL)[0]
        if pos.size == 0:
            return UNBOUNDED
        ratios = T[pos, -1] / colk[pos]
        best = ratios.min()
        ties = pos[np.abs(ratios - best) <= TOL * max(1.0, abs(best))]
        r = int(min(ties, key=lambda i: basis[i]))
        _pivot(T, r, k)
        basis[r] = k
    raise RuntimeError("simplex iteration limit reached")


def reference_simplex(model: LinearModel, max_iter: int = 200000) -> SolveResult:
    """Solve an LP exactly enough to serve as an oracle; returns primal
    values and row duals."""
    if model.n_integer:
        raise ValueError("reference_simplex solves LPs only")
    if model.n_cols > MAX_COLS:
        raise ValueError(f"model too large for reference simplex ({model.n_cols} columns)")
    full, b, cost, flip, zcols, shift, nz, m_orig = _standard_form(model)
    m, n = full.shape
    # phase 1 with one artificial per row
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = full
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, :n] = -full.sum(axis=0)
    T[-1, -1] = -b.sum()
    basis = list(range(n, n + m))
    _run(T, basis, n + m, max_iter)
    if -T[-1, -1] > 1e-7 * max(1.0, np.abs(b).max(initial=0.0)):
        return SolveResult(INFEASIBLE)
    # drive artificials out of the basis
    keep = np.ones(m, dtype=bool)
    for r in range(m):
        if basis[r] >= n:
            nonzero = np.nonzero(np.abs(T[r, :n]) > TOL)[0]
            if nonzero.size:
                k = int(nonzero[0])
                _pivot(T, r, k)
                basis[r] = k
            else:
                keep[r] = False
    rows_kept = np.nonzero(keep)[0]
    T2 = np.zeros((rows_kept.size + 1, n + 1))
    T2[:-1, :n] = T[rows_kept, :n]
    T2[:-1, -1] = T[rows_kept, -1]
    basis2 = [basis[r] for r in rows_kept]
    T2[-1, :n] = cost
    for i, k in enumerate(basis2):
        T2[-1] -= cost[k] * T2[i]
    status = _run(T2, basis2, n, max_iter)
    if status == UNBOUNDED:
        return SolveResult(UNBOUNDED)
    z = np.zeros(n)
    for i, k in enumerate(basis2):
        z[k] = T2[i, -1]
    x = shift.copy()
    for j, parts in enumerate(zcols):
        for k, coef in parts:
            x[j] += coef * z[k]
    # duals from B^T y = c_B on the kept rows of the standard form
    B = full[np.ix_(rows_kept, basis2)]
    y_kept = np.linalg.solve(B.T, cost[basis2]) if basis2 else np.zeros(0)
    y = np.zeros(m)
    y[rows_kept] = y_kept
    y = y * flip
    duals = y[:m_orig]
    obj = float(np.dot(model.cost, x)) + model.obj_constant
    return SolveResult(OPTIMAL, obj, x, duals)
