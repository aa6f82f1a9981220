"""Big-M complementarity and the linear revenue surrogate.

Big-M rules, per inequality row ``s_r = A_r x - b_r >= 0`` with dual ``y_r``:

* ``M_s`` is the upper end of ``s_r`` under interval arithmetic over the
  implied column bounds below and ``Q in [0, P^Rate]`` for parametric
  right-hand sides.
* column bounds: generator energy ``[P^Min, P^Max]``, reserve and
  regulation capacity ``[0, min(ramp, P^Max)]``, mileage ``[0, m * ub(RgC)]``;
  battery energy ``[-P^Rate, P^Rate]``, capacities ``[0, P^Rate]``,
  mileage ``[0, m * P^Rate]``; bus angles within the shortest-path
  distance from the reference bus, each line weighted ``TL / H``.
* ``M_y`` is one bound for every dual: ``dt * (1 + max m) *
  (max(|floor|, |cap|) + max alpha) * scale``. Duals found at this bound
  after a solve are reported.
* a row whose slack is always zero needs no binary (dual left free in
  ``[0, M_y]``); a row whose slack is always positive gets ``y_r = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import dijkstra

from ..clearing import LpModel
from ..lp import LinearModel
from .kkt import KktError, KktSystem

TOL = 1e-9


def column_bounds(llp: LpModel) -> tuple[np.ndarray, np.ndarray]:
    case = llp.case
    n = llp.lp.n_cols
    lo, hi = np.full(n, -np.inf), np.full(n, np.inf)
    for t in range(case.grid.T):
        m = llp.m[t]
        for j, g in enumerate(case.generators):
            S, Rs, RgC, RgM = llp.gen_cols[j, t]
            lo[S], hi[S] = g.pmin, g.pmax
            lo[Rs], hi[Rs] = 0.0, min(g.rs_ramp, g.pmax)
            lo[RgC], hi[RgC] = 0.0, min(g.rg_ramp, g.pmax)
            lo[RgM], hi[RgM] = 0.0, m * hi[RgC]
        for i, b in enumerate(case.batteries):
            E, Rs, RgC, RgM = llp.bat_cols[i, t]
            lo[E], hi[E] = -b.rate, b.rate
            lo[Rs], hi[Rs] = 0.0, b.rate
            lo[RgC], hi[RgC] = 0.0, b.rate
            lo[RgM], hi[RgM] = 0.0, m * b.rate
    dist = angle_bounds(case)
    for nb in range(len(case.buses)):
        for t in range(case.grid.T):
            col = llp.theta_cols[nb, t]
            if col >= 0:
                lo[col], hi[col] = -dist[nb], dist[nb]
    return lo, hi


def angle_bounds(case) -> np.ndarray:
    """Largest |theta_n| reachable when every line respects its limit."""
    N = len(case.buses)
    bidx = case.bus_index
    w = np.zeros((N, N))
    for ln in case.lines:
        a, b = bidx[ln.from_bus], bidx[ln.to_bus]
        d = ln.limit_mw / ln.susceptance
        # parallel lines: the tighter one binds
        cur = w[a, b]
        w[a, b] = w[b, a] = d if cur == 0 else min(cur, d)
    return dijkstra(w, directed=False, indices=bidx[case.reference_bus])


def slack_bounds(kkt: KktSystem, lo, hi) -> tuple[np.ndarray, np.ndarray]:
    A = kkt.A.tocoo()
    pos = A.data > 0
    act_lo = np.zeros(A.shape[0])
    act_hi = np.zeros(A.shape[0])
    np.add.at(act_lo, A.row, np.where(pos, A.data * lo[A.col], A.data * hi[A.col]))
    np.add.at(act_hi, A.row, np.where(pos, A.data * hi[A.col], A.data * lo[A.col]))
    b_lo, b_hi = kkt.b0.copy(), kkt.b0.copy()
    rates = [b.rate for b in kkt.llp.case.batteries]
    for row, i, t, k, coef in kkt.llp.rhs_links:
        span = coef * rates[i]
        b_lo[row] += min(0.0, span)
        b_hi[row] += max(0.0, span)
    return act_lo - b_hi, act_hi - b_lo


def dual_bound(llp: LpModel, scale: float = 2.0) -> float:
    case = llp.case
    alpha = float(case.offers.max(initial=0.0))
    beta = max(abs(case.price_floor), abs(case.price_cap))
    return case.grid.dt * (1.0 + float(np.max(llp.m))) * (beta + alpha) * scale


@dataclass
class ComplementarityPair:
    row: int
    mode: str            # "bigm", "indicator", "slack_zero" or "dual_zero"
    binary: int | None   # MILP column of u
    m_dual: float
    m_slack: float


def add_kkt_rows(milp: LinearModel, kkt: KktSystem, x_cols, y_cols, q_cols, beta_cols) -> None:
    """Primal feasibility and stationarity rows of the LLP inside the MILP."""
    llp = kkt.llp
    A = kkt.A
    q_of_row = {row: (i, t, k, coef) for row, i, t, k, coef in llp.rhs_links}
    for r in range(A.shape[0]):
        lo_, hi_ = A.indptr[r], A.indptr[r + 1]
        terms = [(x_cols[c], v) for c, v in zip(A.indices[lo_:hi_], A.data[lo_:hi_])]
        if r in q_of_row:
            i, t, k, coef = q_of_row[r]
            terms.append((q_cols[i, t, k], -coef))
        milp.add_row(f"p:{llp.lp.row_names[r]}", terms, kkt.sense[r], kkt.b0[r])
    AT = A.T.tocsr()
    beta_of_col = {col: (i, t, k, scale) for col, i, t, k, scale in llp.cost_links}
    for j in range(AT.shape[0]):
        lo_, hi_ = AT.indptr[j], AT.indptr[j + 1]
        terms = [(y_cols[r], v) for r, v in zip(AT.indices[lo_:hi_], AT.data[lo_:hi_])]
        if j in beta_of_col:
            i, t, k, scale = beta_of_col[j]
            terms.append((beta_cols[i, t, k], -scale))
        milp.add_row(f"d:{llp.lp.col_names[j]}", terms, "E", kkt.c0[j])


def linearize_complementarity(milp: LinearModel, kkt: KktSystem, x_cols, y_cols, q_cols,
                              m_dual: float, lo, hi, mode: str = "bigm"):
    """Add ``y <= M_y u`` and ``s <= M_s (1 - u)`` per inequality row.

    With ``mode="indicator"`` the two rows are instead returned as
    indicator constraints (``u = 0 -> y <= 0``, ``u = 1 -> s <= 0``).
    Returns ``(pairs, indicators)``.
    """
    if mode not in ("bigm", "indicator"):
        raise ValueError(f"unknown complementarity mode {mode!r}")
    s_lo, s_hi = slack_bounds(kkt, lo, hi)
    llp = kkt.llp
    A = kkt.A
    q_of_row = {row: (i, t, k, coef) for row, i, t, k, coef in llp.rhs_links}
    pairs, indicators = [], []
    for r in kkt.ineq_rows:
        name = llp.lp.row_names[r]
        if not np.isfinite(s_hi[r]):
            raise KktError(f"unbounded slack on row {name}")
        if s_hi[r] <= TOL:
            pairs.append(ComplementarityPair(int(r), "slack_zero", None, m_dual, 0.0))
            continue
        if s_lo[r] > TOL:
            milp.ub[y_cols[r]] = 0.0
            pairs.append(ComplementarityPair(int(r), "dual_zero", None, 0.0, float(s_hi[r])))
            continue
        u = milp.add_binary(f"u:{name}")
        lo_, hi_ = A.indptr[r], A.indptr[r + 1]
        terms = [(x_cols[c], v) for c, v in zip(A.indices[lo_:hi_], A.data[lo_:hi_])]
        if r in q_of_row:
            i, t, k, coef = q_of_row[r]
            terms.append((q_cols[i, t, k], -coef))
        if mode == "bigm":
            milp.add_row(f"cy:{name}", [(y_cols[r], 1.0), (u, -m_dual)], "L", 0.0)
            milp.add_row(f"cs:{name}", terms + [(u, float(s_hi[r]))], "L",
                         kkt.b0[r] + float(s_hi[r]))
        else:
            ry = milp.add_row(f"cy:{name}", [(y_cols[r], 1.0)], "L", 0.0)
            rs = milp.add_row(f"cs:{name}", terms, "L", kkt.b0[r])
            indicators += [(milp.row_names[ry], milp.col_names[u], 0),
                           (milp.row_names[rs], milp.col_names[u], 1)]
        pairs.append(ComplementarityPair(int(r), mode, u, m_dual, float(s_hi[r])))
    return pairs, indicators


@dataclass
class SurrogateRevenue:
    """Battery market revenue as ``b0'y - c0'x`` (LLP index spaces)."""
    coef_x: np.ndarray
    coef_y: np.ndarray

    def value(self, x, y) -> float:
        return float(self.coef_y @ y + self.coef_x @ x)


def linearize_objective(kkt: KktSystem) -> SurrogateRevenue:
    """Revenue identity from stationarity, complementarity and strong duality.

    It is exact only when battery columns touch nothing but market rows and
    battery box rows, box rows hold only battery columns, and bid
    quantities appear only on box rows; anything else would leave a
    product of a dual and a bid, so it is rejected.
    """
    llp = kkt.llp
    bat_cols = {col for col, *_ in llp.cost_links}
    box = set(llp.battery_box_rows)
    market = set(int(r) for r in llp.market_rows)
    A = kkt.A.tocsc()
    for j in bat_cols:
        rows = A.indices[A.indptr[j]:A.indptr[j + 1]]
        stray = [r for r in rows if r not in box and r not in market]
        if stray:
            raise KktError(f"residual bilinear term detected: battery column "
                           f"{llp.lp.col_names[j]} in row {llp.lp.row_names[stray[0]]}")
    Ar = kkt.A
    for r in box:
        cols = Ar.indices[Ar.indptr[r]:Ar.indptr[r + 1]]
        if any(c not in bat_cols for c in cols):
            raise KktError(f"residual bilinear term detected: box row {llp.lp.row_names[r]} "
                           f"holds a non-battery column")
    for row, *_ in llp.rhs_links:
        if row not in box:
            raise KktError(f"residual bilinear term detected: bid quantity on row "
                           f"{llp.lp.row_names[row]}")
    return SurrogateRevenue(-kkt.c0.copy(), kkt.b0.copy())
