"""Joint energy / reserve / regulation market clearing (the ISO's LP).

Every bound is written as an explicit ``>=`` row so that the dual vector
covers all constraints uniformly; only the nodal balance rows are
equalities. Battery bids enter linearly: price offers in the cost vector,
quantity offers on the right-hand side of the battery box rows. Both
links are recorded so the bilevel builder can swap them for upper-level
variables.

The objective is scaled by the interval length, so a row dual is
``interval_hours`` times the corresponding price in $/MWh.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .agc import multipliers
from .lp import INF, LinearModel
from .model import PRODUCTS, ScenarioCase

ENERGY, RESERVE, REG_CAP, REG_MIL = range(4)


class MarketInfeasible(RuntimeError):
    pass


@dataclass
class Bids:
    """Battery offers: quantities ``q`` (B, T, 3) for energy magnitude,
    reserve and regulation capacity; prices ``beta`` (B, T, 4)."""
    q: np.ndarray
    beta: np.ndarray

    @classmethod
    def zero(cls, case: ScenarioCase) -> "Bids":
        B, T = len(case.batteries), case.grid.T
        return cls(np.zeros((B, T, 3)), np.zeros((B, T, 4)))

    @classmethod
    def full(cls, case: ScenarioCase, price: float = 0.0) -> "Bids":
        B, T = len(case.batteries), case.grid.T
        q = np.zeros((B, T, 3))
        for i, b in enumerate(case.batteries):
            q[i] = b.rate
        return cls(q, np.full((B, T, 4), float(price)))


@dataclass
class LpModel:
    case: ScenarioCase
    lp: LinearModel
    m: np.ndarray                       # (T,) mileage multipliers
    gen_cols: np.ndarray                # (G, T, 4)
    bat_cols: np.ndarray                # (B, T, 4)
    theta_cols: np.ndarray              # (N, T), -1 at the reference bus
    balance_rows: np.ndarray            # (N, T)
    req_rows: np.ndarray                # (T, 3), -1 where the requirement is zero
    line_rows: np.ndarray               # (L, T, 2)
    c0: np.ndarray                      # cost without battery price offers
    b0: np.ndarray                      # rhs without battery quantity offers
    cost_links: list = field(default_factory=list)   # (col, i, t, product, scale)
    rhs_links: list = field(default_factory=list)    # (row, i, t, product, coef)
    family: list = field(default_factory=list)       # constraint label per row
    battery_box_rows: list = field(default_factory=list)

    @property
    def market_rows(self) -> np.ndarray:
        rows = list(self.balance_rows.ravel()) + [r for r in self.req_rows.ravel() if r >= 0]
        return np.array(sorted(rows), dtype=int)

    def apply_bids(self, bids: Bids) -> None:
        """Write numeric bid values into the cost and rhs vectors."""
        c = self.c0.copy()
        b = self.b0.copy()
        for col, i, t, k, scale in self.cost_links:
            c[col] += scale * bids.beta[i, t, k]
        for row, i, t, k, coef in self.rhs_links:
            b[row] += coef * bids.q[i, t, k]
        self.lp.cost = list(c)
        self.lp.rhs = list(b)


def build_llp(case: ScenarioCase, bids: Bids | None = None, m=None) -> LpModel:
    grid = case.grid
    T, dt = grid.T, grid.dt
    G, B, N = len(case.generators), len(case.batteries), len(case.buses)
    if bids is None:
        bids = Bids.zero(case)
    if bids.q.shape != (B, T, 3) or bids.beta.shape != (B, T, 4):
        raise ValueError("bid arrays do not match the case dimensions")
    if m is None:
        m = multipliers(case.agc, case.profiles.rgm)
    m = np.asarray(m, dtype=float)
    if m.shape != (T,):
        raise ValueError("need one mileage multiplier per interval")
    bidx = case.bus_index
    ref = bidx[case.reference_bus]
    lp = LinearModel("llp")
    gen_cols = np.zeros((G, T, 4), dtype=int)
    bat_cols = np.zeros((B, T, 4), dtype=int)
    theta_cols = np.full((N, T), -1, dtype=int)
    cost_links, rhs_links, family, box_rows = [], [], [], []
    tags = ("S", "Rs", "RgC", "RgM")
    for t in range(T):
        for j in range(G):
            for k in range(4):
                gen_cols[j, t, k] = lp.add_var(f"g{j}_{tags[k]}_t{t}", -INF, INF,
                                               dt * case.offers[j, t, k])
        for i in range(B):
            for k in range(4):
                col = lp.add_var(f"b{i}_{tags[k] if k else 'E'}_t{t}", -INF, INF, 0.0)
                bat_cols[i, t, k] = col
                cost_links.append((col, i, t, k, dt))
        for n, bus in enumerate(case.buses):
            if n != ref:
                theta_cols[n, t] = lp.add_var(f"th{bus}_t{t}", -INF, INF, 0.0)

    def row(name, terms, sense, rhs, fam):
        r = lp.add_row(name, terms, sense, rhs)
        family.append(fam)
        return r

    balance_rows = np.zeros((N, T), dtype=int)
    req_rows = np.full((T, 3), -1, dtype=int)
    line_rows = np.zeros((len(case.lines), T, 2), dtype=int)
    p = case.profiles
    for t in range(T):
        for j, g in enumerate(case.generators):
            S, Rs, RgC, RgM = gen_cols[j, t]
            row(f"gen_min_g{j}_t{t}", [(S, 1), (RgC, -1)], "G", g.pmin, "gen_min")
            row(f"gen_max_g{j}_t{t}", [(S, -1), (Rs, -1), (RgC, -1)], "G", -g.pmax, "gen_max")
            row(f"gen_rs_lo_g{j}_t{t}", [(Rs, 1)], "G", 0.0, "gen_rs_lo")
            row(f"gen_rs_hi_g{j}_t{t}", [(Rs, -1)], "G", -g.rs_ramp, "gen_rs_hi")
            row(f"gen_rgc_lo_g{j}_t{t}", [(RgC, 1)], "G", 0.0, "gen_rgc_lo")
            row(f"gen_rgc_hi_g{j}_t{t}", [(RgC, -1)], "G", -g.rg_ramp, "gen_rgc_hi")
            row(f"gen_mil_lo_g{j}_t{t}", [(RgM, 1), (RgC, -1)], "G", 0.0, "gen_mil_lo")
            row(f"gen_mil_hi_g{j}_t{t}", [(RgC, m[t]), (RgM, -1)], "G", 0.0, "gen_mil_hi")
        for i in range(B):
            E, Rs, RgC, RgM = bat_cols[i, t]
            r = row(f"bat_e_lo_b{i}_t{t}", [(E, 1)], "G", 0.0, "bat_e_lo")
            rhs_links.append((r, i, t, 0, -1.0))
            box_rows.append(r)
            r = row(f"bat_e_hi_b{i}_t{t}", [(E, -1)], "G", 0.0, "bat_e_hi")
            rhs_links.append((r, i, t, 0, -1.0))
            box_rows.append(r)
            box_rows.append(row(f"bat_rs_lo_b{i}_t{t}", [(Rs, 1)], "G", 0.0, "bat_rs_lo"))
            r = row(f"bat_rs_hi_b{i}_t{t}", [(Rs, -1)], "G", 0.0, "bat_rs_hi")
            rhs_links.append((r, i, t, 1, -1.0))
            box_rows.append(r)
            box_rows.append(row(f"bat_rgc_lo_b{i}_t{t}", [(RgC, 1)], "G", 0.0, "bat_rgc_lo"))
            r = row(f"bat_rgc_hi_b{i}_t{t}", [(RgC, -1)], "G", 0.0, "bat_rgc_hi")
            rhs_links.append((r, i, t, 2, -1.0))
            box_rows.append(r)
            box_rows.append(row(f"bat_mil_lo_b{i}_t{t}", [(RgM, 1), (RgC, -1)], "G", 0.0, "bat_mil_lo"))
            box_rows.append(row(f"bat_mil_hi_b{i}_t{t}", [(RgC, m[t]), (RgM, -1)], "G", 0.0, "bat_mil_hi"))
        # a zero requirement row is implied by non-negativity, so it is left out
        for k, (req, fam) in enumerate(((p.rs[t], "req_rs"), (p.rgc[t], "req_rgc"), (p.rgm[t], "req_rgm"))):
            if req > 0:
                terms = [(gen_cols[j, t, k + 1], 1) for j in range(G)]
                terms += [(bat_cols[i, t, k + 1], 1) for i in range(B)]
                req_rows[t, k] = row(f"{fam}_t{t}", terms, "G", req, fam)
        flows: dict[int, dict[int, float]] = {n: {} for n in range(N)}
        for ln in case.lines:
            a, b = bidx[ln.from_bus], bidx[ln.to_bus]
            # injection out of a towards b: H (theta_a - theta_b)
            for n, sgn in ((a, 1.0), (b, -1.0)):
                for w, s2 in ((a, 1.0), (b, -1.0)):
                    col = theta_cols[w, t]
                    if col >= 0:
                        flows[n][col] = flows[n].get(col, 0.0) + sgn * s2 * ln.susceptance
        for n, bus in enumerate(case.buses):
            terms = [(gen_cols[j, t, 0], 1.0) for j, g in enumerate(case.generators) if g.bus == bus]
            terms += [(bat_cols[i, t, 0], 1.0) for i, b in enumerate(case.batteries) if b.bus == bus]
            terms += [(col, -v) for col, v in flows[n].items()]
            balance_rows[n, t] = row(f"balance_n{bus}_t{t}", terms, "E", p.load[n, t], "balance")
        for l, ln in enumerate(case.lines):
            a, b = bidx[ln.from_bus], bidx[ln.to_bus]
            terms = [(c, s * ln.susceptance) for c, s in ((theta_cols[a, t], 1.0), (theta_cols[b, t], -1.0)) if c >= 0]
            line_rows[l, t, 0] = row(f"flow_lo_l{l}_t{t}", terms, "G", -ln.limit_mw, "flow_lo")
            line_rows[l, t, 1] = row(f"flow_hi_l{l}_t{t}", [(c, -v) for c, v in terms], "G",
                                     -ln.limit_mw, "flow_hi")
    model = LpModel(case, lp, m, gen_cols, bat_cols, theta_cols, balance_rows, req_rows,
                    line_rows, np.asarray(lp.cost, dtype=float), np.asarray(lp.rhs, dtype=float),
                    cost_links, rhs_links, family, box_rows)
    model.apply_bids(bids)
    return model


@dataclass
class MarketOutcome:
    gen: np.ndarray          # (G, T, 4) MW
    bat: np.ndarray          # (B, T, 4) MW
    theta: np.ndarray        # (N, T) rad
    lmp: np.ndarray          # (N, T) $/MWh
    price_rs: np.ndarray     # (T,) $/MW
    price_rgc: np.ndarray
    price_rgm: np.ndarray
    objective: float
    x: np.ndarray
    y: np.ndarray
    cs_residual: float = 0.0

    def battery_prices(self, case: ScenarioCase) -> np.ndarray:
        """(B, T, 4) prices faced by each battery."""
        bidx = case.bus_index
        out = np.zeros((len(case.batteries), case.grid.T, 4))
        for i, b in enumerate(case.batteries):
            out[i, :, 0] = self.lmp[bidx[b.bus]]
            out[i, :, 1] = self.price_rs
            out[i, :, 2] = self.price_rgc
            out[i, :, 3] = self.price_rgm
        return out

    def battery_revenue(self, case: ScenarioCase) -> np.ndarray:
        """(B, T, 4) dollars earned per product."""
        return self.battery_prices(case) * self.bat * case.grid.dt

    def generator_prices(self, case: ScenarioCase) -> np.ndarray:
        bidx = case.bus_index
        out = np.zeros((len(case.generators), case.grid.T, 4))
        for j, g in enumerate(case.generators):
            out[j, :, 0] = self.lmp[bidx[g.bus]]
            out[j, :, 1] = self.price_rs
            out[j, :, 2] = self.price_rgc
            out[j, :, 3] = self.price_rgm
        return out

    def to_csv(self, case: ScenarioCase, path) -> None:
        """Long format: entity, product, t, mw, price."""
        gp, bp = self.generator_prices(case), self.battery_prices(case)
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["entity", "product", "t", "mw", "price"])
            for j in range(len(case.generators)):
                for t in range(case.grid.T):
                    for k in range(4):
                        w.writerow([f"gen{j + 1}", PRODUCTS[k], t + 1,
                                    repr(float(self.gen[j, t, k])), repr(float(gp[j, t, k]))])
            for i in range(len(case.batteries)):
                for t in range(case.grid.T):
                    for k in range(4):
                        w.writerow([f"battery{i + 1}", PRODUCTS[k], t + 1,
                                    repr(float(self.bat[i, t, k])), repr(float(bp[i, t, k]))])


def outcome_from_vectors(model: LpModel, x, y, objective=None) -> MarketOutcome:
    """Map raw primal/dual vectors of the LLP onto a MarketOutcome."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dt = model.case.grid.dt
    theta = np.zeros(model.theta_cols.shape)
    mask = model.theta_cols >= 0
    theta[mask] = x[model.theta_cols[mask]]

    def req_price(k):
        rows = model.req_rows[:, k]
        return np.where(rows >= 0, y[np.maximum(rows, 0)], 0.0) / dt

    obj = float(np.dot(model.lp.cost, x)) if objective is None else objective
    return MarketOutcome(
        gen=x[model.gen_cols], bat=x[model.bat_cols], theta=theta,
        lmp=y[model.balance_rows] / dt, price_rs=req_price(0), price_rgc=req_price(1),
        price_rgm=req_price(2), objective=obj, x=x, y=y,
        cs_residual=complementarity_residual(model, x, y))


def complementarity_residual(model: LpModel, x, y) -> float:
    """max |dual * slack| over inequality rows, relative to the objective scale."""
    act = model.lp.row_activity(x)
    slack = act - np.asarray(model.lp.rhs)
    ineq = np.asarray(model.lp.sense) == "G"
    if not ineq.any():
        return 0.0
    return float(np.max(np.abs(y[ineq] * slack[ineq])))


def _infeasibility_hint(model: LpModel) -> str:
    case = model.case
    p = case.profiles
    b = np.asarray(model.lp.rhs)
    for t in range(case.grid.T):
        rs_cap = sum(min(g.rs_ramp, g.pmax - g.pmin) for g in case.generators)
        rg_cap = sum(min(g.rg_ramp, g.pmax - g.pmin) for g in case.generators)
        q_rs = q_rg = 0.0
        for row, i, tt, k, coef in model.rhs_links:
            if tt == t and k == 1 and model.family[row] == "bat_rs_hi":
                q_rs += -b[row]
            if tt == t and k == 2 and model.family[row] == "bat_rgc_hi":
                q_rg += -b[row]
        if p.rs[t] > rs_cap + q_rs + 1e-9:
            return f"reserve requirement at interval {t + 1} exceeds available reserve"
        if p.rgc[t] > rg_cap + q_rg + 1e-9:
            return f"regulation capacity requirement at interval {t + 1} exceeds available capacity"
        if p.rgm[t] > model.m[t] * (rg_cap + q_rg) + 1e-9:
            return f"regulation mileage requirement at interval {t + 1} exceeds m * capacity"
        if p.total_load[t] + p.rs[t] + p.rgc[t] > sum(g.pmax for g in case.generators) + \
                sum(bt.rate for bt in case.batteries) + 1e-9:
            return f"energy plus reserve need at interval {t + 1} exceeds installed capacity"
    return "no single requirement row explains the infeasibility (check line limits)"


def clear_market(model: LpModel, solver: str = "highs", command_template=None) -> MarketOutcome:
    """Solve the LLP and return schedules and prices.

    ``solver`` is ``"highs"`` (in-process scipy/HiGHS), ``"reference"``
    (the embedded dense simplex) or ``"external"`` (file-based process).
    """
    if solver == "highs":
        from .solver.runner import solve_arrays
        status, obj, x, y, _, msg = solve_arrays(model.lp)
    elif solver == "reference":
        from .solver.simplex import reference_simplex
        res = reference_simplex(model.lp)
        status, obj, x, y, msg = res.status, res.objective, res.x, res.duals, ""
    elif solver == "external":
        from .solver.external import run_external
        from .solver.result import SolveRequest
        res = run_external(SolveRequest(model.lp), command_template)
        status, obj, x, y, msg = res.status, res.objective, res.x, res.duals, res.log
    else:
        raise ValueError(f"unknown solver {solver!r}")
    if status != "optimal":
        raise MarketInfeasible(f"market clearing {status}: {_infeasibility_hint(model)}")
    if y is None:
        raise MarketInfeasible("solver returned no duals")
    return outcome_from_vectors(model, x, y, obj)


def baseline_without_bess(case: ScenarioCase, solver: str = "highs") -> MarketOutcome:
    return clear_market(build_llp(case, Bids.zero(case)), solver)


def system_costs(case: ScenarioCase, outcome: MarketOutcome, bids: Bids | None = None) -> dict:
    """Per-market offer cost and clearing payments (price x cleared MW x dt)."""
    dt = case.grid.dt
    out = {}
    gp = outcome.generator_prices(case)
    bp = outcome.battery_prices(case)
    for k, name in enumerate(PRODUCTS):
        cost = float((case.offers[..., k] * outcome.gen[..., k]).sum() * dt)
        if bids is not None:
            cost += float((bids.beta[..., k] * outcome.bat[..., k]).sum() * dt)
        pay = float((gp[..., k] * outcome.gen[..., k]).sum() * dt
                    + (bp[..., k] * outcome.bat[..., k]).sum() * dt)
        out[name] = {"offer_cost": cost, "payment": pay}
    return out
