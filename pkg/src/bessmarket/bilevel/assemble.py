"""Single-level MILP assembly, solution, polishing and verification."""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..agc import EPSILON, multipliers
from ..clearing import (Bids, LpModel, MarketOutcome, baseline_without_bess, build_llp,
                        clear_market, outcome_from_vectors, system_costs)
from ..degradation import segments_for
from ..lp import INF, LinearModel
from ..model import PRODUCTS, ScenarioCase
from ..solver import OPTIMAL, TIME_LIMIT, SolveOptions, SolveRequest, SolverError, run_external
from .kkt import KktSystem, build_kkt
from .linearize import (ComplementarityPair, SurrogateRevenue, add_kkt_rows, column_bounds,
                        dual_bound, linearize_complementarity, linearize_objective)
from .ulp import UlpVariables, add_offer_variables, build_ulp

REVENUE_ROWS = PRODUCTS + ("degradation",)


class VerificationError(RuntimeError):
    pass


@dataclass
class BilevelConfig:
    gap: float = 1e-3
    time_limit: float | None = None
    threads: int = 1
    solver_cmd: str | None = None
    complementarity: str = "bigm"        # or "indicator"
    dual_bound_scale: float = 2.0
    reserve_headroom: str = "dz"         # or "dt"
    containment: bool = True
    beta_regularizer: float = 0.0
    polish: bool = True
    segment_count: int | None = None
    epsilon: float = EPSILON


@dataclass
class MilpModel:
    lp: LinearModel
    case: ScenarioCase
    llp: LpModel
    kkt: KktSystem
    x_cols: np.ndarray
    y_cols: np.ndarray
    ulp: UlpVariables
    pairs: list[ComplementarityPair]
    surrogate: SurrogateRevenue
    indicators: list = field(default_factory=list)
    m_dual: float = 0.0

    @property
    def counts(self) -> dict:
        return {"columns": self.lp.n_cols, "rows": self.lp.n_rows,
                "binaries": self.lp.n_integer,
                "stationarity": self.kkt.n_stationarity,
                "complementarity_pairs": self.kkt.n_pairs,
                "big_m_binaries": sum(p.binary is not None for p in self.pairs)}


def assemble(case: ScenarioCase, config: BilevelConfig | None = None) -> MilpModel:
    config = config or BilevelConfig()
    if not case.batteries:
        raise ValueError("the case has no battery")
    m = multipliers(case.agc, case.profiles.rgm, config.epsilon)
    llp = build_llp(case, Bids.zero(case), m)
    kkt = build_kkt(llp)
    surrogate = linearize_objective(kkt)
    lo, hi = column_bounds(llp)
    m_dual = dual_bound(llp, config.dual_bound_scale)

    milp = LinearModel(f"bilevel_{case.name}")
    q, beta = add_offer_variables(milp, case)
    x_cols = np.array([milp.add_var(f"x:{n}", lo[j], hi[j], -surrogate.coef_x[j])
                       for j, n in enumerate(llp.lp.col_names)], dtype=int)
    y_cols = np.zeros(llp.lp.n_rows, dtype=int)
    for r, n in enumerate(llp.lp.row_names):
        ylo = 0.0 if kkt.sense[r] == "G" else -m_dual
        y_cols[r] = milp.add_var(f"y:{n}", ylo, m_dual, -surrogate.coef_y[r])
    add_kkt_rows(milp, kkt, x_cols, y_cols, q, beta)
    pairs, indicators = linearize_complementarity(milp, kkt, x_cols, y_cols, q, m_dual, lo, hi,
                                                  config.complementarity)
    segs = [segments_for(b, config.segment_count) for b in case.batteries]
    ulp = build_ulp(milp, case, segs, x_cols[llp.bat_cols], q, beta,
                    config.reserve_headroom, config.containment)
    if config.beta_regularizer > 0:
        for col in beta.ravel():
            a = milp.add_var(f"abs_{milp.col_names[col]}", 0.0, INF, config.beta_regularizer)
            milp.add_row(f"absp_{col}", [(a, 1), (col, -1)], "G", 0.0)
            milp.add_row(f"absn_{col}", [(a, 1), (col, 1)], "G", 0.0)
    return MilpModel(milp, case, llp, kkt, x_cols, y_cols, ulp, pairs, surrogate,
                     indicators, m_dual)


@dataclass
class BilevelSolution:
    case_name: str
    status: str
    bids: Bids
    m: np.ndarray
    outcome: MarketOutcome
    revenue: dict               # product -> $ (summed over batteries)
    revenue_by_battery: np.ndarray   # (B, T, 4)
    degradation: float
    profit: float
    pf: np.ndarray              # (B, T)
    soc: np.ndarray             # (B, T, Z)
    tch: np.ndarray
    tdis: np.ndarray
    milp_objective: float
    mip_gap: float | None
    diagnostics: dict
    x: np.ndarray | None = None

    def revenue_table(self) -> list[tuple[str, float]]:
        rows = [(p, self.revenue[p]) for p in PRODUCTS]
        rows.append(("degradation", -self.degradation))
        return rows

    def to_dict(self) -> dict:
        o = self.outcome
        return {
            "case": self.case_name, "status": self.status, "profit": self.profit,
            "revenue": self.revenue, "degradation_cost": self.degradation,
            "milp_objective": self.milp_objective, "mip_gap": self.mip_gap,
            "offers": {"quantity": self.bids.q.tolist(), "price": self.bids.beta.tolist()},
            "mileage_multiplier": self.m.tolist(),
            "battery_schedule": o.bat.tolist(), "generator_schedule": o.gen.tolist(),
            "lmp": o.lmp.tolist(), "price_reserve": o.price_rs.tolist(),
            "price_reg_capacity": o.price_rgc.tolist(), "price_reg_mileage": o.price_rgm.tolist(),
            "participation_factor": self.pf.tolist(), "soc": self.soc.tolist(),
            "diagnostics": self.diagnostics,
        }

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, default=float))


def _fixed_binaries(milp: LinearModel, x) -> LinearModel:
    lp = milp.copy()
    for j in np.nonzero(lp.integer)[0]:
        val = float(round(x[j]))
        lp.lb[j] = lp.ub[j] = val
        lp.integer[j] = False
    return lp


def _solve(model: LinearModel, config: BilevelConfig, indicators=None):
    opts = SolveOptions(config.gap, config.time_limit, config.threads)
    return run_external(SolveRequest(model, opts, indicators or None), config.solver_cmd)


def assemble_and_solve(case: ScenarioCase, config: BilevelConfig | None = None,
                       model: MilpModel | None = None) -> BilevelSolution:
    config = config or BilevelConfig()
    model = model or assemble(case, config)
    t0 = time.perf_counter()
    res = _solve(model.lp, config, model.indicators)
    if not res.has_solution:
        raise SolverError(f"bilevel MILP {res.status}: {res.log[-400:]}")
    x = res.x
    polished = False
    if config.polish:
        fixed = _fixed_binaries(model.lp, x)
        pres = _solve(fixed, config)
        if pres.ok:
            x = pres.x
            polished = True
    sol = extract_solution(model, x, res.status, res.gap)
    sol.diagnostics["solve_seconds"] = time.perf_counter() - t0
    sol.diagnostics["polished"] = polished
    sol.diagnostics["milp_objective_raw"] = res.objective
    sol.diagnostics.update(model.counts)
    return sol


def extract_solution(model: MilpModel, x, status: str = OPTIMAL, gap=None) -> BilevelSolution:
    case = model.case
    grid = case.grid
    x = np.asarray(x, dtype=float)
    ulp = model.ulp
    bids = Bids(x[ulp.q].copy(), x[ulp.beta].copy())
    llp = model.llp
    llp.apply_bids(bids)
    lx = x[model.x_cols]
    ly = x[model.y_cols]
    outcome = outcome_from_vectors(llp, lx, ly)
    rev_b = outcome.battery_revenue(case)
    revenue = {p: float(rev_b[..., k].sum()) for k, p in enumerate(PRODUCTS)}
    deg = 0.0
    for i, seg in enumerate(ulp.segments):
        deg += float((x[ulp.dis[i]] * seg.slopes).sum() * grid.dz)
    soc = np.stack([ulp.soc(i, x) for i in range(len(case.batteries))])
    diag = kkt_diagnostics(model, x)
    profit = sum(revenue.values()) - deg
    sol = BilevelSolution(case.name, status, bids, llp.m.copy(), outcome, revenue, rev_b, deg,
                          profit, x[ulp.pf], soc, x[ulp.tch], x[ulp.tdis],
                          model.lp.objective(x), gap, diag, x)
    diag.update(ulp_checks(case, sol, model.ulp.e_init))
    return sol


def kkt_diagnostics(model: MilpModel, x) -> dict:
    kkt = model.kkt
    ulp = model.ulp
    beta, q = x[ulp.beta], x[ulp.q]
    lx, ly = x[model.x_cols], x[model.y_cols]
    stat = kkt.stationarity(ly, beta)
    slack = kkt.slacks(lx, q)
    c, b = kkt.cost(beta), kkt.rhs(q)
    primal, dual = float(c @ lx), float(b @ ly)
    comp_raw, comp_norm, bin_viol = 0.0, 0.0, 0.0
    for p in model.pairs:
        prod = abs(ly[p.row] * slack[p.row])
        comp_raw = max(comp_raw, prod)
        scale = max(p.m_dual, 1.0) * max(p.m_slack, 1.0)
        comp_norm = max(comp_norm, prod / scale)
        if p.binary is not None:
            # u = 0 forbids a positive dual, u = 1 a positive slack
            if x[p.binary] < 0.5:
                bin_viol = max(bin_viol, abs(ly[p.row]) / max(p.m_dual, 1.0))
            else:
                bin_viol = max(bin_viol, max(slack[p.row], 0.0) / max(p.m_slack, 1.0))
    ineq = kkt.ineq_rows
    primal_viol = max(float(np.maximum(-slack[ineq], 0).max(initial=0.0)),
                      float(np.abs(slack[kkt.eq_rows]).max(initial=0.0)))
    surrogate = model.surrogate.value(lx, ly)
    direct = 0.0
    market = model.llp.market_rows
    A = kkt.A.tocsr()
    bat = {col for col, *_ in model.llp.cost_links}
    for r in market:
        lo_, hi_ = A.indptr[r], A.indptr[r + 1]
        for cidx, v in zip(A.indices[lo_:hi_], A.data[lo_:hi_]):
            if cidx in bat:
                direct += v * ly[r] * lx[cidx]
    at_bound = [model.llp.lp.row_names[r] for r in range(len(ly))
                if abs(ly[r]) >= model.m_dual * (1 - 1e-6)]
    return {
        "stationarity_inf": float(np.abs(stat).max(initial=0.0)),
        "complementarity_max": comp_raw,
        "complementarity_normalized": comp_norm,
        "binary_violation": bin_viol,
        "primal_objective": primal, "dual_objective": dual,
        "duality_gap_rel": abs(primal - dual) / max(1.0, abs(primal)),
        "primal_violation": primal_viol,
        "surrogate_revenue": surrogate, "direct_revenue": direct,
        "surrogate_gap_rel": abs(surrogate - direct) / max(1.0, abs(direct)),
        "duals_at_bound": at_bound,
        "dual_bound": model.m_dual,
    }


def ulp_checks(case: ScenarioCase, sol: BilevelSolution, e_init) -> dict:
    """Residuals of the owner's operating constraints at a solution."""
    grid = case.grid
    dt, dz, Z = grid.dt, grid.dz, grid.Z
    worst = {"capacity_coupling": 0.0, "pf_sum": 0.0, "soc_bounds": 0.0,
             "reserve_headroom": 0.0, "terminal_soc": 0.0, "mutual_exclusion": 0.0,
             "containment": 0.0}
    bat = sol.outcome.bat
    worst["pf_sum"] = float(max(sol.pf.sum(axis=0).max(initial=0.0) - 1.0, 0.0))
    for i, b in enumerate(case.batteries):
        E, Rs, RgC = bat[i, :, 0], bat[i, :, 1], bat[i, :, 2]
        worst["capacity_coupling"] = max(worst["capacity_coupling"],
                                         float(np.max(np.maximum(-b.rate + RgC - E, 0))),
                                         float(np.max(np.maximum(E + RgC + Rs - b.rate, 0))))
        soc = sol.soc[i]
        worst["soc_bounds"] = max(worst["soc_bounds"], float(np.max(soc - b.soc_max)),
                                  float(np.max(b.soc_min - soc)), 0.0)
        cum = np.concatenate([[0.0], np.cumsum(Rs * dt)[:-1]])
        need = b.soc_min + cum[:, None] + Rs[:, None] * dz * np.arange(1, Z + 1)[None, :]
        worst["reserve_headroom"] = max(worst["reserve_headroom"], float(np.max(need - soc)), 0.0)
        worst["terminal_soc"] = max(worst["terminal_soc"], abs(float(soc[-1, -1]) - b.soc_init))
        worst["mutual_exclusion"] = max(worst["mutual_exclusion"],
                                        float(np.max(sol.tch[i] * sol.tdis[i])))
        peak = np.abs(case.agc).max(axis=1)
        worst["containment"] = max(worst["containment"],
                                   float(np.max(sol.pf[i] * peak - RgC)), 0.0)
    return {f"ulp_{k}": v for k, v in worst.items()}


def verify_solution(solution: BilevelSolution, case: ScenarioCase, tol: float = 1e-5) -> dict:
    """Re-clear the market at the optimal bids and compare.

    Schedule or price differences with an equal objective are reported as
    LP degeneracy; an objective mismatch raises :class:`VerificationError`.
    """
    llp = build_llp(case, solution.bids, solution.m)
    again = clear_market(llp)
    emb = solution.outcome
    scale = max(1.0, abs(again.objective))
    obj_gap = abs(again.objective - float(np.dot(llp.lp.cost, emb.x))) / scale
    sched = max(float(np.abs(again.gen - emb.gen).max(initial=0.0)),
                float(np.abs(again.bat - emb.bat).max(initial=0.0)))
    price = max(float(np.abs(again.lmp - emb.lmp).max(initial=0.0)),
                float(np.abs(again.price_rs - emb.price_rs).max(initial=0.0)),
                float(np.abs(again.price_rgc - emb.price_rgc).max(initial=0.0)),
                float(np.abs(again.price_rgm - emb.price_rgm).max(initial=0.0)))
    out = {"reclear_objective_gap": obj_gap, "schedule_mismatch": sched,
           "price_mismatch": price,
           "degenerate": bool(obj_gap <= tol and (sched > tol or price > tol))}
    d = solution.diagnostics
    out["surrogate_ok"] = d["surrogate_gap_rel"] <= 1e-6
    out["complementarity_ok"] = (d["complementarity_normalized"] <= 1e-6
                                 and d.get("binary_violation", 0.0) <= 1e-6)
    out["stationarity_ok"] = d["stationarity_inf"] <= 1e-6
    if obj_gap > tol:
        raise VerificationError(f"embedded clearing differs from a fresh clearing "
                                f"(relative objective gap {obj_gap:.3g})")
    if not (out["complementarity_ok"] and out["stationarity_ok"]):
        raise VerificationError("embedded point violates the clearing optimality conditions")
    return out


def write_solution_csvs(solution: BilevelSolution, case: ScenarioCase, out_dir,
                        baseline: MarketOutcome | None = None) -> dict[str, Path]:
    """schedules.csv (per battery/interval/sub-interval), revenue.csv and,
    if a baseline is given, system_costs.csv."""
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    paths = {}
    o = solution.outcome
    p = d / "schedules.csv"
    with p.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["battery", "t", "z", "energy", "reserve", "reg_capacity", "reg_mileage",
                    "pf", "agc_unit", "charge", "discharge", "soc", "lmp"])
        bidx = case.bus_index
        for i, b in enumerate(case.batteries):
            for t in range(case.grid.T):
                for z in range(case.grid.Z):
                    w.writerow([i + 1, t + 1, z + 1, *(repr(float(v)) for v in o.bat[i, t]),
                                repr(float(solution.pf[i, t])),
                                repr(float(solution.pf[i, t] * case.agc[t, z])),
                                repr(float(solution.tch[i, t, z])),
                                repr(float(solution.tdis[i, t, z])),
                                repr(float(solution.soc[i, t, z])),
                                repr(float(o.lmp[bidx[b.bus], t]))])
    paths["schedules"] = p
    p = d / "revenue.csv"
    with p.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["component", "dollars"])
        for name, val in solution.revenue_table():
            w.writerow([name, repr(float(val))])
    paths["revenue"] = p
    p = d / "prices.csv"
    o.to_csv(case, p)
    paths["market"] = p
    if baseline is not None:
        p = d / "system_costs.csv"
        with_b = system_costs(case, o, solution.bids)
        without = system_costs(case, baseline)
        with p.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["market", "payment_without_bess", "payment_with_bess",
                        "offer_cost_without_bess", "offer_cost_with_bess"])
            for prod in PRODUCTS:
                w.writerow([prod, repr(without[prod]["payment"]), repr(with_b[prod]["payment"]),
                            repr(without[prod]["offer_cost"]), repr(with_b[prod]["offer_cost"])])
        paths["system_costs"] = p
    return paths


def run_case(case: ScenarioCase, config: BilevelConfig | None = None):
    """Bilevel solve plus the no-battery baseline."""
    sol = assemble_and_solve(case, config)
    return sol, baseline_without_bess(case)


__all__ = ["BilevelConfig", "BilevelSolution", "MilpModel", "REVENUE_ROWS", "TIME_LIMIT",
           "VerificationError", "assemble", "assemble_and_solve", "extract_solution",
           "kkt_diagnostics", "run_case", "ulp_checks", "verify_solution",
           "write_solution_csvs"]
