"""Profit of a fixed bid vector, evaluated through market clearing.

The cleared energy and participation factor fix the net battery power
in every sub-interval; with charge and discharge mutually exclusive this
pins both totals, so the cheapest degradation follows from a small LP
over segment energies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from ..clearing import Bids, MarketInfeasible, MarketOutcome, build_llp, clear_market
from ..degradation import DegradationSegments
from ..model import PRODUCTS, ScenarioCase

TOL = 1e-6


@dataclass
class OfferEvaluation:
    feasible: bool
    reason: str
    revenue: float
    degradation: float
    outcome: MarketOutcome | None

    @property
    def profit(self) -> float:
        return self.revenue - self.degradation if self.feasible else float("-inf")


def min_degradation(battery, seg: DegradationSegments, net, reserve, dt: float, dz: float,
                    headroom: float | None = None):
    """Cheapest segment schedule for a (T, Z) net discharge series (MW,
    positive = discharge) and (T,) reserve awards. Returns ``None`` when
    the owner's SOC rules cannot be met."""
    net = np.asarray(net, dtype=float)
    T, Z = net.shape
    K = seg.count
    head = dz if headroom is None else headroom
    tdis = np.maximum(net, 0.0)
    tch = np.maximum(-net, 0.0)
    if tdis.max(initial=0) > battery.rate + TOL or tch.max(initial=0) > battery.rate + TOL:
        return None
    S = T * Z
    n = 3 * S * K                   # ch, dis, e per step and segment
    ch = lambda s, k: s * K + k                     # noqa: E731
    dis = lambda s, k: S * K + s * K + k            # noqa: E731
    en = lambda s, k: 2 * S * K + s * K + k         # noqa: E731
    c = np.zeros(n)
    for s in range(S):
        for k in range(K):
            c[dis(s, k)] = seg.slopes[k] * dz
    rows, cols, vals, b_eq = [], [], [], []
    r = 0
    init = seg.initial_fill(battery.soc_init)
    for s in range(S):
        t, z = divmod(s, Z)
        for k in range(K):
            rows += [r, r, r]
            cols += [en(s, k), ch(s, k), dis(s, k)]
            vals += [1.0, -dz, dz]
            if s > 0:
                rows.append(r)
                cols.append(en(s - 1, k))
                vals.append(-1.0)
                b_eq.append(0.0)
            else:
                b_eq.append(init[k])
            r += 1
        rows += [r] * K
        cols += [dis(s, k) for k in range(K)]
        vals += [1.0] * K
        b_eq.append(tdis[t, z] / battery.eta)
        r += 1
        rows += [r] * K
        cols += [ch(s, k) for k in range(K)]
        vals += [1.0] * K
        b_eq.append(tch[t, z] * battery.eta)
        r += 1
    rows += [r] * K
    cols += [en(S - 1, k) for k in range(K)]
    vals += [1.0] * K
    b_eq.append(battery.soc_init)
    A_eq = sparse.csr_matrix((vals, (rows, cols)), shape=(r + 1, n))
    # SOC bounds with reserve headroom, as -SOC <= -(lower) and SOC <= upper
    ur, uc, uv, b_ub = [], [], [], []
    q = 0
    for s in range(S):
        t, z = divmod(s, Z)
        low = max(battery.soc_min + reserve[t] * head,
                  battery.soc_min + reserve[:t].sum() * dt + reserve[t] * (z + 1) * dz)
        ur += [q] * K + [q + 1] * K
        uc += [en(s, k) for k in range(K)] * 2
        uv += [-1.0] * K + [1.0] * K
        b_ub += [-low, battery.soc_max]
        q += 2
    A_ub = sparse.csr_matrix((uv, (ur, uc)), shape=(q, n))
    bounds = [(0, None)] * (2 * S * K) + [(0, seg.e_max[k]) for _ in range(S) for k in range(K)]
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
    if res.status != 0:
        return None
    return float(res.fun)


def evaluate_offer(case: ScenarioCase, bids: Bids, segments: list[DegradationSegments],
                   m=None, headroom: float | None = None,
                   containment: bool = True) -> OfferEvaluation:
    """Clear the market at ``bids`` and price the owner's resulting profit.

    Infeasible outcomes (capacity coupling, participation-factor sum,
    signal containment, SOC rules) are returned with ``feasible=False``.
    """
    try:
        out = clear_market(build_llp(case, bids, m))
    except MarketInfeasible as exc:
        return OfferEvaluation(False, str(exc), 0.0, 0.0, None)
    return evaluate_outcome(case, out, segments, headroom, containment)


def evaluate_outcome(case, out: MarketOutcome, segments, headroom=None,
                     containment: bool = True) -> OfferEvaluation:
    grid = case.grid
    rgm = case.profiles.rgm
    peak = np.abs(case.agc).max(axis=1)
    revenue = float(out.battery_revenue(case).sum())
    pf_all = np.zeros((len(case.batteries), grid.T))
    deg = 0.0
    for i, b in enumerate(case.batteries):
        E, Rs, RgC, RgM = (out.bat[i, :, k] for k in range(len(PRODUCTS)))
        if np.any(E - RgC < -b.rate - TOL) or np.any(E + RgC + Rs > b.rate + TOL):
            return OfferEvaluation(False, "capacity coupling", revenue, 0.0, out)
        pf = np.where(rgm > 0, RgM / np.where(rgm > 0, rgm, 1.0), 0.0)
        pf_all[i] = pf
        if containment and np.any(pf * peak > RgC + TOL):
            return OfferEvaluation(False, "signal exceeds regulation capacity", revenue, 0.0, out)
        net = E[:, None] + pf[:, None] * case.agc
        cost = min_degradation(b, segments[i], net, Rs, grid.dt, grid.dz, headroom)
        if cost is None:
            return OfferEvaluation(False, "state-of-charge rules violated", revenue, 0.0, out)
        deg += cost
    if np.any(pf_all.sum(axis=0) > 1 + TOL):
        return OfferEvaluation(False, "participation factors sum above 1", revenue, deg, out)
    return OfferEvaluation(True, "", revenue, deg, out)


def price_taker_profit(case: ScenarioCase, segments, m=None, headroom=None,
                       containment: bool = True) -> float:
    """Profit of full-quantity offers at zero price, or 0 if that schedule
    breaks the owner's rules (staying idle is always available)."""
    ev = evaluate_offer(case, Bids.full(case, 0.0), segments, m, headroom, containment)
    return max(0.0, ev.profit)
