"""Independent oracles shared by the test modules."""

from __future__ import annotations

import itertools
from dataclasses import replace

import numpy as np

from bessmarket.agc import multipliers
from bessmarket.clearing import Bids, MarketInfeasible, baseline_without_bess, build_llp, clear_market
from bessmarket.bilevel.evaluate import evaluate_outcome
from bessmarket.model import ScenarioCase, SystemProfiles, build_time_grid


def interval_case(case: ScenarioCase, t: int) -> ScenarioCase:
    """Single-interval copy of ``case`` (the clearing LP has no coupling in time)."""
    p = case.profiles
    prof = SystemProfiles(p.load[:, t:t + 1], p.rs[t:t + 1], p.rgc[t:t + 1], p.rgm[t:t + 1])
    grid = build_time_grid(case.grid.dt, case.grid.dz, 1)
    return replace(case, grid=grid, offers=case.offers[:, t:t + 1], profiles=prof,
                   agc=case.agc[t:t + 1])


def brute_force(case: ScenarioCase, segments, q_grid=(0.0, 25.0, 50.0), headroom=None):
    """Best profit over a coarse grid of single-battery offers.

    Price offers per product come from {floor, no-battery clearing price,
    cap}. Each interval is cleared separately; distinct per-interval
    outcomes are then combined across the horizon and priced with the
    owner's degradation LP. Returns ``(best_profit, best_outcomes, n_lp)``.
    """
    assert len(case.batteries) == 1
    m = multipliers(case.agc, case.profiles.rgm)
    base = baseline_without_bess(case)
    bus = case.bus_index[case.batteries[0].bus]
    T = case.grid.T
    per_t = []
    n_lp = 0
    for t in range(T):
        sub = interval_case(case, t)
        base_prices = (base.lmp[bus, t], base.price_rs[t], base.price_rgc[t], base.price_rgm[t])
        options = [(case.price_floor, bp, case.price_cap) for bp in base_prices]
        seen = {}
        for q in itertools.product(q_grid, repeat=3):
            for beta in itertools.product(*options):
                bids = Bids(np.array(q, float).reshape(1, 1, 3), np.array(beta, float).reshape(1, 1, 4))
                try:
                    out = clear_market(build_llp(sub, bids, m[t:t + 1]))
                except MarketInfeasible:
                    continue
                n_lp += 1
                key = tuple(np.round(np.concatenate([out.bat.ravel(), [out.lmp[bus, 0], out.price_rs[0],
                                                     out.price_rgc[0], out.price_rgm[0]]]), 7))
                seen.setdefault(key, out)
        per_t.append(list(seen.values()))
    # combine, best revenue first, prune once revenue cannot beat the incumbent
    combos = []
    for outs in itertools.product(*per_t):
        rev = sum(float(o.battery_revenue(interval_case(case, t)).sum()) for t, o in enumerate(outs))
        combos.append((rev, outs))
    combos.sort(key=lambda c: -c[0])
    best, best_outs = 0.0, None
    for rev, outs in combos:
        if rev <= best:
            break
        merged = _merge(case, outs)
        ev = evaluate_outcome(case, merged, segments, headroom)
        if ev.feasible and ev.profit > best:
            best, best_outs = ev.profit, merged
    return best, best_outs, n_lp


def _merge(case, outs):
    """Stack per-interval outcomes into one horizon outcome."""
    first = outs[0]
    cat = lambda name, axis: np.concatenate([getattr(o, name) for o in outs], axis=axis)  # noqa: E731
    return replace(first, gen=cat("gen", 1), bat=cat("bat", 1), theta=cat("theta", 1),
                   lmp=cat("lmp", 1), price_rs=cat("price_rs", 0), price_rgc=cat("price_rgc", 0),
                   price_rgm=cat("price_rgm", 0), objective=sum(o.objective for o in outs))
