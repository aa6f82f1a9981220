"""Battery owner's constraint set: offers, AGC following, segments, SOC."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..degradation import DegradationSegments
from ..lp import LinearModel


class UlpError(ValueError):
    pass


@dataclass
class UlpVariables:
    """MILP column indices. Per-battery lists hold arrays because the
    segment count may differ between batteries."""
    q: np.ndarray                 # (B, T, 3)
    beta: np.ndarray              # (B, T, 4)
    pf: np.ndarray                # (B, T)
    tch: np.ndarray               # (B, T, Z)
    tdis: np.ndarray              # (B, T, Z)
    v: np.ndarray                 # (B, T, Z)
    ch: list                      # per battery (T, Z, K)
    dis: list
    e: list
    e_init: list                  # per battery (K,) constants
    segments: list

    def soc(self, i: int, x) -> np.ndarray:
        """(T, Z) state of charge of battery ``i`` at solution ``x``."""
        return np.asarray(x)[self.e[i]].sum(axis=-1)


def add_offer_variables(milp: LinearModel, case) -> tuple[np.ndarray, np.ndarray]:
    B, T = len(case.batteries), case.grid.T
    q = np.zeros((B, T, 3), dtype=int)
    beta = np.zeros((B, T, 4), dtype=int)
    for i, b in enumerate(case.batteries):
        for t in range(T):
            for k, tag in enumerate(("E", "Rs", "RgC")):
                q[i, t, k] = milp.add_var(f"Q{tag}_b{i}_t{t}", 0.0, b.rate)
            for k, tag in enumerate(("E", "Rs", "RgC", "RgM")):
                beta[i, t, k] = milp.add_var(f"beta{tag}_b{i}_t{t}", case.price_floor, case.price_cap)
    return q, beta


def build_ulp(milp: LinearModel, case, segments: list[DegradationSegments], bat_x, q, beta,
              reserve_headroom: str = "dz", containment: bool = True) -> UlpVariables:
    """Add the owner's variables and rows to ``milp``.

    ``bat_x`` is the (B, T, 4) array of MILP columns holding the cleared
    battery quantities (energy, reserve, regulation capacity, mileage).
    ``reserve_headroom`` selects the sub-interval (``"dz"``) or interval
    (``"dt"``) span in the per-step reserve headroom row. ``containment``
    adds ``PF * max|AGC| <= P^RgC`` per battery-interval.
    """
    if reserve_headroom not in ("dz", "dt"):
        raise ValueError("reserve_headroom must be 'dz' or 'dt'")
    grid = case.grid
    B, T, Z, dt, dz = len(case.batteries), grid.T, grid.Z, grid.dt, grid.dz
    agc = case.agc
    rgm = case.profiles.rgm
    pf = np.zeros((B, T), dtype=int)
    tch = np.zeros((B, T, Z), dtype=int)
    tdis = np.zeros((B, T, Z), dtype=int)
    v = np.zeros((B, T, Z), dtype=int)
    ch_l, dis_l, e_l, init_l = [], [], [], []
    head = dz if reserve_headroom == "dz" else dt
    for i, b in enumerate(case.batteries):
        if not b.soc_min <= b.soc_init <= b.soc_max:
            raise UlpError(f"battery {i + 1}: SOC^Init outside [SOC^Min, SOC^Max]")
        seg = segments[i]
        K = seg.count
        init = seg.initial_fill(b.soc_init)
        ch = np.zeros((T, Z, K), dtype=int)
        dis = np.zeros((T, Z, K), dtype=int)
        e = np.zeros((T, Z, K), dtype=int)
        E, Rs, RgC, RgM = (bat_x[i, :, k] for k in range(4))
        for t in range(T):
            milp.add_row(f"cap_lo_b{i}_t{t}", [(E[t], 1), (RgC[t], -1)], "G", -b.rate)
            milp.add_row(f"cap_hi_b{i}_t{t}", [(E[t], -1), (RgC[t], -1), (Rs[t], -1)], "G", -b.rate)
            if rgm[t] > 0:
                pf[i, t] = milp.add_var(f"PF_b{i}_t{t}", 0.0, 1.0)
                milp.add_row(f"pf_link_b{i}_t{t}", [(RgM[t], 1), (pf[i, t], -rgm[t])], "E", 0.0)
            else:
                pf[i, t] = milp.add_var(f"PF_b{i}_t{t}", 0.0, 0.0)
            peak = float(np.abs(agc[t]).max(initial=0.0))
            if containment and peak > 0:
                milp.add_row(f"pf_peak_b{i}_t{t}", [(pf[i, t], peak), (RgC[t], -1)], "L", 0.0)
            for z in range(Z):
                sfx = f"b{i}_t{t}_z{z}"
                tch[i, t, z] = milp.add_var(f"TCh_{sfx}", 0.0, b.rate)
                tdis[i, t, z] = milp.add_var(f"TDis_{sfx}", 0.0, b.rate)
                v[i, t, z] = milp.add_binary(f"v_{sfx}")
                milp.add_row(f"follow_{sfx}", [(E[t], 1), (pf[i, t], agc[t, z]),
                                           (tdis[i, t, z], -1), (tch[i, t, z], 1)], "E", 0.0)
                milp.add_row(f"dis_on_{sfx}", [(tdis[i, t, z], 1), (v[i, t, z], -b.rate)], "L", 0.0)
                milp.add_row(f"ch_on_{sfx}", [(tch[i, t, z], 1), (v[i, t, z], b.rate)], "L", b.rate)
                for k in range(K):
                    ch[t, z, k] = milp.add_var(f"Ch_{sfx}_k{k}", 0.0)
                    dis[t, z, k] = milp.add_var(f"Dis_{sfx}_k{k}", 0.0,
                                                cost=seg.slopes[k] * dz)
                    e[t, z, k] = milp.add_var(f"e_{sfx}_k{k}", 0.0, seg.e_max[k])
                milp.add_row(f"dis_split_{sfx}", [(tdis[i, t, z], 1.0 / b.eta)]
                             + [(dis[t, z, k], -1) for k in range(K)], "E", 0.0)
                milp.add_row(f"ch_split_{sfx}", [(tch[i, t, z], b.eta)]
                             + [(ch[t, z, k], -1) for k in range(K)], "E", 0.0)
                for k in range(K):
                    terms = [(e[t, z, k], 1), (ch[t, z, k], -dz), (dis[t, z, k], dz)]
                    if z > 0:
                        terms.append((e[t, z - 1, k], -1))
                        rhs = 0.0
                    elif t > 0:
                        terms.append((e[t - 1, Z - 1, k], -1))
                        rhs = 0.0
                    else:
                        rhs = float(init[k])
                    milp.add_row(f"seg_soc_{sfx}_k{k}", terms, "E", rhs)
                soc = [(e[t, z, k], 1) for k in range(K)]
                milp.add_row(f"soc_lo_{sfx}", soc + [(Rs[t], -head)], "G", b.soc_min)
                milp.add_row(f"soc_hi_{sfx}", soc, "L", b.soc_max)
                worst = [(Rs[tp], -dt) for tp in range(t)] + [(Rs[t], -(z + 1) * dz)]
                milp.add_row(f"reserve_energy_{sfx}", soc + worst, "G", b.soc_min)
        milp.add_row(f"soc_end_b{i}", [(e[T - 1, Z - 1, k], 1) for k in range(K)], "E", b.soc_init)
        ch_l.append(ch)
        dis_l.append(dis)
        e_l.append(e)
        init_l.append(init)
    return UlpVariables(q, beta, pf, tch, tdis, v, ch_l, dis_l, e_l, init_l, list(segments))
