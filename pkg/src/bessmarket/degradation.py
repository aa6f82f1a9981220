"""Cycle-depth aging cost and its piecewise-linear segment model.

The aging function prices one full cycle of depth ``d`` (fraction of
capacity) at ``a * d**b`` dollars per MWh of capacity, calibrated so that
a cycle at the reference depth costs ``replacement_cost / life_cycles``
per MWh. The segment model splits the capacity into ``K`` equal slices
whose marginal discharge cost is the secant slope of the aging curve over
that slice.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import rainflow


@dataclass(frozen=True)
class CycleAgingFunction:
    coefficient: float        # a, $ per cycle per MWh of capacity
    exponent: float           # b
    replacement_cost: float   # $/MWh
    life_cycles: float
    reference_depth: float

    def __call__(self, depth):
        return self.coefficient * np.power(depth, self.exponent)


def build_aging_function(replacement_cost: float, life_cycles: float,
                         reference_depth: float, exponent: float) -> CycleAgingFunction:
    if life_cycles <= 0:
        raise ValueError("life_cycles must be positive")
    if not 0 < reference_depth <= 1:
        raise ValueError("reference_depth must lie in (0, 1]")
    if exponent <= 0:
        raise ValueError("exponent must be positive")
    a = replacement_cost / (life_cycles * reference_depth ** exponent)
    return CycleAgingFunction(a, exponent, replacement_cost, life_cycles, reference_depth)


def aging_for(battery) -> CycleAgingFunction:
    return build_aging_function(battery.replacement_cost, battery.life_cycles,
                                battery.reference_depth, battery.aging_exponent)


@dataclass(frozen=True)
class DegradationSegments:
    e_max: np.ndarray     # MWh per segment
    slopes: np.ndarray    # $/MWh discharged from each segment

    @property
    def count(self) -> int:
        return int(self.e_max.size)

    def initial_fill(self, soc: float) -> np.ndarray:
        """Stored energy per segment when ``soc`` MWh is packed into the
        cheapest segments first."""
        fill = np.zeros(self.count)
        left = soc
        for k in range(self.count):
            fill[k] = min(self.e_max[k], max(left, 0.0))
            left -= fill[k]
        if left > 1e-9:
            raise ValueError("initial SOC exceeds total segment capacity")
        return fill

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "e_max", "slope"])
            for k in range(self.count):
                w.writerow([k + 1, repr(float(self.e_max[k])), repr(float(self.slopes[k]))])


def segment_slopes(aging: CycleAgingFunction, K: int, capacity: float) -> DegradationSegments:
    if K < 1:
        raise ValueError("need at least one segment")
    if capacity <= 0:
        raise ValueError("capacity must be positive")
    k = np.arange(1, K + 1)
    b = aging.exponent
    slopes = K * aging.coefficient * ((k / K) ** b - ((k - 1) / K) ** b)
    return DegradationSegments(np.full(K, capacity / K), slopes)


def segments_for(battery, K: int | None = None) -> DegradationSegments:
    return segment_slopes(aging_for(battery), K or battery.segment_count, battery.capacity)


def segment_count_for_capacity(capacity: float, segment_energy: float = 12.5) -> int:
    """Keep segment energy roughly constant when the capacity changes."""
    return max(1, int(round(capacity / segment_energy)))


def rainflow_cost(soc_profile, aging: CycleAgingFunction, capacity: float) -> float:
    """Cycle-counting cost of an SOC trajectory (MWh). Residual half
    cycles are charged half the full-cycle cost."""
    soc = np.asarray(soc_profile, dtype=float)
    if soc.size < 2 or np.ptp(soc) == 0.0:
        return 0.0
    total = 0.0
    for rng, _mean, count, _i, _j in rainflow.extract_cycles(soc):
        total += count * capacity * float(aging(rng / capacity))
    return total


@dataclass
class SegmentSimulation:
    cost: np.ndarray        # $ per sub-interval
    energy: np.ndarray      # (steps + 1, K) stored MWh per segment
    charge: np.ndarray      # (steps, K) MW into each segment
    discharge: np.ndarray   # (steps, K) MW out of each segment

    @property
    def total_cost(self) -> float:
        return float(self.cost.sum())

    @property
    def soc(self) -> np.ndarray:
        return self.energy.sum(axis=1)


def simulate_segment_allocation(power, segments: DegradationSegments, eta: float,
                                dz: float, initial=None) -> SegmentSimulation:
    """Greedy replay of the segment bookkeeping.

    ``power`` is grid-side MW per sub-interval, positive for discharge.
    Charging fills the cheapest non-full segment first (stored energy is
    ``eta`` times grid energy); discharging drains the cheapest charged
    segment first (``1/eta`` times grid energy).
    """
    p = np.asarray(power, dtype=float)
    K = segments.count
    e = np.zeros(K) if initial is None else np.array(initial, dtype=float)
    steps = p.size
    energy = np.zeros((steps + 1, K))
    energy[0] = e
    ch = np.zeros((steps, K))
    dis = np.zeros((steps, K))
    cost = np.zeros(steps)
    tol = 1e-9
    for s in range(steps):
        if p[s] < 0:
            left = -p[s] * eta * dz
            for k in range(K):
                room = segments.e_max[k] - e[k]
                take = min(room, left)
                if take > 0:
                    e[k] += take
                    ch[s, k] = take / dz
                    left -= take
            if left > tol * max(1.0, -p[s] * dz):
                raise ValueError(f"sub-interval {s}: charging beyond capacity")
        elif p[s] > 0:
            left = p[s] / eta * dz
            for k in range(K):
                take = min(e[k], left)
                if take > 0:
                    e[k] -= take
                    dis[s, k] = take / dz
                    cost[s] += segments.slopes[k] * take
                    left -= take
            if left > tol * max(1.0, p[s] * dz):
                raise ValueError(f"sub-interval {s}: discharge requested from empty segments")
        energy[s + 1] = e
    return SegmentSimulation(cost, energy, ch, dis)
