"""Small hand-checkable scenarios."""

from __future__ import annotations

import numpy as np

from bessmarket.model import (BatteryUnit, Generator, Line, ScenarioCase, SystemProfiles,
                              build_time_grid, load_scenario, bundled_path)


def micro():
    return load_scenario(bundled_path("micro", "scenario.manifest"))


def make_case(gens, alphas, load, *, buses=(1,), lines=(), rs=None, rgc=None, rgm=None,
              agc=None, batteries=(), dt=1.0, Z=2, ancillary=None, name="fixture"):
    """``gens``: Generator tuples; ``alphas``: energy offer per generator;
    ``load``: (N, T) MW. Ancillary offers default to zero."""
    load = np.atleast_2d(np.asarray(load, dtype=float))
    T = load.shape[1]
    G = len(gens)
    offers = np.zeros((G, T, 4))
    offers[:, :, 0] = np.asarray(alphas, dtype=float)[:, None]
    if ancillary is not None:
        offers[:, :, 1:] = np.asarray(ancillary, dtype=float)[:, None, :]
    zeros = np.zeros(T)
    prof = SystemProfiles(load, zeros if rs is None else rs, zeros if rgc is None else rgc,
                          zeros if rgm is None else rgm)
    grid = build_time_grid(dt, dt / Z, T)
    return ScenarioCase(grid, tuple(buses), tuple(lines), tuple(gens), offers, tuple(batteries),
                        prof, np.zeros((T, Z)) if agc is None else agc, name=name)


def merit_order():
    """Two units (10 and 20 $/MWh, 100 MW each), 150 MW load."""
    gens = [Generator(1, 0, 100, 0, 0), Generator(1, 0, 100, 0, 0)]
    return make_case(gens, [10, 20], [[150]])


def reserve_only_g2():
    """Merit order plus a 10 MW reserve need that only unit 2 can ramp for at 3 $/MW."""
    gens = [Generator(1, 0, 100, 0, 0), Generator(1, 0, 100, 50, 0)]
    return make_case(gens, [10, 20], [[150]], rs=[10.0], ancillary=[[0, 0, 0], [3, 0, 0]])


def congested():
    """Cheap unit at bus 1, expensive at bus 2, 10 MW tie, 50 MW load at bus 2."""
    gens = [Generator(1, 0, 100, 0, 0), Generator(2, 0, 100, 0, 0)]
    return make_case(gens, [10, 20], [[0], [50]], buses=(1, 2), lines=[Line(1, 2, 10.0, 10.0)])


def arbitrage(replacement_cost=0.0, eta=1.0):
    """One bus, 10 and 20 $/MWh units, load 40 then 160 MW, lossless
    50 MW / 200 MWh battery: charge 50 at 10, discharge 50 at 20."""
    gens = [Generator(1, 0, 100, 0, 0), Generator(1, 0, 100, 0, 0)]
    bat = BatteryUnit(1, 50.0, 200.0, 20.0, 180.0, 90.0, eta, replacement_cost, segment_count=4)
    return make_case(gens, [10, 20], [[40, 160]], batteries=[bat], name="arbitrage")


def flat_price():
    """A single generator sets a constant LMP; arbitrage earns nothing."""
    gens = [Generator(1, 0, 500, 0, 0)]
    bat = BatteryUnit(1, 50.0, 200.0, 20.0, 180.0, 90.0, 1.0, 0.0, segment_count=4)
    return make_case(gens, [15], [[40, 160]], batteries=[bat], name="flat")


def one_bus_battery_seller():
    """Merit order with a battery offering 10 MW of energy at 0 $/MWh."""
    gens = [Generator(1, 0, 100, 0, 0), Generator(1, 0, 100, 0, 0)]
    bat = BatteryUnit(1, 50.0, 200.0, 20.0, 180.0, 90.0, 1.0, 0.0, segment_count=2)
    return make_case(gens, [10, 20], [[150]], batteries=[bat], Z=1)
