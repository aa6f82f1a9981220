"""Scenario synthesis from the bundled base data.

Base data: network and generator CSVs in the scenario schema,
``energy_offers.csv`` (gen, alpha_s), ``load_shares.csv`` (bus, share),
``hourly.csv`` (hour, load, rs, rgc) and a raw AGC series ``agc_raw.csv``
(k, mw) sampled every ``agc_raw_seconds``.
"""

from __future__ import annotations

import csv
from dataclasses import replace
from pathlib import Path

import numpy as np

from .agc import prepare_trace
from .model import (OFFER_RATIOS, BatteryUnit, Generator, Line, ScenarioCase, ScenarioError,
                    SystemProfiles, build_time_grid, bundled_path, read_manifest,
                    synthesize_offers, validate_case)

RHO_RANGE = (1.35, 1.65)
RHO_MEAN = 1.5
DESK = {"interval_count": 12, "subintervals": 9, "segment_count": 8}
FULL = {"interval_count": 96, "subintervals": 45, "segment_count": 16}


def draw_mileage_ratios(T: int, seed: int = 0, low: float = RHO_RANGE[0],
                        high: float = RHO_RANGE[1], mean: float = RHO_MEAN) -> np.ndarray:
    """Uniform draws in [low, high], shifted (and re-clipped) to the target mean."""
    if not low <= mean <= high:
        raise ValueError("target mean outside the ratio range")
    rho = np.random.default_rng(seed).uniform(low, high, T)
    for _ in range(200):
        rho = np.clip(rho + (mean - rho.mean()), low, high)
        if abs(rho.mean() - mean) < 1e-12:
            break
    return rho


def _rows(path: Path):
    if not path.exists():
        raise ScenarioError(f"{path}: file not found")
    with path.open(newline="") as fh:
        return list(csv.DictReader(fh))


def hourly_to_intervals(values, T: int) -> np.ndarray:
    """Average a 24-value hourly profile over ``T`` equal intervals of a day."""
    v = np.asarray(values, dtype=float)
    fine = np.repeat(v, 240)                  # 15 s resolution
    return fine.reshape(T, -1).mean(axis=1)


def synthesize_scenario(base_manifest=None, full: bool = False, seed: int = 0,
                        rho_fixed: float | None = None, ratios=OFFER_RATIOS,
                        battery: BatteryUnit | None = None, name: str | None = None) -> ScenarioCase:
    """Build a validated scenario (desk scale unless ``full``)."""
    path = Path(base_manifest) if base_manifest else bundled_path("base", "base.manifest")
    man = read_manifest(path)
    base = path.parent
    shape = FULL if full else DESK
    T, Z = shape["interval_count"], shape["subintervals"]
    if 1440 % T:
        raise ScenarioError("interval count must divide a day in minutes")
    dt = 24.0 / T
    grid = build_time_grid(dt, dt / Z, T)

    buses = [int(r["id"]) for r in _rows(base / man["buses"])]
    lines = [Line(int(r["from"]), int(r["to"]), float(r["susceptance"]), float(r["limit_mw"]))
             for r in _rows(base / man["lines"])]
    gens = [Generator(int(r["bus"]), float(r["pmin"]), float(r["pmax"]), float(r["rs_ramp"]),
                      float(r["rg_ramp"])) for r in _rows(base / man["generators"])]
    if not gens:
        raise ScenarioError("no generators")
    alpha = np.zeros(len(gens))
    for r in _rows(base / man["energy_offers"]):
        alpha[int(r["gen"]) - 1] = float(r["alpha_s"])
    alpha_s = np.repeat(alpha[:, None], T, axis=1)
    rs_o, rgc_o, rgm_o = synthesize_offers(alpha_s, ratios)
    offers = np.stack([alpha_s, rs_o, rgc_o, rgm_o], axis=2)

    hourly = sorted(_rows(base / man["hourly"]), key=lambda r: int(r["hour"]))
    if len(hourly) != 24:
        raise ScenarioError("hourly profile needs 24 rows")
    load_t = hourly_to_intervals([float(r["load"]) for r in hourly], T)
    rs = hourly_to_intervals([float(r["rs"]) for r in hourly], T)
    rgc = hourly_to_intervals([float(r["rgc"]) for r in hourly], T)
    rho = np.full(T, float(rho_fixed)) if rho_fixed is not None else draw_mileage_ratios(T, seed)
    rgm = rho * rgc
    bidx = {b: n for n, b in enumerate(buses)}
    load = np.zeros((len(buses), T))
    for r in _rows(base / man["load_shares"]):
        load[bidx[int(r["bus"])]] = float(r["share"]) * load_t

    raw = np.array([float(r["mw"]) for r in sorted(_rows(base / man["agc_raw"]),
                                                   key=lambda r: int(r["k"]))])
    step_s = float(man.get("agc_raw_seconds", 20))
    per_interval = int(round(dt * 3600 / step_s))
    if per_interval % Z or raw.size < per_interval * T:
        raise ScenarioError("raw AGC series too short or not decimable to the grid")
    stride = per_interval // Z
    agc = prepare_trace(raw[:per_interval * T].reshape(T, per_interval)[:, ::stride], rgm)

    if battery is None:
        b = _rows(base / man["battery"])[0]
        battery = BatteryUnit(int(b["bus"]), float(b["rate"]), float(b["capacity"]),
                              float(b["soc_min"]), float(b["soc_max"]), float(b["soc_init"]),
                              float(b["eta"]), float(b["replacement_cost"]))
    battery = replace(battery, segment_count=shape["segment_count"])
    case = ScenarioCase(grid, tuple(buses), tuple(lines), tuple(gens), offers, (battery,),
                        SystemProfiles(load, rs, rgc, rgm), agc,
                        price_floor=float(man.get("price_floor", -250.0)),
                        price_cap=float(man.get("price_cap", 1000.0)),
                        name=name or man.get("name", "synthetic"),
                        meta={"seed": seed, "rho": rho.tolist(), "full": full})
    bad = validate_case(case)
    if bad:
        raise ScenarioError(f"synthesized scenario invalid: {bad[0]}", bad)
    return case
