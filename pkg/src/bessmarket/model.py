"""Domain types, scenario files and validation.

Units throughout: MW, MWh, $/MWh, hours; angles in radians. Time and
sub-interval indices are 0-based in memory and 1-based in CSV files.
"""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

OFFER_RATIOS = (0.15, 0.4, 0.07)
PRODUCTS = ("energy", "reserve", "reg_capacity", "reg_mileage")


class ScenarioError(ValueError):
    """Raised for unreadable scenario files or cases that fail validation."""

    def __init__(self, message, violations=None):
        super().__init__(message)
        self.violations = list(violations or [])


@dataclass(frozen=True)
class TimeGrid:
    interval_count: int = 96
    interval_hours: float = 0.25
    subinterval_hours: float = 20.0 / 3600.0

    @property
    def subintervals_per_interval(self) -> int:
        return int(round(self.interval_hours / self.subinterval_hours))

    # short aliases used throughout the optimisation code
    @property
    def T(self) -> int:
        return self.interval_count

    @property
    def Z(self) -> int:
        return self.subintervals_per_interval

    @property
    def dt(self) -> float:
        return self.interval_hours

    @property
    def dz(self) -> float:
        return self.subinterval_hours


def build_time_grid(interval_hours: float, subinterval_hours: float,
                    interval_count: int) -> TimeGrid:
    """``build_time_grid(0.25, 20/3600, 96)`` gives 45 sub-intervals."""
    if interval_count < 1:
        raise ValueError("interval_count must be >= 1")
    if interval_hours <= 0 or subinterval_hours <= 0:
        raise ValueError("time spans must be positive")
    ratio = interval_hours / subinterval_hours
    if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio) or round(ratio) < 1:
        raise ValueError(f"interval span {interval_hours} h is not an integer multiple "
                         f"of the sub-interval span {subinterval_hours} h")
    return TimeGrid(int(interval_count), float(interval_hours), float(subinterval_hours))


@dataclass(frozen=True)
class Line:
    from_bus: int
    to_bus: int
    susceptance: float
    limit_mw: float


@dataclass(frozen=True)
class Generator:
    bus: int
    pmin: float
    pmax: float
    rs_ramp: float
    rg_ramp: float


@dataclass(frozen=True)
class BatteryUnit:
    bus: int
    rate: float
    capacity: float
    soc_min: float
    soc_max: float
    soc_init: float
    eta: float
    replacement_cost: float = 200_000.0
    life_cycles: float = 6000.0
    reference_depth: float = 0.8
    aging_exponent: float = 2.03
    segment_count: int = 16


def _frozen(a, ndim, dtype=float):
    arr = np.array(a, dtype=dtype, copy=True)
    if arr.ndim != ndim:
        raise ValueError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class SystemProfiles:
    """Per-bus load (N x T) and system requirements (T,)."""
    load: np.ndarray
    rs: np.ndarray
    rgc: np.ndarray
    rgm: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "load", _frozen(self.load, 2))
        for name in ("rs", "rgc", "rgm"):
            object.__setattr__(self, name, _frozen(getattr(self, name), 1))

    @property
    def total_load(self) -> np.ndarray:
        return self.load.sum(axis=0)


@dataclass(frozen=True)
class ScenarioCase:
    grid: TimeGrid
    buses: tuple[int, ...]
    lines: tuple[Line, ...]
    generators: tuple[Generator, ...]
    offers: np.ndarray          # (G, T, 4): alpha_s, alpha_rs, alpha_rgc, alpha_rgm
    batteries: tuple[BatteryUnit, ...]
    profiles: SystemProfiles
    agc: np.ndarray             # (T, Z) system setpoints, MW
    price_floor: float = -250.0
    price_cap: float = 1000.0
    name: str = "scenario"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(int(b) for b in self.buses))
        object.__setattr__(self, "lines", tuple(self.lines))
        object.__setattr__(self, "generators", tuple(self.generators))
        object.__setattr__(self, "batteries", tuple(self.batteries))
        object.__setattr__(self, "offers", _frozen(self.offers, 3))
        object.__setattr__(self, "agc", _frozen(self.agc, 2))

    @property
    def bus_index(self) -> dict[int, int]:
        return {b: n for n, b in enumerate(self.buses)}

    @property
    def reference_bus(self) -> int:
        return min(self.buses)

    def with_batteries(self, batteries) -> "ScenarioCase":
        return replace(self, batteries=tuple(batteries))


# -- offers ---------------------------------------------------------------

def synthesize_offers(alpha_s, ratios=OFFER_RATIOS):
    """Ancillary price offers as fixed fractions of the energy offer.

    Returns ``(alpha_rs, alpha_rgc, alpha_rgm)`` with the shape of
    ``alpha_s``.
    """
    a = np.asarray(alpha_s, dtype=float)
    if np.any(a < 0):
        raise ValueError("energy offers must be non-negative")
    if any(r < 0 for r in ratios):
        raise ValueError("offer ratios must be non-negative")
    r_rs, r_rgc, r_rgm = ratios
    return r_rs * a, r_rgc * a, r_rgm * a


# -- validation -----------------------------------------------------------

def _connected(buses, lines) -> bool:
    if not buses:
        return False
    adj = {b: set() for b in buses}
    for ln in lines:
        if ln.from_bus in adj and ln.to_bus in adj:
            adj[ln.from_bus].add(ln.to_bus)
            adj[ln.to_bus].add(ln.from_bus)
    seen = {buses[0]}
    queue = deque([buses[0]])
    while queue:
        for w in adj[queue.popleft()]:
            if w not in seen:
                seen.add(w)
                queue.append(w)
    return len(seen) == len(buses)


def validate_case(case: ScenarioCase) -> list[str]:
    """Return a list of human-readable violations; empty means valid."""
    v: list[str] = []
    g = case.grid
    if g.interval_count < 1:
        v.append("time grid: interval count must be >= 1")
    if g.subinterval_hours <= 0 or g.interval_hours <= 0:
        v.append("time grid: spans must be positive")
    else:
        ratio = g.interval_hours / g.subinterval_hours
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio) or round(ratio) < 1:
            v.append("time grid: interval span not a multiple of sub-interval span")
    T, Z = g.T, g.Z
    buses = set(case.buses)
    if len(buses) != len(case.buses):
        v.append("duplicate bus ids")
    for k, ln in enumerate(case.lines):
        if ln.from_bus not in buses or ln.to_bus not in buses:
            v.append(f"line {k + 1}: unknown bus")
        if ln.from_bus == ln.to_bus:
            v.append(f"line {k + 1}: self loop")
        if not ln.susceptance > 0:
            v.append(f"line {k + 1}: susceptance must be > 0")
        if not ln.limit_mw > 0:
            v.append(f"line {k + 1}: thermal limit must be > 0")
    if len(case.buses) > 1 and not _connected(list(case.buses), case.lines):
        v.append("network not connected")
    if not case.generators:
        v.append("no generators")
    for j, gen in enumerate(case.generators):
        if gen.bus not in buses:
            v.append(f"generator {j + 1}: unknown bus {gen.bus}")
        if not 0 <= gen.pmin <= gen.pmax:
            v.append(f"generator {j + 1}: need 0 <= pmin <= pmax")
        if gen.rs_ramp < 0 or gen.rg_ramp < 0:
            v.append(f"generator {j + 1}: ramps must be >= 0")
    if case.offers.shape != (len(case.generators), T, 4):
        v.append(f"offers: expected shape {(len(case.generators), T, 4)}, got {case.offers.shape}")
    elif np.any(case.offers < 0):
        v.append("offers: negative generator price offer")
    for i, b in enumerate(case.batteries):
        tag = f"battery {i + 1}"
        if b.bus not in buses:
            v.append(f"{tag}: unknown bus {b.bus}")
        if not b.rate > 0:
            v.append(f"{tag}: P^Rate must be > 0")
        if not b.capacity > 0:
            v.append(f"{tag}: capacity must be > 0")
        if not 0 <= b.soc_min <= b.soc_max <= b.capacity:
            v.append(f"{tag}: need 0 <= SOC^Min <= SOC^Max <= capacity")
        if not b.soc_min <= b.soc_init <= b.soc_max:
            v.append(f"{tag}: SOC^Init out of range")
        if not 0 < b.eta <= 1:
            v.append(f"{tag}: efficiency must be in (0, 1]")
        if b.replacement_cost < 0:
            v.append(f"{tag}: replacement cost must be >= 0")
        if b.segment_count < 1:
            v.append(f"{tag}: segment count must be >= 1")
    p = case.profiles
    if p.load.shape != (len(case.buses), T):
        v.append(f"loads: expected shape {(len(case.buses), T)}, got {p.load.shape}")
    elif np.any(p.load < 0):
        v.append("loads: negative demand")
    for name in ("rs", "rgc", "rgm"):
        arr = getattr(p, name)
        if arr.shape != (T,):
            v.append(f"requirements {name}: expected {T} values, got {arr.shape}")
        elif np.any(arr < 0):
            v.append(f"requirements {name}: negative requirement")
    if case.agc.shape != (T, Z):
        v.append(f"agc: expected shape {(T, Z)}, got {case.agc.shape}")
    elif p.rgm.shape == (T,):
        from .agc import mileage_series
        mil = mileage_series(case.agc)
        bad = np.nonzero(np.abs(mil - p.rgm) > 1e-6 * np.maximum(1.0, p.rgm))[0]
        if bad.size:
            v.append(f"agc: mileage differs from R^RgM at interval {int(bad[0]) + 1}")
    if not case.price_floor < case.price_cap:
        v.append("price floor must be below price cap")
    if case.generators and p.load.shape == (len(case.buses), T) and p.rs.shape == (T,) \
            and p.rgc.shape == (T,):
        need = (p.total_load + p.rs + p.rgc).max(initial=0.0)
        have = sum(gen.pmax for gen in case.generators)
        if have < need - 1e-9:
            v.append(f"insufficient generation: {have:g} MW < peak need {need:g} MW")
    return v


# -- scenario files -------------------------------------------------------

MANIFEST_FILES = ("buses", "lines", "generators", "offers", "loads",
                  "requirements", "battery", "agc")


def _num(x: float) -> str:
    return repr(float(x))


def _read_csv(path: Path, columns: tuple[str, ...]) -> list[dict[str, str]]:
    if not path.exists():
        raise ScenarioError(f"{path}: file not found")
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        missing = [c for c in columns if c not in header]
        if missing:
            raise ScenarioError(f"{path}:1: missing columns {missing}")
        rows = []
        for row in reader:
            rows.append({k.strip(): (val or "").strip() for k, val in row.items() if k})
    return rows


def _field(row, key, path, lineno, conv=float):
    try:
        return conv(row[key])
    except (KeyError, ValueError) as exc:
        raise ScenarioError(f"{path}:{lineno}: bad value for {key!r}: {row.get(key)!r}") from exc


def read_manifest(path) -> dict[str, str]:
    path = Path(path)
    out = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioError(f"{path}:{lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        out[key] = val
    return out


def load_scenario(path, validate: bool = True) -> ScenarioCase:
    """Load a scenario from its manifest file (``key = path`` lines).

    Besides the eight CSV files the manifest may set ``name``,
    ``interval_hours``, ``price_floor``, ``price_cap`` and the battery
    aging parameters ``life_cycles``, ``reference_depth``,
    ``aging_exponent`` and ``segment_count``.
    """
    path = Path(path)
    man = read_manifest(path)
    base = path.parent
    missing = [k for k in MANIFEST_FILES if k not in man]
    if missing:
        raise ScenarioError(f"{path}: manifest lacks {missing}")
    files = {k: base / man[k] for k in MANIFEST_FILES}

    bus_rows = _read_csv(files["buses"], ("id",))
    buses = [_field(r, "id", files["buses"], i + 2, int) for i, r in enumerate(bus_rows)]

    lines = []
    for i, r in enumerate(_read_csv(files["lines"], ("from", "to", "susceptance", "limit_mw"))):
        f = files["lines"]
        lines.append(Line(_field(r, "from", f, i + 2, int), _field(r, "to", f, i + 2, int),
                          _field(r, "susceptance", f, i + 2), _field(r, "limit_mw", f, i + 2)))

    gens = []
    f = files["generators"]
    for i, r in enumerate(_read_csv(f, ("bus", "pmin", "pmax", "rs_ramp", "rg_ramp"))):
        gens.append(Generator(_field(r, "bus", f, i + 2, int), _field(r, "pmin", f, i + 2),
                              _field(r, "pmax", f, i + 2), _field(r, "rs_ramp", f, i + 2),
                              _field(r, "rg_ramp", f, i + 2)))
    if not gens:
        raise ScenarioError(f"{f}: no generators")

    f = files["requirements"]
    req_rows = _read_csv(f, ("t", "rs", "rgc", "rgm"))
    T = len(req_rows)
    if T == 0:
        raise ScenarioError(f"{f}: no intervals")
    rs, rgc, rgm = np.zeros(T), np.zeros(T), np.zeros(T)
    for i, r in enumerate(req_rows):
        t = _field(r, "t", f, i + 2, int) - 1
        if not 0 <= t < T:
            raise ScenarioError(f"{f}:{i + 2}: interval {t + 1} out of range")
        rs[t], rgc[t], rgm[t] = (_field(r, k, f, i + 2) for k in ("rs", "rgc", "rgm"))

    f = files["agc"]
    agc_rows = _read_csv(f, ("t", "z", "mw"))
    Z = max((_field(r, "z", f, i + 2, int) for i, r in enumerate(agc_rows)), default=0)
    if Z < 1:
        raise ScenarioError(f"{f}: no AGC samples")
    agc = np.full((T, Z), np.nan)
    for i, r in enumerate(agc_rows):
        t, z = _field(r, "t", f, i + 2, int) - 1, _field(r, "z", f, i + 2, int) - 1
        if not (0 <= t < T and 0 <= z < Z):
            raise ScenarioError(f"{f}:{i + 2}: index out of range")
        agc[t, z] = _field(r, "mw", f, i + 2)
    if np.isnan(agc).any():
        raise ScenarioError(f"{f}: missing AGC samples")

    bidx = {b: n for n, b in enumerate(buses)}
    f = files["loads"]
    load = np.zeros((len(buses), T))
    for i, r in enumerate(_read_csv(f, ("bus", "t", "mw"))):
        b, t = _field(r, "bus", f, i + 2, int), _field(r, "t", f, i + 2, int) - 1
        if b not in bidx or not 0 <= t < T:
            raise ScenarioError(f"{f}:{i + 2}: unknown bus or interval")
        load[bidx[b], t] = _field(r, "mw", f, i + 2)

    f = files["offers"]
    offers = np.full((len(gens), T, 4), np.nan)
    for i, r in enumerate(_read_csv(f, ("gen", "t", "alpha_s", "alpha_rs", "alpha_rgc", "alpha_rgm"))):
        j, t = _field(r, "gen", f, i + 2, int) - 1, _field(r, "t", f, i + 2, int) - 1
        if not (0 <= j < len(gens) and 0 <= t < T):
            raise ScenarioError(f"{f}:{i + 2}: unknown generator or interval")
        offers[j, t] = [_field(r, k, f, i + 2) for k in ("alpha_s", "alpha_rs", "alpha_rgc", "alpha_rgm")]
    if np.isnan(offers).any():
        raise ScenarioError(f"{f}: missing offers for some generator/interval")

    aging = {}
    for key, conv in (("life_cycles", float), ("reference_depth", float),
                      ("aging_exponent", float), ("segment_count", int)):
        if key in man:
            aging[key] = conv(man[key])
    bats = []
    f = files["battery"]
    for i, r in enumerate(_read_csv(f, ("bus", "rate", "capacity", "soc_min", "soc_max",
                                        "soc_init", "eta", "replacement_cost"))):
        vals = {k: _field(r, k, f, i + 2) for k in ("rate", "capacity", "soc_min", "soc_max",
                                                   "soc_init", "eta", "replacement_cost")}
        bats.append(BatteryUnit(bus=_field(r, "bus", f, i + 2, int), **vals, **aging))

    dt = float(man.get("interval_hours", 0.25))
    grid = build_time_grid(dt, dt / Z, T)
    case = ScenarioCase(
        grid=grid, buses=tuple(buses), lines=tuple(lines), generators=tuple(gens),
        offers=offers, batteries=tuple(bats),
        profiles=SystemProfiles(load, rs, rgc, rgm), agc=agc,
        price_floor=float(man.get("price_floor", -250.0)),
        price_cap=float(man.get("price_cap", 1000.0)),
        name=man.get("name", path.stem),
    )
    if validate:
        bad = validate_case(case)
        if bad:
            raise ScenarioError(f"{path}: scenario failed validation: {bad[0]}", bad)
    return case


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def save_scenario(case: ScenarioCase, directory, manifest_name: str = "scenario.manifest") -> Path:
    """Write the case as CSV files plus a manifest; returns the manifest path.

    Floats are written with ``repr`` so a reload is bit-identical.
    """
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    T, Z = case.grid.T, case.grid.Z
    _write_csv(d / "buses.csv", ["id"], [[b] for b in case.buses])
    _write_csv(d / "lines.csv", ["from", "to", "susceptance", "limit_mw"],
               [[ln.from_bus, ln.to_bus, _num(ln.susceptance), _num(ln.limit_mw)] for ln in case.lines])
    _write_csv(d / "generators.csv", ["bus", "pmin", "pmax", "rs_ramp", "rg_ramp"],
               [[g.bus, _num(g.pmin), _num(g.pmax), _num(g.rs_ramp), _num(g.rg_ramp)]
                for g in case.generators])
    _write_csv(d / "offers.csv", ["gen", "t", "alpha_s", "alpha_rs", "alpha_rgc", "alpha_rgm"],
               [[j + 1, t + 1, *(_num(x) for x in case.offers[j, t])]
                for j in range(len(case.generators)) for t in range(T)])
    _write_csv(d / "loads.csv", ["bus", "t", "mw"],
               [[b, t + 1, _num(case.profiles.load[n, t])]
                for n, b in enumerate(case.buses) for t in range(T)])
    p = case.profiles
    _write_csv(d / "requirements.csv", ["t", "rs", "rgc", "rgm"],
               [[t + 1, _num(p.rs[t]), _num(p.rgc[t]), _num(p.rgm[t])] for t in range(T)])
    _write_csv(d / "battery.csv", ["bus", "rate", "capacity", "soc_min", "soc_max", "soc_init",
                                   "eta", "replacement_cost"],
               [[b.bus, *(_num(getattr(b, k)) for k in ("rate", "capacity", "soc_min", "soc_max",
                                                       "soc_init", "eta", "replacement_cost"))]
                for b in case.batteries])
    _write_csv(d / "agc.csv", ["t", "z", "mw"],
               [[t + 1, z + 1, _num(case.agc[t, z])] for t in range(T) for z in range(Z)])
    lines = [f"name = {case.name}", f"interval_hours = {_num(case.grid.interval_hours)}",
             f"price_floor = {_num(case.price_floor)}", f"price_cap = {_num(case.price_cap)}"]
    if case.batteries:
        b0 = case.batteries[0]
        lines += [f"life_cycles = {_num(b0.life_cycles)}",
                  f"reference_depth = {_num(b0.reference_depth)}",
                  f"aging_exponent = {_num(b0.aging_exponent)}",
                  f"segment_count = {b0.segment_count}"]
    lines += [f"{k} = {k}.csv" for k in MANIFEST_FILES]
    manifest = d / manifest_name
    manifest.write_text("\n".join(lines) + "\n")
    return manifest


def bundled_path(*parts) -> Path:
    """Path inside the package's bundled data directory."""
    return Path(__file__).parent.joinpath("data", *parts)


def table_one_battery(bus: int = 1, **overrides) -> BatteryUnit:
    """The 50 MW / 200 MWh lithium-ion unit used in the base case."""
    params = dict(bus=bus, rate=50.0, capacity=200.0, soc_min=20.0, soc_max=180.0,
                  soc_init=90.0, eta=0.95, replacement_cost=200_000.0)
    params.update(overrides)
    return BatteryUnit(**params)

