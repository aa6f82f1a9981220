"""Free-format MPS writer and reader.

Section order is fixed: NAME, ROWS, COLUMNS, RHS, RANGES, BOUNDS, ENDATA.
Integer columns sit between ``MARKER INTORG``/``MARKER INTEND`` lines.
Numbers are written with ``repr`` so every float survives a round trip.
The NAME line carries the ``FREE`` tag that COIN-OR readers need to switch
to free-format parsing.
An optional INDICATORS section (CPLEX/Gurobi extension) carries
indicator constraints when the big-M switch is turned off.
"""

from __future__ import annotations

import math
from collections import defaultdict
from pathlib import Path

from ..lp import INF, LinearModel

OBJ_ROW = "OBJ"


class MpsError(ValueError):
    pass


def _num(v: float) -> str:
    if v == math.inf:
        return "1e+30"
    if v == -math.inf:
        return "-1e+30"
    r = repr(float(v))
    return r[:-2] if r.endswith(".0") else r


def _parse_num(text: str) -> float:
    v = float(text)
    if v >= 1e30:
        return INF
    if v <= -1e30:
        return -INF
    return v


def write_mps(model: LinearModel, path, indicators=None) -> Path:
    """Write ``model`` to ``path``. ``indicators`` is an optional list of
    ``(row_name, binary_col_name, value)`` triples."""
    path = Path(path)
    A = model.matrix().tocsc()
    lines = [f"NAME {model.name} FREE", "ROWS", f" N {OBJ_ROW}"]
    for name, s in zip(model.row_names, model.sense):
        lines.append(f" {s} {name}")
    lines.append("COLUMNS")
    in_int = False
    marker = 0
    for j, cname in enumerate(model.col_names):
        is_int = model.integer[j]
        if is_int and not in_int:
            lines.append(f" MARKER{marker} 'MARKER' 'INTORG'")
            marker += 1
            in_int = True
        elif not is_int and in_int:
            lines.append(f" MARKER{marker} 'MARKER' 'INTEND'")
            marker += 1
            in_int = False
        entries = []
        if model.cost[j] != 0.0:
            entries.append((OBJ_ROW, model.cost[j]))
        start, end = A.indptr[j], A.indptr[j + 1]
        for i, v in zip(A.indices[start:end], A.data[start:end]):
            entries.append((model.row_names[i], v))
        if not entries:
            # keep the column declared even if it has no coefficients
            entries.append((OBJ_ROW, 0.0))
        for rname, v in entries:
            lines.append(f" {cname} {rname} {_num(v)}")
    if in_int:
        lines.append(f" MARKER{marker} 'MARKER' 'INTEND'")
    lines.append("RHS")
    for name, r in zip(model.row_names, model.rhs):
        if r != 0.0:
            lines.append(f" RHS {name} {_num(r)}")
    if model.obj_constant != 0.0:
        lines.append(f" RHS {OBJ_ROW} {_num(-model.obj_constant)}")
    lines.append("RANGES")
    lines.append("BOUNDS")
    for j, cname in enumerate(model.col_names):
        lo, hi = model.lb[j], model.ub[j]
        if model.integer[j] and lo == 0.0 and hi == 1.0:
            lines.append(f" BV BND {cname}")
        elif lo == -INF and hi == INF:
            lines.append(f" FR BND {cname}")
        elif lo == hi:
            lines.append(f" FX BND {cname} {_num(lo)}")
        else:
            if lo == -INF:
                lines.append(f" MI BND {cname}")
            elif lo != 0.0 or model.integer[j]:
                lines.append(f" LO BND {cname} {_num(lo)}")
            if hi != INF:
                lines.append(f" UP BND {cname} {_num(hi)}")
            elif model.integer[j]:
                lines.append(f" PL BND {cname}")
    if indicators:
        lines.append("INDICATORS")
        for rname, bname, val in indicators:
            lines.append(f" IF {rname} {bname} {int(val)}")
    lines.append("ENDATA")
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise MpsError(f"cannot write {path}: {exc}") from exc
    return path


def read_mps(path) -> tuple[LinearModel, list[tuple[str, str, int]]]:
    """Parse a free-format MPS file. Returns the model and the (possibly
    empty) list of indicator triples."""
    path = Path(path)
    name = path.stem
    rows: list[tuple[str, str]] = []
    obj_name = None
    cols: dict[str, dict] = {}
    col_order: list[str] = []
    rhs: dict[str, float] = {}
    ranges: dict[str, float] = {}
    bounds: list[tuple[str, str, float | None]] = []
    indicators: list[tuple[str, str, int]] = []
    section = None
    in_int = False
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.rstrip()
        if not line or line.startswith("*"):
            continue
        if not line[0].isspace():
            tok = line.split()
            section = tok[0].upper()
            if section == "NAME":
                name = tok[1] if len(tok) > 1 else name
            elif section == "ENDATA":
                break
            elif section not in ("ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS",
                                 "INDICATORS", "OBJSENSE"):
                raise MpsError(f"{path}:{lineno}: unknown section {section}")
            continue
        tok = line.split()
        try:
            if section == "ROWS":
                s, rname = tok[0].upper(), tok[1]
                if s == "N":
                    if obj_name is None:
                        obj_name = rname
                else:
                    rows.append((rname, s))
            elif section == "COLUMNS":
                if len(tok) >= 3 and tok[1].strip("'\"").upper() == "MARKER":
                    kind = tok[2].strip("'\"").upper()
                    in_int = kind == "INTORG"
                    continue
                cname = tok[0]
                if cname not in cols:
                    cols[cname] = {"int": in_int, "entries": {}}
                    col_order.append(cname)
                for k in range(1, len(tok) - 1, 2):
                    ent = cols[cname]["entries"]
                    ent[tok[k]] = ent.get(tok[k], 0.0) + float(tok[k + 1])
            elif section == "RHS":
                pairs = tok[1:] if len(tok) % 2 == 1 else tok
                for k in range(0, len(pairs) - 1, 2):
                    rhs[pairs[k]] = float(pairs[k + 1])
            elif section == "RANGES":
                pairs = tok[1:] if len(tok) % 2 == 1 else tok
                for k in range(0, len(pairs) - 1, 2):
                    ranges[pairs[k]] = float(pairs[k + 1])
            elif section == "BOUNDS":
                kind = tok[0].upper()
                if kind in ("FR", "MI", "PL", "BV"):
                    bounds.append((kind, tok[2] if len(tok) > 2 else tok[1], None))
                else:
                    bounds.append((kind, tok[2], _parse_num(tok[3])))
            elif section == "INDICATORS":
                indicators.append((tok[1], tok[2], int(float(tok[3]))))
        except (IndexError, ValueError) as exc:
            raise MpsError(f"{path}:{lineno}: cannot parse {line!r}") from exc
    if ranges:
        raise MpsError(f"{path}: RANGES entries are not supported")

    model = LinearModel(name)
    for cname in col_order:
        c = cols[cname]
        lo, hi = (0.0, INF)
        model.add_var(cname, lo, hi, c["entries"].get(obj_name, 0.0), c["int"])
    for kind, cname, val in bounds:
        j = model.col(cname)
        if kind == "UP":
            model.ub[j] = val
            if val < 0 and model.lb[j] == 0.0:
                model.lb[j] = -INF
        elif kind == "LO":
            model.lb[j] = val
        elif kind == "FX":
            model.lb[j] = model.ub[j] = val
        elif kind == "FR":
            model.lb[j], model.ub[j] = -INF, INF
        elif kind == "MI":
            model.lb[j] = -INF
        elif kind == "PL":
            model.ub[j] = INF
        elif kind == "BV":
            model.lb[j], model.ub[j] = 0.0, 1.0
            model.integer[j] = True
        else:
            raise MpsError(f"{path}: unsupported bound type {kind}")
    for j, cname in enumerate(col_order):
        if model.integer[j] and model.ub[j] == INF and not any(
                b[1] == cname and b[0] in ("UP", "PL", "FR") for b in bounds):
            # MPS convention: integer columns without bounds are binary
            model.ub[j] = 1.0
    by_row: dict[str, list[tuple[int, float]]] = defaultdict(list)
    for j, cname in enumerate(col_order):
        for rname, v in cols[cname]["entries"].items():
            if rname != obj_name:
                by_row[rname].append((j, v))
    for rname, s in rows:
        model.add_row(rname, by_row.get(rname, []), s, rhs.get(rname, 0.0))
    if obj_name is not None and obj_name in rhs:
        model.obj_constant = -rhs[obj_name]
    return model, indicators
