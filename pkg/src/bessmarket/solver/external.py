"""File-based coupling to an external LP/MILP solver.

The solver is configured as a shell-style command template with
``{model}`` and ``{solution}`` placeholders (``{gap}``, ``{time_limit}`` and
``{threads}`` are optional). Resolution order: explicit argument, the
``BESS_SOLVER_CMD`` environment variable, then the bundled HiGHS runner.

Two solution formats are understood:

* CBC native (``-solu`` output, ideally with ``-printingOptions all`` so
  row duals are included), e.g.::

      Optimal - objective value 3.00000000
            0 c1                     3                       1
            0 x                      3                       0

* generic ``name value`` lines, optionally preceded by ``status``,
  ``objective`` and ``gap`` lines and split into ``[columns]`` and
  ``[duals]`` sections (written by :mod:`bessmarket.solver.runner`).
"""

from __future__ import annotations

import os
import shlex
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np

from .mps import write_mps
from .result import (ERROR, INFEASIBLE, OPTIMAL, TIME_LIMIT, UNBOUNDED,
                     SolveRequest, SolveResult, SolverError)

ENV_VAR = "BESS_SOLVER_CMD"
CBC_TEMPLATE = ("{cbc} {model} -ratioGap {gap} -sec {time_limit} -threads {threads} "
                "-printingOptions all -solve -solu {solution}")


def default_command() -> str:
    return (f"{shlex.quote(sys.executable)} -m bessmarket.solver.runner {{model}} {{solution}} "
            "--gap {gap} --time-limit {time_limit}")


def find_cbc() -> str | None:
    """Locate a CBC binary on PATH or inside an installed PuLP wheel."""
    exe = shutil.which("cbc")
    if exe:
        return exe
    try:
        import pulp  # noqa: F401  (only used to find its bundled binary)
    except ImportError:
        return None
    base = Path(pulp.__file__).parent / "solverdir" / "cbc" / "linux" / "i64" / "cbc"
    return str(base) if base.exists() else None


def cbc_command(cbc: str | None = None) -> str:
    cbc = cbc or find_cbc()
    if cbc is None:
        raise SolverError("no CBC binary found")
    return CBC_TEMPLATE.replace("{cbc}", shlex.quote(cbc))


def resolve_command(command_template: str | None = None) -> str:
    return command_template or os.environ.get(ENV_VAR) or default_command()


def _status_word(text: str) -> str:
    t = text.lower()
    if t.startswith("optimal"):
        return OPTIMAL
    if "infeasible" in t:
        return INFEASIBLE
    if "unbounded" in t:
        return UNBOUNDED
    if t.startswith("stopped"):
        return TIME_LIMIT
    return ERROR


def parse_cbc_solution(text: str, col_names, row_names):
    """Return ``(status, objective, values, duals)``; values/duals are
    name -> float dicts. With ``-printingOptions all`` CBC lists every row
    (activity, dual) before the columns (value, reduced cost)."""
    lines = text.splitlines()
    if not lines:
        raise SolverError("empty CBC solution file")
    head = lines[0]
    status = _status_word(head)
    obj = float("nan")
    if "objective value" in head:
        obj = float(head.split("objective value")[1].split()[0])
    entries = []
    for line in lines[1:]:
        tok = line.replace("**", " ").split()
        if len(tok) >= 3:
            entries.append(tok)
    n_rows = len(row_names)
    row_block = entries[:n_rows] if len(entries) == n_rows + len(col_names) else []
    col_block = entries[len(row_block):]
    duals = {tok[1]: float(tok[3]) for tok in row_block if len(tok) > 3}
    values = {tok[1]: float(tok[2]) for tok in col_block}
    return status, obj, values, duals


def parse_generic_solution(text: str):
    status, obj, gap = OPTIMAL, float("nan"), None
    values, duals = {}, {}
    target = values
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line == "[columns]":
            target = values
            continue
        if line == "[duals]":
            target = duals
            continue
        tok = line.split()
        if len(tok) != 2:
            raise SolverError(f"unparsable solution line {line!r}")
        key, val = tok
        if target is values and key == "status":
            status = val
            continue
        if target is values and key == "objective":
            obj = float(val)
            continue
        if target is values and key == "gap":
            gap = float(val)
            continue
        target[key] = float(val)
    return status, obj, values, duals, gap


def run_external(request: SolveRequest, command_template: str | None = None,
                 fmt: str = "auto", keep_dir: str | None = None) -> SolveResult:
    """Write the request's model as MPS, run the solver command, parse the
    solution file and map names back to column/row positions."""
    model = request.model
    template = resolve_command(command_template)
    if "{model}" not in template or "{solution}" not in template:
        raise SolverError("command template needs {model} and {solution} placeholders")
    opts = request.options
    with tempfile.TemporaryDirectory(prefix="bess_solve_", dir=keep_dir) as tmp:
        mps_path = Path(tmp) / "model.mps"
        sol_path = Path(tmp) / "model.sol"
        write_mps(model, mps_path, indicators=request.indicators)
        cmd = template.format(model=shlex.quote(str(mps_path)),
                              solution=shlex.quote(str(sol_path)),
                              gap=opts.gap,
                              time_limit=opts.time_limit if opts.time_limit else 1e9,
                              threads=opts.threads)
        proc = subprocess.run(cmd, shell=True, capture_output=True, text=True)
        log = (proc.stdout + proc.stderr)[-4000:]
        if proc.returncode != 0:
            raise SolverError(f"solver exited with {proc.returncode}: {log[-800:]}")
        if not sol_path.exists():
            raise SolverError(f"solver wrote no solution file: {log[-800:]}")
        text = sol_path.read_text()
    gap = None
    if fmt == "auto":
        first = text.lstrip().split("\n", 1)[0]
        fmt = "generic" if first.startswith("status") or first.startswith("[") else "cbc"
    if fmt == "cbc":
        status, obj, values, duals = parse_cbc_solution(text, model.col_names, model.row_names)
    elif fmt == "generic":
        status, obj, values, duals, gap = parse_generic_solution(text)
    else:
        raise SolverError(f"unknown solution format {fmt!r}")
    if status not in (OPTIMAL, TIME_LIMIT):
        return SolveResult(status, log=log)
    if not values and status == TIME_LIMIT:
        return SolveResult(status, log=log)
    missing = [n for n in model.col_names if n not in values]
    if missing:
        raise SolverError(f"solution lacks {len(missing)} variables, e.g. {missing[:3]}")
    x = np.array([values[n] for n in model.col_names])
    dual_arr = None
    if duals and not model.n_integer:
        dual_arr = np.array([duals.get(n, 0.0) for n in model.row_names])
    # recompute: CBC's header drops any objective constant
    return SolveResult(status, model.objective(x), x, dual_arr, gap, log)
