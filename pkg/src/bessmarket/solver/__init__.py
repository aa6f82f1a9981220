"""Solver abstraction: MPS interchange, external processes, reference oracles."""

from .bnb import reference_bnb
from .external import cbc_command, find_cbc, run_external
from .mps import read_mps, write_mps
from .result import (ERROR, INFEASIBLE, OPTIMAL, TIME_LIMIT, UNBOUNDED,
                     SolveOptions, SolveRequest, SolveResult, SolverError)
from .simplex import reference_simplex

write_interchange = write_mps

__all__ = [
    "ERROR", "INFEASIBLE", "OPTIMAL", "TIME_LIMIT", "UNBOUNDED",
    "SolveOptions", "SolveRequest", "SolveResult", "SolverError",
    "cbc_command", "find_cbc", "read_mps", "reference_bnb", "reference_simplex",
    "run_external", "write_interchange", "write_mps",
]
