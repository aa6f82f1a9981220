"""Bilevel bidding model: owner constraints, KKT reformulation, MILP."""

from .assemble import (BilevelConfig, BilevelSolution, MilpModel, VerificationError, assemble,
                       assemble_and_solve, extract_solution, run_case, verify_solution,
                       write_solution_csvs)
from .kkt import KktError, KktSystem, build_kkt
from .linearize import (SurrogateRevenue, column_bounds, dual_bound, linearize_complementarity,
                        linearize_objective, slack_bounds)
from .ulp import UlpError, UlpVariables, build_ulp

__all__ = [
    "BilevelConfig", "BilevelSolution", "KktError", "KktSystem", "MilpModel", "SurrogateRevenue",
    "UlpError", "UlpVariables", "VerificationError", "assemble", "assemble_and_solve",
    "build_kkt", "build_ulp", "column_bounds", "dual_bound", "extract_solution",
    "linearize_complementarity", "linearize_objective", "run_case", "slack_bounds",
    "verify_solution", "write_solution_csvs",
]
