from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
TIME_LIMIT = "time_limit"
ERROR = "error"


class SolverError(RuntimeError):
    """Solver process failed, produced unreadable output, or lost variables."""


@dataclass
class SolveOptions:
    gap: float = 1e-3
    time_limit: float | None = None
    threads: int = 1


@dataclass
class SolveRequest:
    model: object
    options: SolveOptions = field(default_factory=SolveOptions)
    indicators: list | None = None


@dataclass
class SolveResult:
    status: str
    objective: float = float("nan")
    x: np.ndarray | None = None
    duals: np.ndarray | None = None
    gap: float | None = None
    log: str = ""

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL

    @property
    def has_solution(self) -> bool:
        return self.x is not None and self.status in (OPTIMAL, TIME_LIMIT)
