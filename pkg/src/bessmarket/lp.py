"""Sparse linear/mixed-integer model container shared by the clearing LP,
the bilevel MILP and the solver back ends.

Rows are stored as COO triplets while the model is being built and frozen
into CSR on demand. Senses are single letters: ``G`` (>=), ``L`` (<=),
``E`` (=). The objective is always minimised.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

INF = float("inf")


@dataclass
class LinearModel:
    name: str = "model"
    col_names: list[str] = field(default_factory=list)
    lb: list[float] = field(default_factory=list)
    ub: list[float] = field(default_factory=list)
    cost: list[float] = field(default_factory=list)
    integer: list[bool] = field(default_factory=list)
    row_names: list[str] = field(default_factory=list)
    sense: list[str] = field(default_factory=list)
    rhs: list[float] = field(default_factory=list)
    obj_constant: float = 0.0
    _ri: list[int] = field(default_factory=list, repr=False)
    _ci: list[int] = field(default_factory=list, repr=False)
    _v: list[float] = field(default_factory=list, repr=False)
    _col_index: dict[str, int] = field(default_factory=dict, repr=False)
    _row_index: dict[str, int] = field(default_factory=dict, repr=False)

    # -- building -------------------------------------------------------
    def add_var(self, name: str, lb: float = 0.0, ub: float = INF,
                cost: float = 0.0, integer: bool = False) -> int:
        if name in self._col_index:
            raise ValueError(f"duplicate column name {name!r}")
        j = len(self.col_names)
        self._col_index[name] = j
        self.col_names.append(name)
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.cost.append(float(cost))
        self.integer.append(bool(integer))
        return j

    def add_binary(self, name: str) -> int:
        return self.add_var(name, 0.0, 1.0, integer=True)

    def add_row(self, name: str, terms, sense: str, rhs: float) -> int:
        """Add ``sum(coef * x[col]) <sense> rhs``; ``terms`` is an iterable
        of ``(col, coef)`` pairs or a ``{col: coef}`` mapping. Repeated
        columns are summed."""
        if sense not in ("G", "L", "E"):
            raise ValueError(f"bad sense {sense!r}")
        if name in self._row_index:
            raise ValueError(f"duplicate row name {name!r}")
        r = len(self.row_names)
        self._row_index[name] = r
        self.row_names.append(name)
        self.sense.append(sense)
        self.rhs.append(float(rhs))
        items = terms.items() if isinstance(terms, dict) else terms
        for c, v in items:
            if v != 0.0:
                self._ri.append(r)
                self._ci.append(int(c))
                self._v.append(float(v))
        return r

    def set_cost(self, col: int, value: float) -> None:
        self.cost[col] = float(value)

    # -- queries --------------------------------------------------------
    @property
    def n_cols(self) -> int:
        return len(self.col_names)

    @property
    def n_rows(self) -> int:
        return len(self.row_names)

    @property
    def n_integer(self) -> int:
        return sum(self.integer)

    def col(self, name: str) -> int:
        return self._col_index[name]

    def row(self, name: str) -> int:
        return self._row_index[name]

    def has_col(self, name: str) -> bool:
        return name in self._col_index

    def matrix(self) -> sparse.csr_matrix:
        a = sparse.coo_matrix((self._v, (self._ri, self._ci)),
                              shape=(self.n_rows, self.n_cols))
        return a.tocsr()

    def arrays(self):
        """``(c, A, sense, rhs, lb, ub, integrality)`` as numpy/scipy objects."""
        return (np.asarray(self.cost, dtype=float), self.matrix(),
                np.asarray(self.sense), np.asarray(self.rhs, dtype=float),
                np.asarray(self.lb, dtype=float), np.asarray(self.ub, dtype=float),
                np.asarray(self.integer, dtype=bool))

    def objective(self, x) -> float:
        return float(np.dot(self.cost, x)) + self.obj_constant

    def row_activity(self, x) -> np.ndarray:
        return self.matrix() @ np.asarray(x, dtype=float)

    def max_violation(self, x) -> float:
        """Largest primal infeasibility (rows and bounds) of point ``x``."""
        x = np.asarray(x, dtype=float)
        act = self.row_activity(x)
        rhs = np.asarray(self.rhs)
        sense = np.asarray(self.sense)
        v = np.zeros_like(act)
        g, l, e = sense == "G", sense == "L", sense == "E"
        v[g] = np.maximum(rhs[g] - act[g], 0.0)
        v[l] = np.maximum(act[l] - rhs[l], 0.0)
        v[e] = np.abs(act[e] - rhs[e])
        bv = np.maximum(np.asarray(self.lb) - x, 0.0)
        bv = np.maximum(bv, np.maximum(x - np.asarray(self.ub), 0.0))
        return float(max(v.max(initial=0.0), bv.max(initial=0.0)))

    def copy(self) -> "LinearModel":
        m = LinearModel(self.name)
        for attr in ("col_names", "lb", "ub", "cost", "integer", "row_names",
                     "sense", "rhs", "_ri", "_ci", "_v"):
            setattr(m, attr, list(getattr(self, attr)))
        m.obj_constant = self.obj_constant
        m._col_index = dict(self._col_index)
        m._row_index = dict(self._row_index)
        return m

    def relaxed(self) -> "LinearModel":
        m = self.copy()
        m.integer = [False] * m.n_cols
        return m

    @classmethod
    def from_arrays(cls, c, A, sense, rhs, lb, ub, integrality=None, *,
                    col_names=None, row_names=None, name="model") -> "LinearModel":
        A = sparse.coo_matrix(A)
        n_rows, n_cols = A.shape
        m = cls(name)
        col_names = col_names or [f"x{j}" for j in range(n_cols)]
        row_names = row_names or [f"r{i}" for i in range(n_rows)]
        integrality = integrality if integrality is not None else [False] * n_cols
        for j in range(n_cols):
            m.add_var(col_names[j], lb[j], ub[j], c[j], bool(integrality[j]))
        by_row: list[list[tuple[int, float]]] = [[] for _ in range(n_rows)]
        for i, j, v in zip(A.row, A.col, A.data):
            by_row[int(i)].append((int(j), float(v)))
        for i in range(n_rows):
            m.add_row(row_names[i], by_row[i], str(sense[i]), rhs[i])
        return m
