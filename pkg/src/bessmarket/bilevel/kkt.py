"""KKT system of the clearing LP with battery bids as parameters.

For ``min c(beta)'x  s.t.  A x >= b(Q)`` (plus equality rows) with free
columns, the optimality conditions are

* stationarity ``c(beta) - A'y = 0`` (one row per column),
* dual feasibility ``y >= 0`` on inequality rows, free on equalities,
* complementarity ``y_r * (A_r x - b_r) = 0`` on inequality rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from ..clearing import LpModel


class KktError(ValueError):
    pass


@dataclass
class KktSystem:
    llp: LpModel
    A: sparse.csr_matrix
    sense: np.ndarray
    c0: np.ndarray
    b0: np.ndarray
    ineq_rows: np.ndarray
    eq_rows: np.ndarray

    @property
    def n_stationarity(self) -> int:
        return self.A.shape[1]

    @property
    def n_pairs(self) -> int:
        return int(self.ineq_rows.size)

    def cost(self, beta) -> np.ndarray:
        c = self.c0.copy()
        for col, i, t, k, scale in self.llp.cost_links:
            c[col] += scale * beta[i, t, k]
        return c

    def rhs(self, q) -> np.ndarray:
        b = self.b0.copy()
        for row, i, t, k, coef in self.llp.rhs_links:
            b[row] += coef * q[i, t, k]
        return b

    def stationarity(self, y, beta) -> np.ndarray:
        return self.cost(beta) - self.A.T @ y

    def slacks(self, x, q) -> np.ndarray:
        return self.A @ x - self.rhs(q)


def build_kkt(llp: LpModel) -> KktSystem:
    A = llp.lp.matrix()
    sense = np.asarray(llp.lp.sense)
    if len(llp.family) != llp.lp.n_rows:
        raise KktError("untagged rows in the clearing model")
    if np.any(sense == "L"):
        raise KktError("clearing rows must be written as >= or =")
    ineq = np.nonzero(sense == "G")[0]
    eq = np.nonzero(sense == "E")[0]
    return KktSystem(llp, A, sense, llp.c0.copy(), llp.b0.copy(), ineq, eq)
