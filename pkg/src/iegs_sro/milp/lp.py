"""Problem and solution containers shared by the LP and MILP solvers."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
NODE_LIMIT = "node_limit"
NUMERICAL = "numerical"


class SolverError(RuntimeError):
    """Raised when the simplex cannot certify a status (numerical breakdown)."""


@dataclass
class LpProblem:
    """``min c @ x + offset`` subject to ``A x (<=|>=|=) rhs`` and ``lb <= x <= ub``.

    ``senses`` holds one of ``"L"``, ``"G"``, ``"E"`` per row. Infinite bounds
    mark free directions.
    """

    c: np.ndarray
    A: np.ndarray
    senses: np.ndarray
    rhs: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    offset: float = 0.0
    col_names: list[str] | None = None
    row_names: list[str] | None = None
    name: str = "LP"

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.size
        self.A = np.asarray(self.A, dtype=float).reshape(-1, n)
        m = self.A.shape[0]
        self.senses = np.asarray(self.senses, dtype="<U1").ravel()
        self.rhs = np.asarray(self.rhs, dtype=float).ravel()
        self.lb = np.asarray(self.lb, dtype=float).ravel()
        self.ub = np.asarray(self.ub, dtype=float).ravel()
        if self.senses.size != m or self.rhs.size != m:
            raise ValueError("senses/rhs length must equal the number of rows")
        if self.lb.size != n or self.ub.size != n:
            raise ValueError("bounds length must equal the number of columns")
        if not set(self.senses.tolist()) <= {"L", "G", "E"}:
            raise ValueError("senses must be L, G or E")
        if np.any(self.lb > self.ub):
            raise ValueError("lower bound exceeds upper bound")
        if np.any(np.isnan(self.A)) or np.any(np.isnan(self.rhs)) or np.any(np.isnan(self.c)):
            raise ValueError("NaN in problem data")

    @property
    def shape(self):
        return self.A.shape

    def residual(self, x: np.ndarray) -> float:
        """Largest constraint or bound violation of ``x``."""
        ax = self.A @ x
        viol = np.zeros(len(self.rhs))
        le = self.senses == "L"
        ge = self.senses == "G"
        eq = self.senses == "E"
        viol[le] = np.maximum(ax[le] - self.rhs[le], 0.0)
        viol[ge] = np.maximum(self.rhs[ge] - ax[ge], 0.0)
        viol[eq] = np.abs(ax[eq] - self.rhs[eq])
        bound = np.maximum(self.lb - x, 0.0).max(initial=0.0)
        bound = max(bound, np.maximum(x - self.ub, 0.0).max(initial=0.0))
        return float(max(viol.max(initial=0.0), bound))

    def objective(self, x: np.ndarray) -> float:
        return float(self.c @ x + self.offset)


@dataclass
class LpSolution:
    status: str
    x: np.ndarray | None = None
    objective: float = float("nan")
    iterations: int = 0
    duals: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    infeasible_rows: list[int] = field(default_factory=list)
    # MILP only
    bound: float = float("nan")
    gap: float = float("nan")
    nodes: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL
