"""Desk-scale LP/MILP solving: bounded simplex, branch and bound, MPS I/O."""
from __future__ import annotations

from .bnb import BnbOptions, branch_and_bound
from .lp import (
    INFEASIBLE,
    NODE_LIMIT,
    NUMERICAL,
    OPTIMAL,
    UNBOUNDED,
    LpProblem,
    LpSolution,
    SolverError,
)
from .mps import read_mps, write_mps
from .simplex import simplex_solve

BACKENDS = ("simplex", "highs")


def solve_lp(prob: LpProblem, backend: str = "simplex") -> LpSolution:
    """Solve a continuous LP.

    ``backend="simplex"`` uses the in-repo two-phase bounded simplex;
    ``"highs"`` delegates to scipy's HiGHS bindings.
    """
    if backend == "simplex":
        return simplex_solve(prob)
    if backend == "highs":
        from .highs import highs_lp

        return highs_lp(prob)
    raise ValueError(f"unknown backend {backend!r}; expected one of {BACKENDS}")


def solve_milp(prob: LpProblem, binaries, opts: BnbOptions | None = None, backend: str = "simplex") -> LpSolution:
    """Solve with the listed columns restricted to {0, 1}."""
    opts = opts or BnbOptions()
    if backend == "simplex":
        return branch_and_bound(prob, binaries, opts)
    if backend == "highs":
        from .highs import highs_milp

        return highs_milp(prob, binaries, rel_gap=opts.rel_gap)
    raise ValueError(f"unknown backend {backend!r}; expected one of {BACKENDS}")


__all__ = [
    "BACKENDS",
    "BnbOptions",
    "INFEASIBLE",
    "LpProblem",
    "LpSolution",
    "NODE_LIMIT",
    "NUMERICAL",
    "OPTIMAL",
    "SolverError",
    "UNBOUNDED",
    "read_mps",
    "solve_lp",
    "solve_milp",
    "write_mps",
]
