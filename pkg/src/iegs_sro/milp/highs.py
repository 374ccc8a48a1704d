"""HiGHS backend through :mod:`scipy.optimize`, used for cross-checks and large runs."""
from __future__ import annotations

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from .lp import INFEASIBLE, NUMERICAL, OPTIMAL, UNBOUNDED, LpProblem, LpSolution


def _ub_eq(prob: LpProblem):
    le, ge, eq = prob.senses == "L", prob.senses == "G", prob.senses == "E"
    A_ub = np.vstack([prob.A[le], -prob.A[ge]])
    b_ub = np.concatenate([prob.rhs[le], -prob.rhs[ge]])
    return A_ub, b_ub, prob.A[eq], prob.rhs[eq]


def highs_lp(prob: LpProblem) -> LpSolution:
    A_ub, b_ub, A_eq, b_eq = _ub_eq(prob)
    res = linprog(
        prob.c,
        A_ub=A_ub if len(b_ub) else None,
        b_ub=b_ub if len(b_ub) else None,
        A_eq=A_eq if len(b_eq) else None,
        b_eq=b_eq if len(b_eq) else None,
        bounds=list(zip(prob.lb, prob.ub)),
        method="highs",
    )
    if res.status == 0:
        return LpSolution(status=OPTIMAL, x=res.x, objective=prob.objective(res.x), iterations=int(res.nit))
    if res.status == 2:
        return LpSolution(status=INFEASIBLE)
    if res.status == 3:
        return LpSolution(status=UNBOUNDED)
    return LpSolution(status=NUMERICAL)


def highs_milp(prob: LpProblem, binaries, rel_gap: float = 1e-6) -> LpSolution:
    integrality = np.zeros(prob.c.size)
    integrality[list(binaries)] = 1
    lo = np.where(prob.senses == "L", -np.inf, prob.rhs)
    hi = np.where(prob.senses == "G", np.inf, prob.rhs)
    cons = [LinearConstraint(prob.A, lo, hi)] if prob.A.shape[0] else []
    res = milp(
        prob.c,
        constraints=cons,
        integrality=integrality,
        bounds=Bounds(prob.lb, prob.ub),
        options={"mip_rel_gap": rel_gap},
    )
    if res.status == 0:
        x = res.x
        return LpSolution(
            status=OPTIMAL,
            x=x,
            objective=prob.objective(x),
            bound=float(getattr(res, "mip_dual_bound", np.nan)) + prob.offset,
            gap=float(getattr(res, "mip_gap", 0.0) or 0.0),
            nodes=int(getattr(res, "mip_node_count", 0) or 0),
        )
    if res.status == 2:
        return LpSolution(status=INFEASIBLE)
    if res.status == 3:
        return LpSolution(status=UNBOUNDED)
    return LpSolution(status=NUMERICAL)
