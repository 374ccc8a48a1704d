"""Best-bound branch and bound over the in-repo simplex."""
from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass

import numpy as np

from .lp import INFEASIBLE, NODE_LIMIT, NUMERICAL, OPTIMAL, UNBOUNDED, LpProblem, LpSolution
from .simplex import SimplexEngine, StandardForm, _finalize

log = logging.getLogger(__name__)


@dataclass
class BnbOptions:
    int_tol: float = 1e-6
    rel_gap: float = 1e-6
    abs_gap: float = 1e-9
    node_limit: int = 200_000
    heuristic: bool = True

    def __post_init__(self):
        if self.int_tol <= 0 or self.rel_gap <= 0 or self.abs_gap <= 0:
            raise ValueError("tolerances must be positive")


class _Session:
    """One simplex engine reused across nodes with bound changes."""

    def __init__(self, prob: LpProblem):
        self.prob = prob
        self.sf = StandardForm(prob)
        self.engine = SimplexEngine(self.sf)
        self.started = False
        self.current = None  # id of the node whose basis is loaded

    def solve(self, lb, ub, state=None, node_id=None):
        sf, eng = self.sf, self.engine
        lo, hi = sf.scale_bounds(lb, ub)
        if np.any(lb > ub):
            return LpSolution(status=INFEASIBLE), None
        if not self.started:
            eng.lo, eng.hi = lo, hi
            status = eng.run(sf.c)
            self.started = status == OPTIMAL
        else:
            if state is not None and self.current != node_id:
                eng.set_state(state)
            try:
                status = eng.reoptimize(sf.c, lo, hi)
            except np.linalg.LinAlgError:
                status = NUMERICAL
            if status == NUMERICAL:
                # cold restart
                eng2 = SimplexEngine(sf)
                eng2.lo, eng2.hi = lo, hi
                status = eng2.run(sf.c)
                self.engine = eng = eng2
        sol = _finalize(eng, sf, status)
        return sol, (eng.get_state() if status == OPTIMAL else None)


def branch_and_bound(prob: LpProblem, binaries, opts: BnbOptions | None = None) -> LpSolution:
    opts = opts or BnbOptions()
    binaries = np.asarray(sorted(set(int(j) for j in binaries)), dtype=int)
    if len(binaries) and (np.any(prob.lb[binaries] < 0) or np.any(prob.ub[binaries] > 1)):
        raise ValueError("binary variables must have bounds within [0, 1]")
    session = _Session(prob)
    lb0, ub0 = prob.lb.copy(), prob.ub.copy()
    if len(binaries):
        lb0[binaries] = np.ceil(lb0[binaries] - opts.int_tol)
        ub0[binaries] = np.floor(ub0[binaries] + opts.int_tol)

    root, state = session.solve(lb0, ub0)
    if root.status != OPTIMAL:
        return LpSolution(status=root.status, iterations=root.iterations, infeasible_rows=root.infeasible_rows)
    session.current = 0

    incumbent = None
    inc_obj = np.inf
    nodes = 1
    total_iter = root.iterations
    counter = 0
    heap = []

    def cutoff():
        return inc_obj - max(opts.abs_gap, opts.rel_gap * abs(inc_obj))

    def try_incumbent(x, obj):
        nonlocal incumbent, inc_obj
        if obj < inc_obj - 1e-12:
            incumbent, inc_obj = x.copy(), obj

    def fractional(x):
        v = x[binaries]
        return np.abs(v - np.round(v))

    def heuristic(x, lb, ub, state):
        """Round binaries, re-solve the continuous part."""
        for mode in ("round", "up"):
            v = x[binaries]
            fix = np.round(v) if mode == "round" else np.ceil(v - opts.int_tol)
            lbh, ubh = lb.copy(), ub.copy()
            lbh[binaries] = np.maximum(lb[binaries], fix)
            ubh[binaries] = np.minimum(ub[binaries], fix)
            sol, _ = session.solve(lbh, ubh, state, node_id=-1)
            session.current = -1
            if sol.status == OPTIMAL:
                try_incumbent(sol.x, sol.objective)

    def process(sol, st, lb, ub, node_id):
        nonlocal counter
        frac = fractional(sol.x)
        if not len(binaries) or frac.max(initial=0.0) <= opts.int_tol:
            x = sol.x.copy()
            if len(binaries):
                x[binaries] = np.round(x[binaries])
            try_incumbent(x, sol.objective)
            return
        if sol.objective >= cutoff():
            return
        j = int(binaries[np.argmax(frac)])
        for val in (0.0, 1.0) if sol.x[j] < 0.5 else (1.0, 0.0):
            clb, cub = lb.copy(), ub.copy()
            clb[j] = cub[j] = val
            counter += 1
            heapq.heappush(heap, (sol.objective, counter, node_id, clb, cub, st))

    if opts.heuristic and len(binaries):
        heuristic(root.x, lb0, ub0, state)
    process(root, state, lb0, ub0, 0)

    status = OPTIMAL
    node_id = 0
    pruned_bound = np.inf
    while heap:
        bound = heap[0][0]
        if bound >= cutoff():
            pruned_bound = bound
            heap.clear()
            break
        if nodes >= opts.node_limit:
            status = NODE_LIMIT
            break
        _, _, parent, lb, ub, st = heapq.heappop(heap)
        node_id += 1
        sol, nst = session.solve(lb, ub, st, node_id=parent)
        session.current = node_id
        nodes += 1
        total_iter += sol.iterations
        if sol.status != OPTIMAL:
            continue
        if sol.objective >= cutoff():
            continue
        process(sol, nst, lb, ub, node_id)
        if opts.heuristic and nodes % 50 == 0:
            heuristic(sol.x, lb, ub, nst)
            session.current = -1

    if incumbent is None:
        return LpSolution(status=INFEASIBLE if status == OPTIMAL else status, nodes=nodes, iterations=total_iter)
    best_bound = min([inc_obj, pruned_bound] + [h[0] for h in heap])
    gap = (inc_obj - best_bound) / max(1.0, abs(inc_obj))
    # final LP with binaries fixed gives duals/reduced costs for the incumbent
    lbf, ubf = lb0.copy(), ub0.copy()
    lbf[binaries] = ubf[binaries] = incumbent[binaries]
    final, _ = session.solve(lbf, ubf, None, node_id=-2)
    x = incumbent
    duals = rc = None
    if final.status == OPTIMAL and final.objective <= inc_obj + 1e-7 * max(1.0, abs(inc_obj)):
        x = final.x.copy()
        x[binaries] = incumbent[binaries]
        duals, rc = final.duals, final.reduced_costs
    log.debug("B&B finished: %d nodes, obj %.6f, gap %.2e", nodes, inc_obj, gap)
    return LpSolution(
        status=status,
        x=x,
        objective=prob.objective(x),
        iterations=total_iter,
        duals=duals,
        reduced_costs=rc,
        bound=best_bound,
        gap=max(gap, 0.0),
        nodes=nodes,
    )


__all__ = ["BnbOptions", "branch_and_bound", "UNBOUNDED"]
