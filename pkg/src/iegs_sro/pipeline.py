"""End-to-end solve: linearize, assemble, reduce, dualize, branch and bound."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .dual import MilpProblem, assemble_milp
from .gas import WeymouthLinearization, locate_free_nodes, select_linearization_points
from .ldr import RobustModel, assemble
from .milp import solve_milp
from .milp.bnb import BnbOptions
from .milp.lp import OPTIMAL
from .network import IegsNetwork, compute_ptdf
from .reduction import ReducedModel, reduce, screen_thermal
from .scenarios import ScenarioSet, all_extremes

log = logging.getLogger(__name__)


class PipelineError(RuntimeError):
    """Stage failure; ``stage`` names the step that raised."""

    def __init__(self, stage, msg):
        super().__init__(f"[{stage}] {msg}")
        self.stage = stage


@dataclass
class SolveReport:
    status: str
    objective: float
    bound: float
    gap: float
    uc: dict | None
    z: np.ndarray | None
    model: RobustModel
    reduced: ReducedModel
    milp: MilpProblem
    nodes: int = 0
    timings: dict = field(default_factory=dict)

    @property
    def optimal(self):
        return self.status == OPTIMAL

    def policy(self):
        """LDR coefficient values keyed by block name, arrays shaped (S, T, k)."""
        if self.z is None:
            return {}
        return {k: self.z[self.model.index[k]] for k in ("r", "R", "s", "S", "o", "O")}

    def census(self):
        return {"model": self.model.census(), "reduced": self.reduced.census(), "milp": self.milp.census()}


def build_milp(network: IegsNetwork, scen: ScenarioSet, lin: WeymouthLinearization,
               screen=True, transform=True, backend="simplex"):
    timings = {}
    t0 = time.perf_counter()
    ptdf = compute_ptdf(network.power)
    try:
        model = assemble(network, scen, lin, free=locate_free_nodes(network.gas), ptdf=ptdf)
    except ValueError as exc:
        raise PipelineError("assemble", exc) from exc
    timings["assemble"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    scr = screen_thermal(network, scen, backend=backend, ptdf=ptdf) if screen else None
    if scr is not None and scr.infeasible:
        log.warning("relaxed balance infeasible at (t, s) = %s", scr.infeasible)
    red = reduce(model, scr, all_extremes(scen), transform=transform)
    timings["reduce"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    milp = assemble_milp(red)
    timings["dualize"] = time.perf_counter() - t0
    return model, red, milp, timings


def solve_sro(network: IegsNetwork, scen: ScenarioSet, lin: WeymouthLinearization | None = None,
              screen=True, transform=True, backend="simplex", opts: BnbOptions | None = None) -> SolveReport:
    if lin is None:
        try:
            lin = select_linearization_points(network, scen.with_budget(0.0), backend=backend)
        except ValueError as exc:
            raise PipelineError("linearize", exc) from exc
    model, red, milp, timings = build_milp(network, scen, lin, screen, transform, backend)
    t0 = time.perf_counter()
    prob = milp.lp()
    sol = solve_milp(prob, milp.binaries, opts or BnbOptions(), backend=backend)
    timings["solve"] = time.perf_counter() - t0
    uc = None
    if sol.status == OPTIMAL or sol.x is not None:
        idx = model.index
        uc = {k: np.round(sol.x[idx[k]]).astype(int) for k in ("x", "u", "v")}
    return SolveReport(
        status=sol.status, objective=float(sol.objective), bound=float(sol.bound), gap=float(sol.gap),
        uc=uc, z=sol.x, model=model, reduced=red, milp=milp, nodes=sol.nodes, timings=timings,
    )
