"""Dual reformulation of worst-case objective terms and surviving robust rows.

For a ball with centre pbar, radius rho and farm box written as U p + u0 >= 0
(U = [I; -I]), with h = U pbar + u0:

    max_p c @ p  =  c @ pbar + min { rho*lam + h @ gam : |c + U'gam|_inf <= lam, lam, gam >= 0 }

and a robust row  f(z) + a(z) @ p >= 0  holds on the ball iff some theta, eta >= 0 give

    f + a @ pbar - rho*theta - h @ eta >= 0,   |-a + U'eta|_inf <= theta.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .affine import Lin, Row, VarTable, build_lp
from .milp.lp import LpProblem
from .reduction import ReducedModel


@dataclass
class DualBlock:
    kind: str  # "objective" | "row"
    name: str
    t: int
    s: int
    lam: int  # index of lambda / theta
    gam: np.ndarray  # indices of gamma / eta, length 2W


@dataclass
class MilpProblem:
    vars: VarTable
    rows: list
    objective: Lin
    blocks: list = field(default_factory=list)
    families: dict = field(default_factory=dict)

    def lp(self, name="sro") -> LpProblem:
        return build_lp(self.vars, self.rows, self.objective, name)

    @property
    def binaries(self):
        return self.vars.binaries

    def census(self):
        fam = {}
        for r in self.rows:
            fam[r.family] = fam.get(r.family, 0) + 1
        return {"n_variables": len(self.vars), "n_binaries": len(self.binaries), "n_rows": len(self.rows),
                "rows": dict(sorted(fam.items())), "dual_blocks": len(self.blocks)}


def _inf_norm_rows(name, family, comps, bound: Lin):
    """``|comp_w| <= bound`` as two linear rows per component."""
    rows = []
    for w, c in enumerate(comps):
        rows.append(Row(f"{name}[{w + 1},+]", family, bound - c))
        rows.append(Row(f"{name}[{w + 1},-]", family, bound + c))
    return rows


def _box_terms(ball, gam_idx, sign):
    """``sign*a_w + gam_w - gam_{W+w}`` builder; returns per-farm Lin list given a."""
    W = ball.W

    def comps(a):
        out = []
        for w in range(W):
            e = a[w] * sign
            e = e + Lin.var(gam_idx[w]) - Lin.var(gam_idx[W + w])
            out.append(e)
        return out
    return comps


def dualize_objective(red: ReducedModel, vt: VarTable):
    """Objective contribution and norm rows for every worst-case term."""
    scen = red.model.scenarios
    obj = Lin()
    rows, blocks = [], []
    for term in red.model.objective_terms:
        ball = scen.ball(term.t, term.s)
        W = ball.W
        ts = f"{term.t + 1},{term.s + 1}"
        nominal = term.base.copy()
        for w in range(W):
            nominal.iadd(term.unc[w], float(ball.center[w]))
        obj.iadd(nominal, term.weight)
        if W == 0 or all(c.is_const() and c.const == 0 for c in term.unc):
            continue
        lam = vt.add(f"lam[{ts}]", 0.0)
        gam = np.array([vt.add(f"gam[{ts},{k + 1}]", 0.0) for k in range(2 * W)])
        _, h = ball.box_rows()
        obj.iadd(Lin.var(lam, ball.radius), term.weight)
        for k in range(2 * W):
            obj.iadd(Lin.var(gam[k], float(h[k])), term.weight)
        comps = _box_terms(ball, gam, 1.0)(term.unc)
        rows += _inf_norm_rows(f"obj_norm[{ts}]", "obj_norm", comps, Lin.var(lam))
        blocks.append(DualBlock("objective", f"obj[{ts}]", term.t, term.s, lam, gam))
    return obj, rows, blocks


def dualize_row(row, scen, vt: VarTable):
    """Deterministic counterpart of one robust row: anchor row plus norm rows."""
    anchor = row.base.copy()
    rows, blocks = [], []
    for t in row.periods:
        ball = scen.ball(t, row.s)
        W = ball.W
        a = row.unc[t]
        for w in range(W):
            anchor.iadd(a[w], float(ball.center[w]))
        if all(c.is_const() and c.const == 0 for c in a):
            continue
        th = vt.add(f"theta[{row.name},{t + 1}]", 0.0)
        eta = np.array([vt.add(f"eta[{row.name},{t + 1},{k + 1}]", 0.0) for k in range(2 * W)])
        _, h = ball.box_rows()
        anchor.iadd(Lin.var(th), -ball.radius)
        for k in range(2 * W):
            anchor.iadd(Lin.var(eta[k]), -float(h[k]))
        comps = _box_terms(ball, eta, -1.0)(a)
        rows += _inf_norm_rows(f"norm[{row.name},{t + 1}]", f"{row.family}_norm", comps, Lin.var(th))
        blocks.append(DualBlock("row", row.name, t, row.s, th, eta))
    rows.insert(0, Row(f"{row.name}@dual", row.family, anchor.clean(), "G"))
    return rows, blocks


def dualize_thermal(red: ReducedModel, vt: VarTable):
    """Dual counterparts of every surviving robust row (thermal rows after screening)."""
    rows, blocks = [], []
    for r in red.robust:
        rr, bb = dualize_row(r, red.model.scenarios, vt)
        rows += rr
        blocks += bb
    return rows, blocks


def assemble_milp(red: ReducedModel) -> MilpProblem:
    vt = red.vars.copy()
    obj2, obj_rows, obj_blocks = dualize_objective(red, vt)
    rob_rows, rob_blocks = dualize_thermal(red, vt)
    objective = red.model.first_stage + obj2
    rows = list(red.nonrobust) + obj_rows + rob_rows
    prob = MilpProblem(vt, rows, objective.clean(), obj_blocks + rob_blocks)
    prob.families = prob.census()["rows"]
    return prob
