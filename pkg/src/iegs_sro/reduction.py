"""Sum-extreme transformation of robust rows and screening of inactive thermal limits."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .affine import Lin, Row
from .ldr import ROBUST_SUM, RobustModel, RobustRow
from .milp import solve_lp
from .milp.lp import OPTIMAL, LpProblem
from .network import IegsNetwork, compute_ptdf
from .scenarios import ScenarioSet, all_extremes


class ReductionError(RuntimeError):
    pass


@dataclass
class ThermalScreenResult:
    flow_max: np.ndarray  # (L, T, S)
    flow_min: np.ndarray
    in_max: np.ndarray  # bool, relaxed max flow strictly above the limit
    in_min: np.ndarray
    infeasible: list = field(default_factory=list)  # (t, s) where the relaxed balance fails

    def survivors(self):
        return int(self.in_max.sum() + self.in_min.sum())


@dataclass
class ReducedModel:
    model: RobustModel
    nonrobust: list
    robust: list
    transformed: list  # original robust-sum rows that were replaced
    eliminated: list  # thermal rows dropped by the screen
    screen: ThermalScreenResult | None
    extremes: tuple  # (smin, smax), each (S, T)

    @property
    def vars(self):
        return self.model.vars

    def census(self):
        fam = {}
        for r in self.nonrobust:
            fam[r.family] = fam.get(r.family, 0) + 1
        rob = {}
        for r in self.robust:
            rob[r.family] = rob.get(r.family, 0) + 1
        return {"nonrobust": dict(sorted(fam.items())), "robust": dict(sorted(rob.items())),
                "transformed": len(self.transformed), "eliminated": len(self.eliminated)}


def _flow_lp(power, beta_l, t, ball, sign):
    """Relaxed flow extreme at one line/period: free dispatch, wind anywhere in the ball."""
    G, W = len(power.generators), ball.W
    n = G + 3 * W
    c = np.zeros(n)
    c[:G] = -sign * beta_l[power.g_bus]
    c[G:G + W] = -sign * beta_l[power.w_bus]
    rows, rhs, senses = [], [], []
    a = np.zeros(n)
    a[:G + W] = 1.0
    rows.append(a), rhs.append(float(power.total_load[t])), senses.append("E")
    for w in range(W):
        a = np.zeros(n)
        a[G + w] = 1.0
        a[G + W + w] = -1.0
        a[G + 2 * W + w] = 1.0
        rows.append(a), rhs.append(float(ball.center[w])), senses.append("E")
    if W:
        a = np.zeros(n)
        a[G + W:] = 1.0
        rows.append(a), rhs.append(float(ball.radius)), senses.append("L")
    lb = np.concatenate([np.minimum(0.0, power.g_p_min), ball.lo, np.zeros(2 * W)])
    ub = np.concatenate([power.g_p_max, ball.hi, np.full(2 * W, np.inf)])
    prob = LpProblem(c, np.array(rows).reshape(len(rows), n), senses, rhs, lb, ub)
    offset = -float(beta_l @ power.load[:, t])
    return prob, offset


def screen_thermal(network: IegsNetwork, scen: ScenarioSet, backend="simplex", ptdf=None) -> ThermalScreenResult:
    power = network.power
    beta = (ptdf or compute_ptdf(power)).matrix
    L, T, S = len(power.lines), scen.T, scen.S
    fmax = np.zeros((L, T, S))
    fmin = np.zeros((L, T, S))
    bad = []
    for s in range(S):
        for t in range(T):
            ball = scen.ball(t, s)
            for l in range(L):
                for sign, out in ((1.0, fmax), (-1.0, fmin)):
                    prob, off = _flow_lp(power, beta[l], t, ball, sign)
                    sol = solve_lp(prob, backend=backend)
                    if sol.status != OPTIMAL:
                        bad.append((t, s))
                        out[l, t, s] = sign * np.inf
                        continue
                    out[l, t, s] = -sol.objective + sign * off if sign > 0 else sol.objective + off
    lim = power.l_limit[:, None, None]
    return ThermalScreenResult(fmax, fmin, fmax > lim, fmin < -lim, sorted(set(bad)))


def transform_row(row: RobustRow, smin, smax):
    """Deterministic instances of a robust-sum row at the sum extremes of each period."""
    periods = row.periods
    choices = []
    for t in periods:
        coef = row.sum_coef(t)
        if coef is None:
            raise ReductionError(f"row {row.name} carries farm-specific coefficients")
        lo, hi = smin[row.s, t], smax[row.s, t]
        opts = [("lo", lo)] if lo == hi else [("lo", lo), ("hi", hi)]
        choices.append([(tag, val, coef) for tag, val in opts])
    out = []
    for combo in itertools.product(*choices):
        e = row.base.copy()
        for _, val, coef in combo:
            e.iadd(coef, val)
        suffix = ",".join(tag for tag, _, _ in combo)
        out.append(Row(f"{row.name}@{suffix}", row.family, e.clean(), "G"))
    return out


def transform_robust_sum(model: RobustModel, extremes=None, rows=None):
    """Split robust rows into (new deterministic rows, transformed originals, kept robust rows)."""
    smin, smax = extremes if extremes is not None else all_extremes(model.scenarios)
    new, done, kept = [], [], []
    for r in (model.robust if rows is None else rows):
        if r.tag == ROBUST_SUM:
            new.extend(transform_row(r, smin, smax))
            done.append(r)
        else:
            kept.append(r)
    return new, done, kept


def dedupe(rows):
    seen = set()
    out = []
    for r in rows:
        k = (r.sense, r.expr.key())
        if k in seen:
            continue
        seen.add(k)
        out.append(r)
    return out


def reduce(model: RobustModel, screen: ThermalScreenResult | None = None, extremes=None,
           transform=True) -> ReducedModel:
    """Apply the screen (if given) to thermal rows, then the sum-extreme transformation."""
    extremes = extremes if extremes is not None else all_extremes(model.scenarios)
    keep, dropped = [], []
    for r in model.robust:
        if screen is not None and r.family == "thermal":
            m = r.meta
            flags = screen.in_max if m["dir"] == "max" else screen.in_min
            if not flags[m["line"], m["t"], r.s]:
                dropped.append(r)
                continue
        keep.append(r)
    if transform:
        new, done, robust = transform_robust_sum(model, extremes, keep)
    else:
        new, done, robust = [], [], keep
    nonrobust = dedupe(list(model.nonrobust) + new)
    return ReducedModel(model, nonrobust, robust, done, dropped, screen, extremes)


# ---------------------------------------------------------------- exact checks

def row_worst_case(row: RobustRow, z, scen: ScenarioSet, backend="simplex"):
    """Minimum of the row value over its balls, by one LP per period."""
    total = row.base.value(z)
    for t in row.periods:
        a = row.coef_values(z, t)
        total += ball_min(a, scen.ball(t, row.s), backend)[0]
    return total


def ball_min(a, ball, backend="simplex"):
    """``min a @ p`` over the ball (1-norm split into +/- parts); returns (value, argmin)."""
    W = ball.W
    if W == 0:
        return 0.0, np.zeros(0)
    n = 3 * W
    c = np.concatenate([a, np.zeros(2 * W)])
    A = np.zeros((W + 1, n))
    A[:W, :W] = np.eye(W)
    A[:W, W:2 * W] = -np.eye(W)
    A[:W, 2 * W:] = np.eye(W)
    A[W, W:] = 1.0
    rhs = np.concatenate([ball.center, [ball.radius]])
    senses = ["E"] * W + ["L"]
    lb = np.concatenate([ball.lo, np.zeros(2 * W)])
    ub = np.concatenate([ball.hi, np.full(2 * W, np.inf)])
    sol = solve_lp(LpProblem(c, A, senses, rhs, lb, ub), backend=backend)
    if sol.status != OPTIMAL:
        raise ReductionError(f"ball LP failed: {sol.status}")
    return float(sol.objective), sol.x[:W]
