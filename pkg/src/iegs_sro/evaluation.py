"""Evaluation runners and independent oracles.

Out-of-sample accommodation, the constraint-generation and vertex-enumeration
oracles, the decision-rule gap curve, Weymouth residuals and the SAA / RO /
SRO comparison.
"""
from __future__ import annotations

import io
import itertools
import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .affine import Lin, Row, build_lp
from .deterministic import solve_direct
from .gas import select_linearization_points
from .ldr import RobustModel, assemble, gas_affine_state
from .milp import solve_milp
from .milp.bnb import BnbOptions
from .milp.lp import OPTIMAL
from .pipeline import SolveReport, solve_sro
from .reduction import ReducedModel, ball_min, row_worst_case
from .scenarios import ScenarioSet, UncertaintyBall

log = logging.getLogger(__name__)


class EvaluationError(RuntimeError):
    pass


# ---------------------------------------------------------------- out of sample

@dataclass
class OutOfSampleReport:
    total: int
    accommodated: int
    diagnostics: list = field(default_factory=list)  # (draw index, family or None)

    @property
    def rate(self):
        return self.accommodated / self.total if self.total else 1.0


def nearest_training(realization, pbar):
    """Per period, index of the training scenario closest in 1-norm."""
    d = np.abs(pbar - realization[None]).sum(axis=2)  # (S, T)
    return np.argmin(d, axis=0)


def out_of_sample(uc, realization, network, lin, training=None, lin_source=None, backend="simplex"):
    """Feasibility of the recourse problem for one wind realization (T, W) under a fixed UC.

    Weymouth coefficients come from ``lin_source`` (per period) or, by default,
    from the training scenario nearest to the realization. Returns
    ``(feasible, family)`` with ``family`` naming the first violated row family.
    """
    realization = np.asarray(realization, dtype=float)
    T = realization.shape[0]
    if lin_source is None:
        if training is None or lin.Km.shape[0] == 1:
            lin_source = np.zeros(T, dtype=int)
        else:
            lin_source = nearest_training(realization, training)
    res = solve_direct(network, realization[None], lin, uc_fixed=uc, lin_scenario=np.asarray(lin_source)[None],
                       backend=backend, feasibility=True)
    if res.optimal:
        return True, None
    fams = res.violated or []
    return False, (fams[0] if fams else res.status)


def out_of_sample_rate(uc, draws, network, lin, training, backend="simplex") -> OutOfSampleReport:
    ok = 0
    diag = []
    for k, real in enumerate(draws):
        feas, fam = out_of_sample(uc, real, network, lin, training, backend=backend)
        ok += feas
        diag.append((k, fam))
    return OutOfSampleReport(len(draws), ok, diag)


def training_accommodation(uc, scen: ScenarioSet, network, lin, backend="simplex") -> OutOfSampleReport:
    """Each training sample checked with its own linearization."""
    ok = 0
    diag = []
    for s in range(scen.S):
        feas, fam = out_of_sample(uc, scen.pbar[s], network, lin, lin_source=np.full(scen.T, s), backend=backend)
        ok += feas
        diag.append((s, fam))
    return OutOfSampleReport(scen.S, ok, diag)


# ---------------------------------------------------------------- ball geometry

def ball_vertices(ball: UncertaintyBall, tol=1e-9):
    """Vertices of the 1-norm ball cut by the farm box (enumeration of active sets)."""
    W = ball.W
    c, r = np.asarray(ball.center, float), ball.radius
    if W == 0:
        return np.zeros((1, 0))
    if r <= tol:
        return c[None].copy()
    rows, rhs = [], []
    for w in range(W):
        e = np.zeros(W)
        e[w] = 1.0
        rows += [e, -e]
        rhs += [ball.hi[w], -ball.lo[w]]
    for signs in itertools.product((1.0, -1.0), repeat=W):
        a = np.array(signs)
        rows.append(a)
        rhs.append(r + a @ c)
    A, b = np.array(rows), np.array(rhs)
    verts = []
    for act in itertools.combinations(range(len(A)), W):
        M = A[list(act)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        p = np.linalg.solve(M, b[list(act)])
        if np.all(A @ p <= b + 1e-7 * (1 + np.abs(b))):
            if not any(np.abs(p - q).max() <= 1e-7 for q in verts):
                verts.append(p)
    return np.array(verts)


def sample_ball(ball: UncertaintyBall, n, rng):
    """Uniform-ish points of the ball (rejection against the box), shape (n, W)."""
    W = ball.W
    c = np.asarray(ball.center, float)
    out = []
    tries = 0
    while len(out) < n and tries < 200 * n:
        tries += 1
        u = rng.dirichlet(np.ones(W + 1))[:W] * rng.choice((-1.0, 1.0), W)
        p = c + ball.radius * u
        if np.all(p >= ball.lo) and np.all(p <= ball.hi):
            out.append(p)
    while len(out) < n:
        out.append(c.copy())
    return np.array(out)


# ---------------------------------------------------------------- oracles

def _instance(row, points):
    """Deterministic copy of a robust row at ``points[t] -> farm vector``."""
    e = row.base.copy()
    for t, coefs in row.unc.items():
        for w, a in enumerate(coefs):
            e.iadd(a, float(points[t][w]))
    return Row(row.name, row.family, e.clean(), "G")


def _obj_instance(term, tau, point):
    e = Lin.var(tau) - term.base
    for w, a in enumerate(term.unc):
        e.iadd(a, -float(point[w]))
    return Row(f"epi[{term.t + 1},{term.s + 1}]", "epigraph", e.clean(), "G")


@dataclass
class OracleResult:
    status: str
    objective: float
    uc: dict | None
    z: np.ndarray | None
    iterations: int
    cuts: int
    history: list = field(default_factory=list)  # (master objective, max violation) per iteration


def constraint_generation_oracle(model, tol=1e-7, max_iter=60, backend="simplex", opts=None) -> OracleResult:
    """Robust optimum by master MILP plus LP separation over each ball.

    Works on the unreduced robust rows (a ReducedModel is unwrapped), so
    agreement with the reformulated MILP checks the transformation, the
    screen and the dualization at once.
    """
    if isinstance(model, ReducedModel):
        model = model.model
    scen = model.scenarios
    vt = model.vars.copy()
    taus = [vt.add(f"tau[{k.t + 1},{k.s + 1}]") for k in model.objective_terms]
    objective = model.first_stage.copy()
    for term, tau in zip(model.objective_terms, taus):
        objective.iadd(Lin.var(tau), term.weight)
    rows = list(model.nonrobust)
    for r in model.robust:
        pts = {t: scen.pbar[r.s, t] for t in r.periods}
        rows.append(_instance(r, pts))
    for term, tau in zip(model.objective_terms, taus):
        rows.append(_obj_instance(term, tau, scen.pbar[term.s, term.t]))
    opts = opts or BnbOptions()
    history = []
    cuts = 0
    for it in range(1, max_iter + 1):
        prob = build_lp(vt, rows, objective.clean(), "cg-master")
        sol = solve_milp(prob, vt.binaries, opts, backend=backend)
        if sol.status != OPTIMAL:
            return OracleResult(sol.status, float("nan"), None, None, it, cuts, history)
        z = sol.x
        worst = 0.0
        new = []
        for r in model.robust:
            val = r.base.value(z)
            pts = {}
            for t in r.periods:
                v, arg = ball_min(r.coef_values(z, t), scen.ball(t, r.s), backend)
                val += v
                pts[t] = arg
            scale = 1.0 + abs(r.base.value(z))
            if val < -tol * scale:
                new.append(_instance(r, pts))
                worst = max(worst, -val / scale)
        for term, tau in zip(model.objective_terms, taus):
            c = np.array([a.value(z) for a in term.unc])
            v, arg = ball_min(-c, scen.ball(term.t, term.s), backend)
            gap = term.base.value(z) - v - z[tau]
            scale = 1.0 + abs(z[tau])
            if gap > tol * scale:
                new.append(_obj_instance(term, tau, arg))
                worst = max(worst, gap / scale)
        history.append((float(sol.objective), worst))
        log.debug("cg iteration %d: obj %.6f, %d cuts, worst %.2e", it, sol.objective, len(new), worst)
        if not new:
            idx = model.index
            uc = {k: np.round(z[idx[k]]).astype(int) for k in ("x", "u", "v")}
            return OracleResult(OPTIMAL, float(sol.objective), uc, z, it, cuts, history)
        rows += new
        cuts += len(new)
    raise EvaluationError(f"constraint generation hit the iteration cap ({max_iter})")


def vertex_robust_model(model: RobustModel, backend="simplex", opts=None) -> OracleResult:
    """Robust counterpart by imposing every row at every vertex of its balls.

    Valid because each row and each objective term is affine in the wind; the
    ramp rows span two balls, so vertices are crossed over both periods.
    """
    scen = model.scenarios
    verts = {(t, s): ball_vertices(scen.ball(t, s)) for s in range(scen.S) for t in range(scen.T)}
    vt = model.vars.copy()
    taus = [vt.add(f"tau[{k.t + 1},{k.s + 1}]") for k in model.objective_terms]
    objective = model.first_stage.copy()
    rows = list(model.nonrobust)
    for term, tau in zip(model.objective_terms, taus):
        objective.iadd(Lin.var(tau), term.weight)
        for p in verts[(term.t, term.s)]:
            rows.append(_obj_instance(term, tau, p))
    for r in model.robust:
        per = r.periods
        for combo in itertools.product(*[range(len(verts[(t, r.s)])) for t in per]):
            pts = {t: verts[(t, r.s)][k] for t, k in zip(per, combo)}
            rows.append(_instance(r, pts))
    prob = build_lp(vt, rows, objective.clean(), "vertex-robust")
    sol = solve_milp(prob, vt.binaries, opts or BnbOptions(), backend=backend)
    if sol.status != OPTIMAL:
        return OracleResult(sol.status, float("nan"), None, None, 1, len(rows))
    idx = model.index
    uc = {k: np.round(sol.x[idx[k]]).astype(int) for k in ("x", "u", "v")}
    return OracleResult(OPTIMAL, float(sol.objective), uc, sol.x, 1, len(rows))


# ---------------------------------------------------------------- safety checks

def reduction_safety(report: SolveReport, backend="simplex"):
    """Worst-case value of every screened-out and every transformed row at the optimum.

    Returns ``(min value, name of the worst row)``; safety means min value >= -1e-8.
    """
    red, z = report.reduced, report.z
    scen = red.model.scenarios
    worst, name = np.inf, None
    for r in list(red.eliminated) + list(red.transformed):
        v = row_worst_case(r, z, scen, backend)
        if v < worst:
            worst, name = v, r.name
    return worst, name


# ---------------------------------------------------------------- gap curve

@dataclass
class GapCurve:
    eps: list
    values: list
    reference: float
    statuses: list = field(default_factory=list)

    @property
    def gaps(self):
        return [v - self.reference for v in self.values]

    def to_csv(self):
        buf = io.StringIO()
        buf.write("epsilon,opt_ldr,opt_exact,gap\n")
        for e, v in zip(self.eps, self.values):
            buf.write(f"{e:.6g},{v:.10g},{self.reference:.10g},{v - self.reference:.10g}\n")
        return buf.getvalue()


def exact_recourse_optimum(network, scen: ScenarioSet, lin, backend="simplex", opts=None):
    """Sample-average optimum with a full recourse block per sample (no decision rule)."""
    res = solve_direct(network, scen.pbar, lin, backend=backend, opts=opts)
    if not res.optimal:
        raise EvaluationError(f"exact-recourse model {res.status}")
    return res


def gap_curve(network, scen: ScenarioSet, grid, lin=None, backend="simplex", opts=None) -> GapCurve:
    lin = lin or select_linearization_points(network, scen.with_budget(0.0), backend=backend)
    ref = exact_recourse_optimum(network, scen, lin, backend, opts).objective
    vals, sts = [], []
    for e in grid:
        rep = solve_sro(network, scen.with_budget(e), lin=lin, backend=backend, opts=opts)
        vals.append(rep.objective)
        sts.append(rep.status)
    return GapCurve(list(grid), vals, ref, sts)


# ---------------------------------------------------------------- Weymouth residual

@dataclass
class WeymouthResidual:
    max_relative: float
    per_pipeline: np.ndarray  # (S, T, L) relative residual
    ordering: list  # (pipeline id, t, s) where the pressure drop has the wrong sign


def _pipe_states(model, z):
    """Per (t, s, pipeline): flow at the sample and the pressure Lins at both ends."""
    net, scen = model.network, model.scenarios
    ix = net.gas.node_index
    out = []
    for s in range(scen.S):
        for t in range(scen.T):
            xi = float(scen.pbar[s, t].sum())
            (f0, f1), (p0, p1) = gas_affine_state(net, model.reductions[(t, s)], t, s, model.index)
            for l, pipe in enumerate(net.gas.pipelines):
                g = f0[l].value(z) + xi * f1[l].value(z)
                m, n = ix[pipe.from_node], ix[pipe.to_node]
                out.append((pipe, g, p0[m] + p1[m] * xi, p0[n] + p1[n] * xi))
    return out


def polish_pressures(report: SolveReport, backend="simplex", max_iter=30, tol=1e-7) -> SolveReport:
    """Re-pick the pressure rule among equal-cost solutions.

    Pressures do not enter the cost. With every other variable held at the
    optimum, the gap between the linear and the exact Weymouth flow,
    ``K . pi - W sqrt(pm^2 - pn^2)``, is convex in the pressures, so its
    largest relative value over the training samples is minimized by
    cutting planes on ``o, O``.
    """
    model, milp, z = report.model, report.milp, report.z
    if z is None or not model.network.gas.pipelines:
        return report
    from .milp import solve_lp

    vt = milp.vars.copy()
    free = set(int(j) for j in np.concatenate([model.index["o"].ravel(), model.index["O"].ravel()]))
    for j in range(len(vt)):
        if j not in free:
            vt.lb[j] = vt.ub[j] = float(z[j])
    top = vt.add("max_residual", 0.0)
    states = _pipe_states(model, z)
    rows = list(milp.rows)
    best, best_val = np.array(z, dtype=float), None
    cur = best.copy()
    for it in range(max_iter):
        worst = 0.0
        for k, (pipe, g, em, en) in enumerate(states):
            pm, pn = em.value(cur), en.value(cur)
            d = max(pm * pm - pn * pn, 1e-12)
            root = np.sqrt(d)
            worst = max(worst, abs(g - pipe.weymouth * root) / pipe.flow_limit)
            # cut: residual(pi) >= value + gradient . (pi - cur), residual = g - W sqrt(.)
            dm, dn = -pipe.weymouth * pm / root, pipe.weymouth * pn / root
            lin = em * dm + en * dn
            const = g - pipe.weymouth * root - dm * pm - dn * pn
            e = Lin.var(top, pipe.flow_limit) - lin - const
            rows.append(Row(f"cut[{k},{it}]", "polish", e.clean()))
        if best_val is None or worst < best_val:
            best, best_val = cur, worst
        sol = solve_lp(build_lp(vt, rows, Lin.var(top), "polish"), backend=backend)
        if sol.status != OPTIMAL:
            log.warning("pressure polish stopped (%s)", sol.status)
            break
        cur = sol.x[:len(z)].copy()
        if best_val - sol.objective <= tol:
            break
    return replace(report, z=best)


def weymouth_residual(report: SolveReport, points=None) -> WeymouthResidual:
    """Exact-Weymouth residual of the reconstructed flows and pressures.

    Evaluated at each training sample (or at ``points[s, t]`` wind vectors).
    """
    model = report.model
    net, scen, z = model.network, model.scenarios, report.z
    if z is None:
        raise EvaluationError(f"no solution to evaluate (status {report.status})")
    gas = net.gas
    L = len(gas.pipelines)
    out = np.zeros((scen.S, scen.T, L))
    bad = []
    if L == 0:
        return WeymouthResidual(0.0, out, bad)
    ix = gas.node_index
    for s in range(scen.S):
        for t in range(scen.T):
            p = scen.pbar[s, t] if points is None else points[s][t]
            xi = float(np.sum(p))
            (f0, f1), (p0, p1) = gas_affine_state(net, model.reductions[(t, s)], t, s, model.index)
            for l, pipe in enumerate(gas.pipelines):
                g = f0[l].value(z) + xi * f1[l].value(z)
                pm = p0[ix[pipe.from_node]].value(z) + xi * p1[ix[pipe.from_node]].value(z)
                pn = p0[ix[pipe.to_node]].value(z) + xi * p1[ix[pipe.to_node]].value(z)
                d = pm * pm - pn * pn
                if d < 0:
                    bad.append((pipe.id, t, s))
                exact = pipe.weymouth * np.sqrt(max(d, 0.0))
                out[s, t, l] = abs(g - exact) / pipe.flow_limit
    return WeymouthResidual(float(out.max(initial=0.0)), out, bad)


# ---------------------------------------------------------------- RO variant

def build_ro_variant(scen: ScenarioSet, eps=None) -> ScenarioSet:
    """Single ball around the sample mean covering every sample plus the SRO budget.

    Radius per period = max_s sum_w |pbar - mean| + max_s eps * sum_w pbar, the largest
    SRO radius, so by the triangle inequality every SRO ball sits inside the RO ball.
    """
    eps = scen.eps[0] if eps is None else np.broadcast_to(np.asarray(eps, float), (scen.T,))
    centre = scen.pbar.mean(axis=0)  # (T, W)
    spread = np.abs(scen.pbar - centre[None]).sum(axis=2).max(axis=0)  # (T,)
    total = centre.sum(axis=1)
    radius = spread + eps * scen.pbar.sum(axis=2).max(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(total > 0, radius / np.where(total > 0, total, 1.0), 0.0)
    if np.any((total <= 0) & (radius > 0)):
        raise EvaluationError("zero mean wind with a positive radius cannot be expressed as a budget")
    return ScenarioSet(centre[None], frac[None], scen.lo, scen.hi)


# ---------------------------------------------------------------- comparison

@dataclass
class ComparisonRow:
    variant: str
    epsilon: float
    status: str
    objective: float
    oos_rate: float
    solve_time: float


@dataclass
class ComparisonReport:
    rows: list
    gap: GapCurve | None = None

    def to_csv(self):
        """Deterministic table (solve times are kept out of the file)."""
        buf = io.StringIO()
        buf.write("variant,epsilon,status,objective,oos_rate\n")
        for r in self.rows:
            buf.write(f"{r.variant},{r.epsilon:.6g},{r.status},{r.objective:.10g},{r.oos_rate:.6f}\n")
        return buf.getvalue()


def compare(network, scen: ScenarioSet, grid, draws, lin=None, backend="simplex", opts=None,
            with_gap=True) -> ComparisonReport:
    """SAA, RO and SRO over ``grid``, each scored on the out-of-sample ``draws``."""
    if not len(grid):
        raise EvaluationError("budget grid is empty")
    lin = lin or select_linearization_points(network, scen.with_budget(0.0), backend=backend)
    rows = []

    def score(rep):
        if rep.uc is None or rep.status != OPTIMAL:
            return float("nan")
        return out_of_sample_rate(rep.uc, draws, network, lin, scen.pbar, backend).rate

    t0 = time.perf_counter()
    saa = solve_sro(network, scen.with_budget(0.0), lin=lin, backend=backend, opts=opts)
    rows.append(ComparisonRow("SAA", 0.0, saa.status, saa.objective, score(saa), time.perf_counter() - t0))

    eps_ro = float(max(grid))
    ro_scen = build_ro_variant(scen, eps_ro)
    t0 = time.perf_counter()
    ro_lin = select_linearization_points(network, ro_scen.with_budget(0.0), backend=backend)
    ro = solve_sro(network, ro_scen, lin=ro_lin, backend=backend, opts=opts)
    rows.append(ComparisonRow("RO", eps_ro, ro.status, ro.objective, score(ro), time.perf_counter() - t0))

    for e in grid:
        t0 = time.perf_counter()
        rep = solve_sro(network, scen.with_budget(e), lin=lin, backend=backend, opts=opts)
        rows.append(ComparisonRow("SRO", float(e), rep.status, rep.objective, score(rep), time.perf_counter() - t0))
    gap = None
    if with_gap:
        ref = exact_recourse_optimum(network, scen, lin, backend, opts).objective
        sro = [r for r in rows if r.variant == "SRO"]
        gap = GapCurve([r.epsilon for r in sro], [r.objective for r in sro], ref, [r.status for r in sro])
    return ComparisonReport(rows, gap)
