from types import SimpleNamespace

import numpy as np
import pytest

from iegs_sro.affine import Lin, VarTable, build_lp
from iegs_sro.deterministic import solve_direct
from iegs_sro.dual import dualize_objective, dualize_row
from iegs_sro.gas import select_linearization_points
from iegs_sro.ldr import ObjTerm, RobustRow
from iegs_sro.milp import solve_lp
from iegs_sro.network import load_network
from iegs_sro.pipeline import solve_sro
from iegs_sro.scenarios import ScenarioSet
from builders import gen, minimal
from oracles import inner_max_lp


def random_ball_scen(rng, W):
    hi = rng.uniform(20, 100, W)
    c = rng.uniform(0, hi)
    return ScenarioSet(c[None, None, :], float(rng.uniform(0, 0.6)), np.zeros(W), hi)


def dual_worst_case(coef, scen):
    """Solve the dualized objective block for a constant cost vector; returns its optimum."""
    W = scen.W
    term = ObjTerm(0, 0, 1.0, Lin(), [Lin(const=float(c)) for c in coef])
    vt = VarTable()
    red = SimpleNamespace(model=SimpleNamespace(objective_terms=[term], scenarios=scen))
    obj, rows, blocks = dualize_objective(red, vt)
    if not len(vt):
        return obj.const
    sol = solve_lp(build_lp(vt, rows, obj))
    assert sol.optimal
    return sol.objective


def test_one_farm_interval():
    scen = ScenarioSet(np.array([[[40.0]]]), 0.1, [0.0], [100.0])
    for c in (3.0, -2.0):
        assert dual_worst_case([c], scen) == pytest.approx(c * 40 + 0.1 * 40 * abs(c))


def test_zero_budget_collapses_to_nominal():
    scen = ScenarioSet(np.array([[[40.0, 10.0]]]), 0.0, [0.0, 0.0], [100.0, 100.0])
    assert dual_worst_case([3.0, -1.0], scen) == pytest.approx(110.0)


def test_random_objectives_match_inner_max():
    rng = np.random.default_rng(0)
    for _ in range(50):
        W = int(rng.integers(1, 5))
        scen = random_ball_scen(rng, W)
        c = rng.normal(size=W) * 10
        b = scen.ball(0, 0)
        want = inner_max_lp(c, b.center, b.radius, b.lo, b.hi)
        assert dual_worst_case(c, scen) == pytest.approx(want, rel=1e-7, abs=1e-7)


def dual_row_margin(base, coef, scen):
    """max of the dual anchor over theta, eta; equals the row's worst case over the ball."""
    W = scen.W
    row = RobustRow("r", "thermal", 0, Lin(const=base), {0: [Lin(const=float(a)) for a in coef]})
    vt = VarTable()
    rows, blocks = dualize_row(row, scen, vt)
    anchor = rows[0].expr
    if not len(vt):
        return anchor.const, blocks
    sol = solve_lp(build_lp(vt, rows[1:], -anchor))
    assert sol.optimal
    return -sol.objective, blocks


def test_zero_coefficient_row_has_no_duals():
    scen = ScenarioSet(np.array([[[40.0]]]), 0.1, [0.0], [100.0])
    val, blocks = dual_row_margin(5.0, [0.0], scen)
    assert val == 5.0 and blocks == []


def test_one_farm_flow_row():
    # flow(p) = f0 + a p <= P  written as  P - f0 - a p >= 0
    scen = ScenarioSet(np.array([[[40.0]]]), 0.1, [0.0], [100.0])
    a, f0, P = 0.6, 10.0, 40.0
    val, _ = dual_row_margin(P - f0, [-a], scen)
    assert val == pytest.approx(P - (f0 + a * 40 + 0.1 * 40 * abs(a)))


def test_random_rows_match_inner_min():
    rng = np.random.default_rng(1)
    for _ in range(50):
        W = int(rng.integers(1, 5))
        scen = random_ball_scen(rng, W)
        a = rng.normal(size=W)
        base = float(rng.normal() * 20)
        b = scen.ball(0, 0)
        worst = base - inner_max_lp(-a, b.center, b.radius, b.lo, b.hi)
        val, _ = dual_row_margin(base, a, scen)
        assert val == pytest.approx(worst, rel=1e-7, abs=1e-7)
        # robust feasibility decided identically by both routes
        assert (val >= -1e-9) == (worst >= -1e-9)


def no_wind_case():
    doc = minimal(T=3, load=(40.0, 60.0, 30.0), gas_load=(5.0, 8.0, 5.0), farms=(),
                  gens=[gen("G1", "1", pmin=10, pmax=50, cost=20, on=2, off=1),
                        gen("G2", "2", pmin=5, pmax=40, cost=35, on=1, off=1)])
    net = load_network(doc)
    scen = ScenarioSet(np.zeros((1, 3, 0)), 0.0, np.zeros(0), np.zeros(0))
    return net, scen


def test_no_wind_milp_equals_direct_model():
    net, scen = no_wind_case()
    lin = select_linearization_points(net, scen)
    rep = solve_sro(net, scen, lin=lin)
    direct = solve_direct(net, np.zeros((1, 3, 0)), lin)
    assert rep.optimal and direct.optimal
    assert rep.objective == pytest.approx(direct.objective, rel=1e-7)


def test_relaxation_bounds_milp(golden_report):
    relax = solve_lp(golden_report.milp.lp())
    assert relax.objective <= golden_report.objective + 1e-6


def test_milp_structure(golden_report):
    milp, model = golden_report.milp, golden_report.model
    uc = set(model.index["x"].ravel()) | set(model.index["u"].ravel()) | set(model.index["v"].ravel())
    assert set(milp.binaries) == uc
    assert all(r.family for r in milp.rows)
    c = milp.census()
    assert c["n_rows"] == len(milp.rows) == sum(c["rows"].values())
    # one objective block per (t, s) plus one per surviving robust row-period
    n_obj = sum(b.kind == "objective" for b in milp.blocks)
    assert n_obj == model.scenarios.S * model.scenarios.T
    for b in milp.blocks:
        assert len(b.gam) == 2 * model.scenarios.W


def test_objective_monotone_in_budget(golden):
    from conftest import solved

    vals = []
    for eps in (0.0, 0.01, 0.05, 0.1):
        rep = solved("golden", eps)
        vals.append(rep.objective if rep.optimal else np.inf)
    assert all(a <= b * (1 + 1e-9) for a, b in zip(vals, vals[1:]))
