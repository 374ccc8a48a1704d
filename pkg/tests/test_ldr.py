import itertools

import numpy as np
import pytest

from iegs_sro.affine import Lin, VarTable
from iegs_sro.fixtures import census_formula
from iegs_sro.gas import linearization_from_points, select_linearization_points
from iegs_sro.ldr import (
    NONROBUST, ROBUST_FULL, ROBUST_SUM, ModelError, assemble, build_uc_constraints,
)
from iegs_sro.network import build_gas_incidence, compute_ptdf, load_network
from iegs_sro.scenarios import ScenarioSet, ingest_samples
from builders import gen, minimal
from conftest import fixture_case


def uc_rows(on, off, T):
    net = load_network(minimal(T=T, load=[40.0] * T, gas_load=[5.0] * T, gens=[gen("G1", "1", on=on, off=off)]))
    vt = VarTable()
    x, u, v = (vt.block(k, (1, T), 0, 1, True) for k in "xuv")
    return build_uc_constraints(net.power, T, x, u, v), (x, u, v)


def feasible(rows, z):
    for r in rows:
        val = r.expr.value(z)
        if (r.sense == "E" and abs(val) > 1e-9) or (r.sense == "G" and val < -1e-9):
            return False
    return True


def test_min_up_enumeration():
    rows, (x, u, v) = uc_rows(2, 1, 3)
    hits = 0
    for bits in itertools.product((0, 1), repeat=9):
        z = np.array(bits, float)
        if feasible(rows, z) and z[u[0, 1]] == 1:
            hits += 1
            assert z[x[0, 1]] == 1 and z[x[0, 2]] == 1
    assert hits > 0


def test_unit_windows_reduce_to_simple_bounds():
    rows, (x, u, v) = uc_rows(1, 1, 3)
    ups = [r for r in rows if r.family == "min_up"]
    assert len(ups) == 3
    assert ups[0].expr.coef == {x[0, 0]: 1.0, u[0, 0]: -1.0}
    downs = [r for r in rows if r.family == "min_down"]
    assert downs[0].expr.coef == {x[0, 0]: -1.0, v[0, 0]: -1.0} and downs[0].expr.const == 1.0


def test_all_off_schedule_is_feasible():
    rows, _ = uc_rows(2, 2, 4)
    assert feasible(rows, np.zeros(12))


def test_min_time_beyond_horizon():
    with pytest.raises(ModelError):
        uc_rows(4, 1, 3)


def tiny_model(farms=(("W1", "1", 30.0),), gens=None, T=2, samples=None, eps=0.0):
    net = load_network(minimal(T=T, farms=farms, gens=gens))
    W = len(farms)
    pbar = samples if samples is not None else np.full((1, T, W), 10.0)
    scen = ScenarioSet(pbar, eps, net.power.w_min, net.power.w_max)
    lin = select_linearization_points(net, scen)
    return net, scen, assemble(net, scen, lin)


def test_single_generator_balance_forces_response():
    net, scen, model = tiny_model()
    R = model.index["R"]
    rows = [r for r in model.nonrobust if r.family == "power_balance" and r.name.endswith("R]")]
    assert rows[0].expr.coef == {R[0, 0, 0]: 1.0} and rows[0].expr.const == 1.0


def test_zero_wind_collapses_tags():
    net, scen, model = tiny_model(farms=(), samples=np.zeros((1, 2, 0)))
    assert model.robust == []
    assert all(k.endswith(NONROBUST) for k in model.census()["rows"])


def test_thermal_coefficients_per_farm():
    farms = (("W1", "1", 30.0), ("W2", "2", 30.0))
    gens = [gen("G1", "1"), gen("G2", "2")]
    net, scen, model = tiny_model(farms=farms, gens=gens, samples=np.full((1, 2, 2), 10.0))
    beta = compute_ptdf(net.power).matrix
    R = model.index["R"]
    rng = np.random.default_rng(0)
    z = rng.normal(size=len(model.vars))
    row = next(r for r in model.robust if r.family == "thermal" and r.name.endswith("min]"))
    got = row.coef_values(z, 0)
    want = [beta[0, net.power.w_bus[w]] + sum(beta[0, net.power.g_bus[g]] * z[R[0, 0, g]] for g in range(2))
            for w in range(2)]
    assert got == pytest.approx(want)
    assert got[0] != pytest.approx(got[1])
    assert row.tag == ROBUST_FULL


def test_tags_match_symbolic_coefficients(golden):
    net, doc, scen, lin = golden
    model = assemble(net, scen.with_budget(0.05), lin)
    for r in model.robust:
        symbolic_sum = all(r.sum_coef(t) is not None for t in r.periods)
        if r.family == "thermal":
            assert r.tag == ROBUST_FULL
        else:
            assert r.tag == (ROBUST_SUM if symbolic_sum else ROBUST_FULL)
            assert r.tag == ROBUST_SUM
    ramps = [r for r in model.robust if r.family == "ramp" and r.meta["t"] > 0]
    assert ramps and all(len(r.periods) == 2 for r in ramps)


def test_no_compressors_no_ratio_rows():
    net, scen, model = tiny_model()
    fams = {r.family for r in model.robust}
    assert "compressor_ratio" not in fams and "compressor_flow" not in fams


def test_no_gas_generators_keep_gas_rows_power_free():
    net, scen, model = tiny_model()
    power_vars = set(model.index["r"].ravel()) | set(model.index["R"].ravel())
    gas_fams = {"well_output", "pressure", "pipe_flow", "gas_balance"}
    for r in model.robust:
        if r.family in gas_fams:
            used = set(r.base.coef) | {j for cs in r.unc.values() for c in cs for j in c.coef}
            assert not used & power_vars
    for r in model.nonrobust:
        if r.family == "gas_balance":
            assert not set(r.expr.coef) & power_vars


@pytest.mark.parametrize("name", ["golden", "medium", "large", "single"])
def test_census_matches_hand_count(name):
    net, doc, scen, lin = fixture_case(name, S=2)
    model = assemble(net, scen, lin)
    want = census_formula(doc, 2)
    got = model.census()
    assert got["rows"] == want["rows"] == doc["meta"]["census"]["rows"]
    assert got["variables"] == want["variables"]
    assert got["n_rows"] == want["n_rows"]


def test_zero_budget_single_scenario_objective_is_affine_cost_at_center():
    net, scen, model = tiny_model()
    z = np.random.default_rng(1).normal(size=len(model.vars))
    for term in model.objective_terms:
        c = scen.pbar[term.s, term.t]
        val = term.base.value(z) + sum(u.value(z) * c[w] for w, u in enumerate(term.unc))
        r, R = model.index["r"][0, term.t, 0], model.index["R"][0, term.t, 0]
        s, S = model.index["s"][0, term.t, 0], model.index["S"][0, term.t, 0]
        xi = c.sum()
        want = net.power.generators[0].cost * (z[r] + z[R] * xi) + net.gas.wells[0].cost * (z[s] + z[S] * xi)
        assert val == pytest.approx(want)


def test_mismatched_samples_rejected():
    net = load_network(minimal())
    scen = ScenarioSet(np.full((1, 3, 1), 5.0), 0.0, [0.0], [30.0])
    lin = linearization_from_points(net, np.full((1, 3, 1), 90.0), np.full((1, 3, 1), 80.0))
    with pytest.raises(ModelError):
        assemble(net, scen, lin)


# ---------------------------------------------------------------- solved-policy properties

def _ball_points(ball, n, rng):
    """Points of the 1-norm ball: a random step of random length, then clipped into the box."""
    W = ball.W
    d = rng.laplace(size=(n, W))
    d *= (rng.random((n, 1)) * ball.radius) / np.maximum(np.abs(d).sum(axis=1, keepdims=True), 1e-300)
    return np.clip(ball.center + d, ball.lo, ball.hi)


def test_balance_identities_hold_for_any_wind(golden_report):
    rep = golden_report
    net, scen, z = rep.model.network, rep.model.scenarios, rep.z
    idx = rep.model.index
    rng = np.random.default_rng(3)
    chi = np.asarray(net.gas_gen_chi)
    for s in range(scen.S):
        for t in range(scen.T):
            for p in rng.uniform(0, 200, (20, scen.W)):
                xi = p.sum()
                pg = z[idx["r"][s, t]] + z[idx["R"][s, t]] * xi
                assert pg.sum() + xi == pytest.approx(net.power.total_load[t], abs=1e-6)
                wells = z[idx["s"][s, t]] + z[idx["S"][s, t]] * xi
                gas_need = chi @ pg[net.gas_gens] + net.gas.load[:, t].sum()
                assert wells.sum() == pytest.approx(gas_need, abs=1e-6)


def test_policy_feasible_on_sampled_points(golden_report):
    """Rebuild second-stage physics directly (PTDF flows, incidence, Weymouth tangents) and check bounds."""
    rep = golden_report
    net, scen, z, model = rep.model.network, rep.model.scenarios, rep.z, rep.model
    idx, lin = model.index, model.linearization
    power, gas = net.power, net.gas
    beta = compute_ptdf(power).matrix
    inc = build_gas_incidence(gas, net)
    x = np.round(z[idx["x"]])
    rng = np.random.default_rng(7)
    N1 = list(next(iter(model.reductions.values())).N1)
    ix = gas.node_index
    L = len(gas.pipelines)
    tol = 1e-6
    for s in range(scen.S):
        for t in range(scen.T):
            ball = scen.ball(t, s)
            Km, Kn = lin.at(t, s)
            for p in _ball_points(ball, 100, rng):
                xi = p.sum()
                pg = z[idx["r"][s, t]] + z[idx["R"][s, t]] * xi
                assert np.all(pg >= power.g_p_min * x[:, t] - tol) and np.all(pg <= power.g_p_max * x[:, t] + tol)
                inj = np.zeros(len(power.buses))
                np.add.at(inj, power.g_bus, pg)
                np.add.at(inj, power.w_bus, p)
                inj -= power.load[:, t]
                flow = beta @ inj
                assert np.all(np.abs(flow) <= power.l_limit + tol)
                wells = z[idx["s"][s, t]] + z[idx["S"][s, t]] * xi
                assert np.all(wells >= gas.well_min - tol) and np.all(wells <= gas.well_max + tol)
                g_inj = inc.BW @ wells - gas.load[:, t] - inc.BG @ (np.asarray(net.gas_gen_chi) * pg[net.gas_gens])
                f = np.linalg.lstsq(inc.BP, g_inj, rcond=None)[0]
                assert np.allclose(inc.BP @ f, g_inj, atol=1e-7)
                assert np.all(f >= -tol)
                assert np.all(f[:L] <= [pp.flow_limit for pp in gas.pipelines] + np.array(tol))
                # pressures: N1 from the rule, the rest from the tangent equations
                n = len(gas.nodes)
                M = np.zeros((L + len(N1), n))
                rhs = np.zeros(L + len(N1))
                for l, pp in enumerate(gas.pipelines):
                    M[l, ix[pp.from_node]], M[l, ix[pp.to_node]] = Km[l], -Kn[l]
                    rhs[l] = f[l]
                for k, nn in enumerate(N1):
                    M[L + k, nn] = 1.0
                    rhs[L + k] = z[idx["o"][s, t, k]] + z[idx["O"][s, t, k]] * xi
                P = np.linalg.solve(M, rhs)
                assert np.all(P >= gas.pi_min - tol) and np.all(P <= gas.pi_max + tol)
                for c in gas.compressors:
                    ratio = P[ix[c.to_node]] / P[ix[c.from_node]]
                    assert c.ratio_min - 1e-8 <= ratio <= c.ratio_max + 1e-8
