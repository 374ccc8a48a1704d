import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from iegs_sro.milp import (
    INFEASIBLE, OPTIMAL, UNBOUNDED, BnbOptions, LpProblem, read_mps, solve_lp, solve_milp, write_mps,
)
from oracles import enumerate_binary, tableau_lp

DATA = __import__("pathlib").Path(__file__).parent / "data"


def random_lp(rng, n=None, m=None):
    n = n or int(rng.integers(2, 41))
    m = m or int(rng.integers(1, 31))
    A = rng.normal(size=(m, n)).round(3)
    x0 = rng.uniform(0, 5, n)
    senses = rng.choice(["L", "G", "E"], m, p=[0.5, 0.35, 0.15])
    ax = A @ x0
    slack = rng.uniform(0, 2, m)
    b = np.where(senses == "L", ax + slack, np.where(senses == "G", ax - slack, ax))
    ub = np.where(rng.random(n) < 0.3, rng.uniform(5, 10, n), np.inf)
    c = rng.normal(size=n).round(3)
    # keep bounded: box any free-above column loosely
    ub = np.where(np.isfinite(ub), ub, 50.0)
    return c, A, senses, b, ub


def dual_objective(prob, sol):
    """Lagrangian bound from the returned multipliers; equals the primal value at optimality."""
    y, d = sol.duals, sol.reduced_costs
    val = prob.rhs @ y + prob.offset
    for j, dj in enumerate(d):
        if dj > 1e-12:
            val += dj * prob.lb[j]
        elif dj < -1e-12:
            val += dj * prob.ub[j]
    return val


def test_trivial_lps():
    s = solve_lp(LpProblem(c=[-1], A=[[1]], senses=["L"], rhs=[1], lb=[0], ub=[np.inf]))
    assert s.status == OPTIMAL and s.x[0] == pytest.approx(1) and s.objective == pytest.approx(-1)
    s = solve_lp(LpProblem(c=[0], A=[[1], [1]], senses=["G", "L"], rhs=[2, 1], lb=[0], ub=[np.inf]))
    assert s.status == INFEASIBLE
    s = solve_lp(LpProblem(c=[-1, 0], A=[[1, -1]], senses=["L"], rhs=[1], lb=[0, 0], ub=[np.inf, np.inf]))
    assert s.status == UNBOUNDED


def test_random_lps_match_tableau_oracle():
    rng = np.random.default_rng(11)
    checked = 0
    for _ in range(200):
        c, A, senses, b, ub = random_lp(rng)
        prob = LpProblem(c=c, A=A, senses=senses, rhs=b, lb=np.zeros(c.size), ub=ub)
        status, x, obj = tableau_lp(c, A, senses, b, ub)
        sol = solve_lp(prob)
        assert sol.status == status
        if status == OPTIMAL:
            assert sol.objective == pytest.approx(obj, rel=1e-7, abs=1e-7)
            assert prob.residual(sol.x) <= 1e-7
            checked += 1
    assert checked == 200


def test_lp_duality_certificate():
    rng = np.random.default_rng(5)
    for _ in range(60):
        c, A, senses, b, ub = random_lp(rng, n=int(rng.integers(2, 15)), m=int(rng.integers(1, 12)))
        prob = LpProblem(c=c, A=A, senses=senses, rhs=b, lb=np.zeros(c.size), ub=ub)
        sol = solve_lp(prob)
        assert sol.status == OPTIMAL
        y = sol.duals
        # sign conditions for a minimisation
        assert np.all(y[senses == "L"] <= 1e-9) and np.all(y[senses == "G"] >= -1e-9)
        assert np.allclose(prob.c - prob.A.T @ y, sol.reduced_costs, atol=1e-7)
        assert dual_objective(prob, sol) == pytest.approx(sol.objective, rel=1e-7, abs=1e-7)


def test_free_and_negative_bounds():
    # min x + y, x free, y in [-3, 2], x + y >= -1, x - y <= 4
    prob = LpProblem(c=[1, 1], A=[[1, 1], [1, -1]], senses=["G", "L"], rhs=[-1, 4],
                     lb=[-np.inf, -3], ub=[np.inf, 2])
    s = solve_lp(prob)
    assert s.status == OPTIMAL and s.objective == pytest.approx(-1)
    h = solve_lp(prob, backend="highs")
    assert h.objective == pytest.approx(s.objective)


def test_small_binary_problem():
    prob = LpProblem(c=[-1, -1], A=[[1, 1]], senses=["L"], rhs=[1.5], lb=[0, 0], ub=[1, 1])
    s = solve_milp(prob, [0, 1])
    assert s.status == OPTIMAL and s.objective == pytest.approx(-1)


def test_knapsack_matches_enumeration():
    rng = np.random.default_rng(3)
    w = rng.integers(5, 30, 10).astype(float)
    v = rng.integers(5, 40, 10).astype(float)
    cap = 0.4 * w.sum()
    prob = LpProblem(c=-v, A=[w], senses=["L"], rhs=[cap], lb=np.zeros(10), ub=np.ones(10))
    best, _ = enumerate_binary(-v, [w], ["L"], [cap])
    s = solve_milp(prob, range(10))
    assert s.objective == pytest.approx(best)
    assert s.bound <= s.objective + 1e-9


def test_totally_unimodular_at_root():
    # assignment problem: the relaxation is integral
    rng = np.random.default_rng(1)
    k = 4
    cost = rng.integers(1, 20, (k, k)).astype(float).ravel()
    A, b = [], []
    for i in range(k):
        r = np.zeros(k * k)
        r[i * k:(i + 1) * k] = 1
        A.append(r)
        col = np.zeros(k * k)
        col[i::k] = 1
        A.append(col)
        b += [1, 1]
    prob = LpProblem(c=cost, A=A, senses=["E"] * len(A), rhs=b, lb=np.zeros(k * k), ub=np.ones(k * k))
    s = solve_milp(prob, range(k * k))
    assert s.status == OPTIMAL and s.nodes == 1


def random_milp(rng):
    nb = int(rng.integers(3, 13))
    m = int(rng.integers(2, 7))
    A = rng.integers(-5, 10, (m, nb)).astype(float)
    senses = rng.choice(["L", "G"], m, p=[0.7, 0.3])
    ref = rng.integers(0, 2, nb).astype(float)
    ax = A @ ref
    b = np.where(senses == "L", ax + rng.integers(0, 6, m), ax - rng.integers(0, 6, m)).astype(float)
    c = rng.integers(-10, 10, nb).astype(float)
    return c, A, senses, b


def test_bnb_matches_enumeration():
    rng = np.random.default_rng(8)
    for _ in range(50):
        c, A, senses, b = random_milp(rng)
        nb = c.size
        prob = LpProblem(c=c, A=A, senses=senses, rhs=b, lb=np.zeros(nb), ub=np.ones(nb))
        best, _ = enumerate_binary(c, A, senses, b)
        s = solve_milp(prob, range(nb))
        assert s.status == OPTIMAL
        assert s.objective == pytest.approx(best, abs=1e-7)
        assert np.all(np.abs(s.x - np.round(s.x)) <= 1e-6)
        assert prob.residual(s.x) <= 1e-7
        assert s.bound <= s.objective + 1e-9


def test_mixed_milp_matches_enumeration_with_lp_oracle():
    import itertools

    rng = np.random.default_rng(21)
    for _ in range(10):
        nb, nc = 4, 3
        A = rng.normal(size=(4, nb + nc)).round(2)
        x0 = np.concatenate([rng.integers(0, 2, nb), rng.uniform(0, 2, nc)])
        b = A @ x0 + rng.uniform(0, 1, 4)
        c = rng.normal(size=nb + nc).round(2)
        ub = np.concatenate([np.ones(nb), np.full(nc, 5.0)])
        best = np.inf
        for z in itertools.product((0.0, 1.0), repeat=nb):
            z = np.array(z)
            st, _, obj = tableau_lp(c[nb:], A[:, nb:], ["L"] * 4, b - A[:, :nb] @ z, ub[nb:])
            if st == OPTIMAL:
                best = min(best, obj + c[:nb] @ z)
        prob = LpProblem(c=c, A=A, senses=["L"] * 4, rhs=b, lb=np.zeros(nb + nc), ub=ub)
        s = solve_milp(prob, range(nb))
        assert s.objective == pytest.approx(best, abs=1e-7)


def test_bnb_deterministic():
    rng = np.random.default_rng(2)
    c, A, senses, b = random_milp(rng)
    prob = LpProblem(c=c, A=A, senses=senses, rhs=b, lb=np.zeros(c.size), ub=np.ones(c.size))
    a, bb = solve_milp(prob, range(c.size)), solve_milp(prob, range(c.size))
    assert a.nodes == bb.nodes and np.array_equal(a.x, bb.x)


def test_bnb_options_validate():
    with pytest.raises(ValueError):
        BnbOptions(int_tol=0)


def test_mps_golden_one_variable():
    prob = LpProblem(c=[2.5], A=[[1]], senses=["G"], rhs=[1], lb=[0], ub=[4], name="one",
                     col_names=["x"], row_names=["floor"])
    text, names = write_mps(prob, [])
    assert text == (DATA / "one_var.mps").read_text()
    assert names.splitlines()[0] == "name,original"


def test_mps_binary_markers():
    prob = LpProblem(c=[1, 1], A=[[1, 1]], senses=["G"], rhs=[1], lb=[0, 0], ub=[1, 3])
    text, _ = write_mps(prob, [0])
    lines = text.splitlines()
    i = next(k for k, l in enumerate(lines) if "INTORG" in l)
    assert "x0" in lines[i + 1] and "INTEND" in lines[i + 2]
    back, bins = read_mps(text)
    assert list(bins) == [0]


def test_mps_long_names_get_unique_short_names():
    names = ["a_very_long_variable_name_1", "a_very_long_variable_name_2", "short"]
    prob = LpProblem(c=[1, 1, 1], A=[[1, 1, 1]], senses=["L"], rhs=[3], lb=[0] * 3, ub=[1] * 3,
                     col_names=names, row_names=["row_with_long_name"])
    text, side = write_mps(prob)
    rows = [l.split(",") for l in side.splitlines()[1:]]
    short = [r[0] for r in rows]
    assert len(set(short)) == len(short) and all(len(s) <= 8 for s in short)
    assert {r[1] for r in rows} >= set(names)


def test_mps_round_trip_random():
    rng = np.random.default_rng(4)
    for _ in range(20):
        c, A, senses, b = random_milp(rng)
        prob = LpProblem(c=c, A=A, senses=senses, rhs=b, lb=np.zeros(c.size), ub=np.ones(c.size), offset=3.25)
        text, _ = write_mps(prob, range(c.size))
        back, bins = read_mps(text)
        assert np.array_equal(back.A, prob.A) and np.array_equal(back.rhs, prob.rhs)
        assert np.array_equal(back.lb, prob.lb) and np.array_equal(back.ub, prob.ub)
        assert back.offset == prob.offset
        s1, s2 = solve_milp(prob, range(c.size)), solve_milp(back, bins)
        assert s1.objective == s2.objective and np.array_equal(s1.x, s2.x)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_simplex_agrees_with_highs(seed):
    rng = np.random.default_rng(seed)
    c, A, senses, b, ub = random_lp(rng, n=int(rng.integers(2, 12)), m=int(rng.integers(1, 10)))
    prob = LpProblem(c=c, A=A, senses=senses, rhs=b, lb=np.zeros(c.size), ub=ub)
    s, h = solve_lp(prob), solve_lp(prob, backend="highs")
    assert s.status == h.status
    assert s.objective == pytest.approx(h.objective, rel=1e-7, abs=1e-7)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_bnb_bound_never_exceeds_incumbent(seed):
    rng = np.random.default_rng(seed)
    c, A, senses, b = random_milp(rng)
    prob = LpProblem(c=c, A=A, senses=senses, rhs=b, lb=np.zeros(c.size), ub=np.ones(c.size))
    s = solve_milp(prob, range(c.size))
    relax = solve_lp(prob)
    assert relax.objective <= s.bound + 1e-9 <= s.objective + 2e-9
