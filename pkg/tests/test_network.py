import copy
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from iegs_sro.network import NetworkError, build_gas_incidence, compute_ptdf, load_network, parse_network
from builders import dc_flows, gen, minimal, random_power, random_tree_gas, with_gas


def test_minimal_document():
    net = load_network(minimal())
    assert len(net.power.lines) == 1 and len(net.gas.pipelines) == 1
    assert net.T == 2 and net.n_wind == 1


def test_load_from_text_and_path(tmp_path):
    doc = minimal()
    p = tmp_path / "n.json"
    p.write_text(json.dumps(doc))
    assert load_network(p).T == load_network(json.dumps(doc)).T == 2


def test_gas_cycle_rejected():
    doc = minimal()
    doc["gas"]["nodes"].append({"id": "N3", "pressure_min": 50.0, "pressure_max": 100.0})
    doc["gas"]["pipelines"] += [
        {"id": "P2", "from": "N2", "to": "N3", "weymouth": 1.0, "flow_limit": 10.0},
        {"id": "P3", "from": "N3", "to": "N1", "weymouth": 1.0, "flow_limit": 10.0},
    ]
    with pytest.raises(NetworkError, match="gas network not radial"):
        parse_network(doc)


def test_missing_coupling():
    doc = minimal(gens=[gen("G1", "1"), gen("G2", "2", kind="gas-fired")])
    with pytest.raises(NetworkError, match="missing coupling"):
        parse_network(doc)
    doc["coupling"] = [{"generator": "G2", "gas_node": "N2", "chi": 2.0}]
    assert parse_network(doc).gas_gens.tolist() == [1]


@pytest.mark.parametrize("mutate, msg", [
    (lambda d: d["power"]["lines"][0].update(reactance=0.0), "reactance"),
    (lambda d: d["power"]["generators"][0].update(p_min=200.0), "p_min exceeds p_max"),
    (lambda d: d["power"]["generators"][0].update(min_on=0), "min_on"),
    (lambda d: d["power"].update(reference_bus="9"), "reference_bus"),
    (lambda d: d["power"].update(lines=[]), "disconnected"),
    (lambda d: d["gas"]["nodes"][0].update(pressure_min=0.0), "pressure_min"),
    (lambda d: d["gas"]["pipelines"][0].update(weymouth=-1.0), "weymouth"),
    (lambda d: d["power"]["wind_farms"][0].update(p_min=50.0), "p_min exceeds p_max"),
    (lambda d: d.pop("gas"), "missing 'gas'"),
])
def test_invalid_documents(mutate, msg):
    doc = minimal()
    mutate(doc)
    with pytest.raises(NetworkError, match=msg):
        parse_network(doc)


def test_ptdf_two_bus():
    net = load_network(minimal())
    beta = compute_ptdf(net.power).matrix
    assert beta[0, 1] == pytest.approx(-1.0) and beta[0, 0] == 0.0


def test_ptdf_triangle_split():
    doc = minimal()
    doc["power"]["buses"] = ["1", "2", "3"]
    doc["power"]["lines"] = [
        {"id": "L12", "from_bus": "1", "to_bus": "2", "reactance": 0.1, "thermal_limit": 10},
        {"id": "L13", "from_bus": "1", "to_bus": "3", "reactance": 0.1, "thermal_limit": 10},
        {"id": "L32", "from_bus": "3", "to_bus": "2", "reactance": 0.1, "thermal_limit": 10},
    ]
    beta = compute_ptdf(load_network(doc).power)
    f = beta.flows([0, 1, 0])
    assert f == pytest.approx([-2 / 3, -1 / 3, -1 / 3])
    assert np.all(beta.flows(np.zeros(3)) == 0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 12), st.booleans())
def test_ptdf_matches_direct_solve(seed, nb, meshed):
    rng = np.random.default_rng(seed)
    doc = minimal()
    doc["power"] = random_power(rng, nb, meshed)
    net = parse_network(doc)
    inj = rng.normal(size=nb) * 10
    ref = net.power.bus_index[net.power.reference_bus]
    inj_bal = inj.copy()
    inj_bal[ref] -= inj_bal.sum()
    got = compute_ptdf(net.power).flows(inj_bal)
    assert np.allclose(got, dc_flows(doc["power"], inj), atol=1e-9)


def test_incidence_two_node():
    inc = build_gas_incidence(load_network(minimal()).gas)
    assert inc.BPr.tolist() == [[-1.0]]


def test_incidence_path_graph():
    doc = minimal()
    doc["gas"]["nodes"] = [{"id": f"N{i}", "pressure_min": 50.0, "pressure_max": 100.0} for i in range(1, 5)]
    doc["gas"]["pipelines"] = [{"id": f"P{i}", "from": f"N{i}", "to": f"N{i + 1}", "weymouth": 1.0,
                                "flow_limit": 50.0} for i in range(1, 4)]
    inc = build_gas_incidence(load_network(doc).gas)
    M = inc.BPr
    assert M.shape == (3, 3) and abs(np.linalg.det(M)) == pytest.approx(1.0)
    # bidiagonal: node k+1 touches pipelines k and k+1 only
    assert np.count_nonzero(M - np.diag(np.diag(M)) - np.diag(np.diag(M, 1), 1)) == 0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 15))
def test_tree_incidence_unimodular(seed, n):
    rng = np.random.default_rng(seed)
    nc = int(rng.integers(0, min(3, n - 1) + 1))
    net = parse_network(with_gas(minimal(), random_tree_gas(rng, n, nc)))
    inc = build_gas_incidence(net.gas)
    assert np.all(inc.BP.sum(axis=0) == 0)
    assert np.all((inc.BP == 1).sum(axis=0) == 1) and np.all((inc.BP == -1).sum(axis=0) == 1)
    assert np.linalg.matrix_rank(inc.BPr) == n - 1
    assert abs(np.linalg.det(inc.BPr)) == pytest.approx(1.0)


def test_no_compressor_columns_all_pipelines():
    net = load_network(minimal())
    assert build_gas_incidence(net.gas).BP.shape[1] == len(net.gas.pipelines)


def test_network_is_immutable():
    net = load_network(minimal())
    with pytest.raises(Exception):
        net.power.load[0, 0] = 1.0
