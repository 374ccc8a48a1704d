"""Small hand-written network documents for unit tests."""
from __future__ import annotations

import copy

import numpy as np


def gen(gid, bus, kind="coal-fired", pmin=10.0, pmax=100.0, cost=20.0, ramp=100.0, on=1, off=1, **kw):
    d = {"id": gid, "bus": bus, "kind": kind, "cost": cost, "no_load_cost": 50.0, "startup_cost": 100.0,
         "shutdown_cost": 10.0, "p_min": pmin, "p_max": pmax, "ramp_up": ramp, "ramp_down": ramp,
         "startup_ramp": pmax, "shutdown_ramp": pmax, "min_on": on, "min_off": off}
    d.update(kw)
    return d


def minimal(T=2, load=(40.0, 50.0), gas_load=(5.0, 5.0), farms=(("W1", "1", 30.0),), gens=None,
            limit=500.0, weymouth=2.0):
    """Two buses, two gas nodes, one line and one pipeline."""
    load = list(load)[:T]
    return {
        "meta": {"name": "tiny", "periods": T, "units": {"power": "MW", "gas": "kcf/h", "pressure": "psia"}},
        "power": {
            "buses": ["1", "2"], "reference_bus": "1",
            "lines": [{"id": "L1", "from_bus": "1", "to_bus": "2", "reactance": 0.1, "thermal_limit": limit}],
            "generators": gens or [gen("G1", "1")],
            "wind_farms": [{"id": w, "bus": b, "p_min": 0.0, "p_max": p} for w, b, p in farms],
            "loads": [{"bus": "2", "demand": load}],
        },
        "gas": {
            "nodes": [{"id": "N1", "pressure_min": 50.0, "pressure_max": 100.0},
                      {"id": "N2", "pressure_min": 50.0, "pressure_max": 100.0}],
            "reference_node": "N1",
            "pipelines": [{"id": "P1", "from": "N1", "to": "N2", "weymouth": weymouth, "flow_limit": 200.0}],
            "compressors": [],
            "wells": [{"id": "S1", "node": "N1", "g_min": 0.0, "g_max": 100.0, "cost": 2.0}],
            "loads": [{"node": "N2", "demand": list(gas_load)[:T]}],
        },
        "coupling": [],
    }


def random_tree_gas(rng, n, n_comp):
    """Random radial gas network dict: ``n`` nodes, ``n_comp`` of the tree edges are compressors."""
    parent = [int(rng.integers(0, i)) for i in range(1, n)]
    edges = [(p, i + 1) for i, p in enumerate(parent)]
    comp = set(rng.choice(len(edges), n_comp, replace=False).tolist()) if n_comp else set()
    ref = int(rng.integers(0, n))
    pipes, comps = [], []
    for k, (a, b) in enumerate(edges):
        if rng.random() < 0.5:
            a, b = b, a
        if k in comp:
            comps.append({"id": f"C{k}", "from": f"N{a}", "to": f"N{b}", "ratio_min": 1.0, "ratio_max": 1.3,
                          "flow_limit": 500.0})
        else:
            pipes.append({"id": f"P{k}", "from": f"N{a}", "to": f"N{b}", "weymouth": float(rng.uniform(0.5, 3)),
                          "flow_limit": 500.0})
    return {
        "nodes": [{"id": f"N{i}", "pressure_min": 50.0, "pressure_max": 100.0} for i in range(n)],
        "reference_node": f"N{ref}", "pipelines": pipes, "compressors": comps,
        "wells": [{"id": "S1", "node": f"N{ref}", "g_min": 0.0, "g_max": 1000.0, "cost": 1.0}],
        "loads": [],
    }


def with_gas(doc, gas):
    d = copy.deepcopy(doc)
    d["gas"] = gas
    d["meta"]["periods"] = len(d["power"]["loads"][0]["demand"])
    return d


def random_power(rng, nb, meshed=True):
    buses = [str(i + 1) for i in range(nb)]
    lines = []
    for i in range(1, nb):
        j = int(rng.integers(0, i))
        lines.append((j, i))
    if meshed:
        for _ in range(int(rng.integers(0, nb))):
            a, b = rng.choice(nb, 2, replace=False)
            lines.append((int(a), int(b)))
    return {
        "buses": buses, "reference_bus": buses[int(rng.integers(0, nb))],
        "lines": [{"id": f"L{k}", "from_bus": buses[a], "to_bus": buses[b],
                   "reactance": float(rng.uniform(0.05, 0.5)), "thermal_limit": 100.0}
                  for k, (a, b) in enumerate(lines)],
        "generators": [gen("G1", buses[0])], "wind_farms": [],
        "loads": [{"bus": buses[-1], "demand": [10.0, 10.0]}],
    }


def dc_flows(power_doc, injection):
    """Flows by solving the full susceptance system directly (pseudo-inverse, no PTDF)."""
    buses = power_doc["buses"]
    ix = {b: i for i, b in enumerate(buses)}
    nb = len(buses)
    B = np.zeros((nb, nb))
    for l in power_doc["lines"]:
        a, b, y = ix[l["from_bus"]], ix[l["to_bus"]], 1 / l["reactance"]
        B[a, a] += y
        B[b, b] += y
        B[a, b] -= y
        B[b, a] -= y
    ref = ix[power_doc["reference_bus"]]
    inj = np.asarray(injection, float).copy()
    inj[ref] -= inj.sum()  # the reference bus balances
    theta = np.linalg.lstsq(B, inj, rcond=None)[0]
    theta -= theta[ref]
    return np.array([(theta[ix[l["from_bus"]]] - theta[ix[l["to_bus"]]]) / l["reactance"]
                     for l in power_doc["lines"]])
