"""Seeded synthetic coupled systems (stand-ins for unavailable test data).

``generate`` draws a meshed power grid and a radial gas tree with compressors,
sizes loads against installed capacity and draws wind samples around a smooth
daily-shaped profile. Out-of-sample test draws come from ``oos_draws``:
uniform within +/- ``spread`` (fraction of capacity) around the same profile.
"""
from __future__ import annotations

import json
from importlib import resources

import numpy as np

from .network import load_network
from .scenarios import ingest_samples

MAX_RETRIES = 25
LIMITS = {"buses": (2, 30), "gas_nodes": (2, 30), "periods": (1, 24), "scenarios": (1, 50)}


class FixtureError(ValueError):
    pass


def _profile(T, phase):
    t = np.arange(T)
    return 0.45 + 0.2 * np.sin(2 * np.pi * (t + phase) / max(T, 6))


def _power_part(rng, nb, n_gen, n_gas_gen, n_farms, T, load_level=0.5, wind_scale=1.0):
    buses = [str(i + 1) for i in range(nb)]
    edges = [(int(rng.integers(0, i)), i) for i in range(1, nb)]
    extra = 0 if nb < 3 else int(rng.integers(1, max(2, nb // 2) + 1))
    pairs = {tuple(sorted(e)) for e in edges}
    for _ in range(extra):
        a, b = sorted(rng.choice(nb, 2, replace=False).tolist())
        if (a, b) not in pairs:
            pairs.add((a, b))
            edges.append((a, b))
    gens = []
    for k in range(n_gen):
        gas_fired = k >= n_gen - n_gas_gen
        pmax = float(rng.integers(8, 16) * 10)
        pmin = float(round(pmax * rng.uniform(0.15, 0.3)))
        ramp = float(round(pmax * rng.uniform(0.4, 0.7)))
        gens.append({
            "id": f"G{k + 1}", "bus": buses[int(rng.integers(0, nb))],
            "kind": "gas-fired" if gas_fired else "coal-fired",
            "cost": 0.0 if gas_fired else float(rng.integers(18, 40)),
            "no_load_cost": float(rng.integers(10, 30) * 10),
            "startup_cost": float(rng.integers(20, 60) * 10),
            "shutdown_cost": float(rng.integers(5, 15) * 10),
            "p_min": pmin, "p_max": pmax, "ramp_up": ramp, "ramp_down": ramp,
            "startup_ramp": pmax, "shutdown_ramp": pmax,
            "min_on": int(rng.integers(1, 3)), "min_off": int(rng.integers(1, 3)),
        })
    farms = []
    for k in range(n_farms):
        farms.append({"id": f"W{k + 1}", "bus": buses[int(rng.integers(0, nb))], "p_min": 0.0,
                      "p_max": float(round(rng.integers(3, 7) * 10 * wind_scale))})
    cap = sum(g["p_max"] for g in gens)
    shape = 0.75 + 0.2 * np.sin(2 * np.pi * (np.arange(T) + 2) / max(T, 6))
    total = load_level * cap * shape + 0.45 * sum(f["p_max"] for f in farms)
    share = rng.dirichlet(np.ones(nb))
    loads = [{"bus": buses[i], "demand": [round(float(x), 2) for x in total * share[i]]} for i in range(nb)]
    lines = [{"id": f"L{k + 1}", "from_bus": buses[a], "to_bus": buses[b],
              "reactance": round(float(rng.uniform(0.05, 0.2)), 4), "thermal_limit": 0.0}
             for k, (a, b) in enumerate(edges)]
    return {"buses": buses, "reference_bus": buses[0], "lines": lines, "generators": gens,
            "wind_farms": farms, "loads": loads}


def _size_lines(doc, rng, tight):
    """Thermal limits from a proportional dispatch, with headroom."""
    from .network import compute_ptdf, parse_network

    tmp = json.loads(json.dumps(doc))
    for ln in tmp["power"]["lines"]:
        ln["thermal_limit"] = 1.0
    net = parse_network(tmp)
    beta = compute_ptdf(net.power).matrix
    pw = net.power
    worst = np.zeros(len(pw.lines))
    for t in range(net.T):
        share = pw.g_p_max / pw.g_p_max.sum()
        inj = -pw.load[:, t].copy()
        wind = 0.45 * pw.w_max
        np.add.at(inj, pw.w_bus, wind)
        np.add.at(inj, pw.g_bus, share * (pw.total_load[t] - wind.sum()))
        worst = np.maximum(worst, np.abs(beta @ inj))
    for k, ln in enumerate(doc["power"]["lines"]):
        f = rng.uniform(1.2, 1.5) if k in tight else rng.uniform(1.8, 3.0)
        ln["thermal_limit"] = float(round(max(worst[k] * f, 10.0), 1))


def _gas_part(rng, nn, nc, gas_gens, T, gas_scale):
    nodes = [f"N{i + 1}" for i in range(nn)]
    parent = [-1] + [int(rng.integers(0, i)) for i in range(1, nn)]
    edge_ids = list(range(1, nn))  # edge into node i from parent[i]
    comp_edges = set(rng.choice(edge_ids, nc, replace=False).tolist()) if nc else set()
    # demand: base gas loads at non-reference nodes plus gas-fired units
    base = np.zeros(nn)
    for i in range(1, nn):
        base[i] = float(rng.integers(2, 6) * 10)
    gen_nodes = {}
    for g in gas_gens:
        n = int(rng.integers(1, nn)) if nn > 1 else 0
        gen_nodes[g["id"]] = n
        base[n] += 0.0
    chi = {g["id"]: round(float(rng.uniform(1.5, 2.5)), 2) for g in gas_gens}
    peak = base.copy()
    for g in gas_gens:
        peak[gen_nodes[g["id"]]] += chi[g["id"]] * g["p_max"]
    # downstream peak per edge
    down = peak.copy()
    for i in range(nn - 1, 0, -1):
        down[parent[i]] += down[i]
    nodes_doc = [{"id": nodes[i], "pressure_min": 50.0, "pressure_max": 100.0} for i in range(nn)]
    pipes, comps = [], []
    for i in range(1, nn):
        flow = max(down[i], 1.0)
        if i in comp_edges:
            comps.append({"id": f"C{len(comps) + 1}", "from": nodes[parent[i]], "to": nodes[i],
                          "ratio_min": 1.0, "ratio_max": round(float(rng.uniform(1.2, 1.5)), 2),
                          "flow_limit": float(round(1.5 * flow, 1))})
        else:
            W = flow / np.sqrt(100.0 ** 2 - 88.0 ** 2)
            pipes.append({"id": f"P{len(pipes) + 1}", "from": nodes[parent[i]], "to": nodes[i],
                          "weymouth": round(float(W), 4), "flow_limit": float(round(1.5 * flow, 1))})
    total_peak = peak.sum()
    wells = [{"id": "S1", "node": nodes[0], "g_min": 0.0, "g_max": float(round(1.3 * total_peak, 1)),
              "cost": round(float(rng.uniform(10, 16)), 2)}]
    if nn > 2:
        wells.append({"id": "S2", "node": nodes[0], "g_min": 0.0, "g_max": float(round(0.4 * total_peak, 1)),
                      "cost": round(float(rng.uniform(16, 22)), 2)})
    shape = 0.8 + 0.15 * np.cos(2 * np.pi * np.arange(T) / max(T, 6))
    loads = [{"node": nodes[i], "demand": [round(float(x), 2) for x in base[i] * shape * gas_scale]}
             for i in range(1, nn)]
    coupling = [{"generator": g["id"], "gas_node": nodes[gen_nodes[g["id"]]], "chi": chi[g["id"]]}
                for g in gas_gens]
    gas = {"nodes": nodes_doc, "reference_node": nodes[0], "pipelines": pipes, "compressors": comps,
           "wells": wells, "loads": loads}
    return gas, coupling


def draw_samples(rng, farms, T, S, spread=0.15, phase=0.0):
    cap = np.array([f["p_max"] for f in farms])
    prof = _profile(T, phase)[:, None] * cap[None, :]
    noise = rng.uniform(-spread, spread, size=(S, T, len(farms))) * cap
    return np.clip(prof[None] + noise, 0.0, cap).round(3)


def samples_text(pbar, farm_ids):
    lines = ["scenario,period,farm,value"]
    S, T, W = pbar.shape
    for s in range(S):
        for t in range(T):
            for w in range(W):
                lines.append(f"{s + 1},{t + 1},{farm_ids[w]},{pbar[s, t, w]:.3f}")
    return "\n".join(lines) + "\n"


def generate(buses=3, gas_nodes=3, compressors=1, seed=7, periods=4, scenarios=3, farms=2,
             generators=None, gas_generators=None, tight_lines=1, load_level=0.6, wind_scale=3.0, check=True):
    """Return ``(network_doc, samples_csv)``; retries until the zero-budget model solves."""
    for key, val in (("buses", buses), ("gas_nodes", gas_nodes), ("periods", periods), ("scenarios", scenarios)):
        lo, hi = LIMITS[key]
        if not lo <= val <= hi:
            raise FixtureError(f"--{key.replace('_', '-')} must be within [{lo}, {hi}]")
    if compressors < 0 or compressors > gas_nodes - 1:
        raise FixtureError(f"--compressors must be within [0, {gas_nodes - 1}] (gas tree edges)")
    if farms < 0:
        raise FixtureError("--farms must be nonnegative")
    n_gen = generators if generators is not None else max(2, buses)
    n_gas = gas_generators if gas_generators is not None else max(1, n_gen // 2)
    if not 1 <= n_gen <= 20 or not 0 <= n_gas <= n_gen:
        raise FixtureError("generator counts out of range")
    rng = np.random.default_rng(seed)
    for attempt in range(MAX_RETRIES):
        power = _power_part(rng, buses, n_gen, n_gas, farms, periods, load_level, wind_scale)
        gas_gens = [g for g in power["generators"] if g["kind"] == "gas-fired"]
        gas, coupling = _gas_part(rng, gas_nodes, compressors, gas_gens, periods, 1.0)
        doc = {
            "meta": {"name": f"iegs-{buses}-{gas_nodes}-{compressors}-s{seed}", "periods": periods,
                     "units": {"power": "MW", "gas": "kcf/h", "pressure": "psia", "cost": "$"},
                     "generator": {"buses": buses, "gas_nodes": gas_nodes, "compressors": compressors,
                                   "seed": seed, "periods": periods, "scenarios": scenarios, "farms": farms}},
            "power": power, "gas": gas, "coupling": coupling,
        }
        tight = set(rng.choice(len(power["lines"]), min(tight_lines, len(power["lines"])), replace=False).tolist()) \
            if power["lines"] else set()
        _size_lines(doc, rng, tight)
        pbar = draw_samples(rng, power["wind_farms"], periods, scenarios)
        text = samples_text(pbar, [f["id"] for f in power["wind_farms"]])
        if not check or _solvable(doc, text):
            return doc, text
    raise FixtureError(f"fixture generation failed after {MAX_RETRIES} infeasible draws")


def _solvable(doc, text):
    from .gas import GasReductionError, select_linearization_points
    from .pipeline import solve_sro

    net = load_network(doc)
    scen = ingest_samples(text, net, 0.0)
    try:
        lin = select_linearization_points(net, scen)
    except GasReductionError:
        return False
    rep = solve_sro(net, scen, lin=lin)
    return rep.status == "optimal"


# ---------------------------------------------------------------- bundled data

BUNDLED = {
    "golden": "iegs_3_3_1.json",
    "medium": "iegs_5_5_1.json",
    "large": "iegs_6_7_2.json",
    "single": "iegs_single.json",
}

RECIPES = {
    "golden": dict(buses=3, gas_nodes=3, compressors=1, seed=7),
    "medium": dict(buses=5, gas_nodes=5, compressors=1, seed=11, periods=4, scenarios=3),
    "large": dict(buses=6, gas_nodes=7, compressors=2, seed=5, periods=3, scenarios=2),
    "single": dict(buses=2, gas_nodes=2, compressors=0, seed=3, periods=3, scenarios=2, farms=1,
                   generators=1, gas_generators=0),
}


def bundled_path(name):
    return resources.files("iegs_sro") / "data" / BUNDLED[name]


def bundled(name):
    """``(network, samples_csv)`` for a bundled fixture."""
    p = bundled_path(name)
    net = load_network(p.read_text())
    csv_text = (resources.files("iegs_sro") / "data" / BUNDLED[name].replace(".json", ".csv")).read_text()
    return net, csv_text


def oos_draws(network, n=100, seed=2024, spread=0.25):
    """Fresh out-of-sample wind realizations, (n, T, W)."""
    rng = np.random.default_rng(seed)
    farms = [{"p_max": w.p_max} for w in network.power.wind_farms]
    return draw_samples(rng, farms, network.T, n, spread=spread)


def census_formula(doc, S):
    """Row and variable counts of the assembled robust model, counted by hand per family.

    Independent of the assembler: it reads only sizes and per-unit min-time data.
    """
    pw, gs = doc["power"], doc["gas"]
    T = int(doc["meta"]["periods"])
    gens = pw["generators"]
    G, L, W = len(gens), len(pw["lines"]), len(pw["wind_farms"])
    N, C, P, K = len(gs["nodes"]), len(gs["compressors"]), len(gs["pipelines"]), len(gs["wells"])
    on = [int(g["min_on"]) for g in gens]
    off = [int(g["min_off"]) for g in gens]
    init_on = sum(bool(g.get("initial_on", False)) for g in gens)
    hold = sum(min(int(g.get("initial_hours", 0)), T) for g in gens)
    sum_tag = "robust-sum" if W else "nonrobust"
    # thermal rows see farm-specific coefficients unless every farm sits on one bus
    farm_buses = {f["bus"] for f in pw["wind_farms"]}
    th_tag = "robust-full" if len(farm_buses) > 1 else sum_tag
    rows = {
        "state_logic/nonrobust": G * T,
        "min_up/nonrobust": sum(T - k + 1 for k in on),
        "min_down/nonrobust": sum(T - k + 1 for k in off),
        "min_up_tail/nonrobust": sum(on),
        "min_down_tail/nonrobust": sum(off),
        "initial_state/nonrobust": hold,
        "power_balance/nonrobust": 2 * T * S,
        "gas_balance/nonrobust": 2 * T * S,
        f"gen_output/{sum_tag}": 2 * G * T * S,
        f"ramp/{sum_tag}": 2 * S * (G * (T - 1) + init_on),
        f"thermal/{th_tag}": 2 * L * T * S,
        f"well_output/{sum_tag}": 2 * K * T * S,
        f"pressure/{sum_tag}": 2 * N * T * S,
        f"compressor_ratio/{sum_tag}": 2 * C * T * S,
        f"pipe_flow/{sum_tag}": 2 * P * T * S,
        f"compressor_flow/{sum_tag}": 2 * C * T * S,
    }
    rows = {k: v for k, v in sorted(rows.items()) if v}
    variables = {"x": G * T, "u": G * T, "v": G * T, "r": S * T * G, "R": S * T * G,
                 "s": S * T * K, "S": S * T * K, "o": S * T * (1 + C), "O": S * T * (1 + C)}
    return {"scenarios": S, "rows": rows, "n_rows": sum(rows.values()), "variables": variables,
            "n_variables": sum(variables.values())}


def write_bundled(directory):
    """Regenerate every bundled fixture into ``directory``."""
    from pathlib import Path

    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    for name, recipe in RECIPES.items():
        doc, text = generate(**recipe)
        doc["meta"]["census"] = census_formula(doc, 2)
        doc["meta"]["test_draws"] = {"seed": 2024, "spread": 0.25, "profile": "0.45 + 0.2 sin(2 pi (t + phase) / max(T, 6))"}
        path = out / BUNDLED[name]
        path.write_text(json.dumps(doc, indent=1) + "\n")
        path.with_suffix(".csv").write_text(text)
