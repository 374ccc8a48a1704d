"""Coupled power/gas network description, validation, PTDF and gas incidence."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components


class NetworkError(ValueError):
    """Invalid network document; message names the offending element."""


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Line:
    id: str
    from_bus: str
    to_bus: str
    reactance: float
    thermal_limit: float


@dataclass(frozen=True)
class Generator:
    id: str
    bus: str
    kind: str  # "coal-fired" | "gas-fired"
    cost: float
    no_load_cost: float
    startup_cost: float
    shutdown_cost: float
    p_min: float
    p_max: float
    ramp_up: float
    ramp_down: float
    startup_ramp: float
    shutdown_ramp: float
    min_on: int
    min_off: int
    # initial condition (period 0)
    initial_on: bool = False
    initial_output: float = 0.0
    initial_hours: int = 0  # periods the initial state must still be held


@dataclass(frozen=True)
class WindFarm:
    id: str
    bus: str
    p_min: float
    p_max: float


@dataclass(frozen=True)
class Pipeline:
    id: str
    from_node: str
    to_node: str
    weymouth: float
    flow_limit: float


@dataclass(frozen=True)
class Compressor:
    id: str
    from_node: str
    to_node: str
    ratio_min: float
    ratio_max: float
    flow_limit: float


@dataclass(frozen=True)
class Well:
    id: str
    node: str
    g_min: float
    g_max: float
    cost: float


@dataclass(frozen=True)
class GasNode:
    id: str
    pressure_min: float
    pressure_max: float


@dataclass(frozen=True)
class PowerSystem:
    buses: tuple
    reference_bus: str
    lines: tuple
    generators: tuple
    wind_farms: tuple
    load: np.ndarray  # (bus, T)

    def __post_init__(self):
        object.__setattr__(self, "load", _frozen(self.load))
        idx = {b: i for i, b in enumerate(self.buses)}
        object.__setattr__(self, "bus_index", idx)
        g = self.generators
        for name in ("cost", "no_load_cost", "startup_cost", "shutdown_cost", "p_min", "p_max",
                     "ramp_up", "ramp_down", "startup_ramp", "shutdown_ramp", "initial_output"):
            object.__setattr__(self, "g_" + name, _frozen([getattr(x, name) for x in g]))
        object.__setattr__(self, "g_bus", _frozen([idx[x.bus] for x in g], int))
        object.__setattr__(self, "g_gas", _frozen([x.kind == "gas-fired" for x in g], bool))
        object.__setattr__(self, "w_bus", _frozen([idx[w.bus] for w in self.wind_farms], int))
        object.__setattr__(self, "w_min", _frozen([w.p_min for w in self.wind_farms]))
        object.__setattr__(self, "w_max", _frozen([w.p_max for w in self.wind_farms]))
        object.__setattr__(self, "l_limit", _frozen([l.thermal_limit for l in self.lines]))

    @property
    def T(self) -> int:
        return self.load.shape[1]

    @property
    def total_load(self) -> np.ndarray:
        return self.load.sum(axis=0)


@dataclass(frozen=True)
class GasSystem:
    nodes: tuple
    reference_node: str
    pipelines: tuple
    compressors: tuple
    wells: tuple
    load: np.ndarray  # (node, T)

    def __post_init__(self):
        object.__setattr__(self, "load", _frozen(self.load))
        idx = {n.id: i for i, n in enumerate(self.nodes)}
        object.__setattr__(self, "node_index", idx)
        object.__setattr__(self, "pi_min", _frozen([n.pressure_min for n in self.nodes]))
        object.__setattr__(self, "pi_max", _frozen([n.pressure_max for n in self.nodes]))
        object.__setattr__(self, "well_min", _frozen([w.g_min for w in self.wells]))
        object.__setattr__(self, "well_max", _frozen([w.g_max for w in self.wells]))
        object.__setattr__(self, "well_cost", _frozen([w.cost for w in self.wells]))
        object.__setattr__(self, "well_node", _frozen([idx[w.node] for w in self.wells], int))

    @property
    def ref(self) -> int:
        return self.node_index[self.reference_node]

    def edges(self):
        """(from, to) node indices for pipelines followed by compressors."""
        ix = self.node_index
        return [(ix[p.from_node], ix[p.to_node]) for p in self.pipelines] + [
            (ix[c.from_node], ix[c.to_node]) for c in self.compressors
        ]


@dataclass(frozen=True)
class Coupling:
    generator: str
    gas_node: str
    chi: float


@dataclass(frozen=True)
class Ptdf:
    matrix: np.ndarray  # (line, bus)

    def flows(self, injection: np.ndarray) -> np.ndarray:
        return self.matrix @ np.asarray(injection, dtype=float)


@dataclass(frozen=True)
class GasIncidence:
    BW: np.ndarray
    BD: np.ndarray
    BG: np.ndarray
    BP: np.ndarray
    chi: np.ndarray
    ref: int

    def _cut(self, M):
        return np.delete(M, self.ref, axis=0)

    @property
    def BWr(self):
        return self._cut(self.BW)

    @property
    def BDr(self):
        return self._cut(self.BD)

    @property
    def BGr(self):
        return self._cut(self.BG)

    @property
    def BPr(self):
        return self._cut(self.BP)


@dataclass(frozen=True)
class IegsNetwork:
    power: PowerSystem
    gas: GasSystem
    coupling: tuple
    units: dict = field(default_factory=dict)
    name: str = "iegs"

    def __post_init__(self):
        gi = self.gas.node_index
        cmap = {c.generator: c for c in self.coupling}
        gas_gens = [i for i, g in enumerate(self.power.generators) if g.kind == "gas-fired"]
        object.__setattr__(self, "gas_gens", _frozen(gas_gens, int))
        object.__setattr__(self, "gas_gen_node", _frozen([gi[cmap[self.power.generators[i].id].gas_node] for i in gas_gens], int))
        object.__setattr__(self, "gas_gen_chi", _frozen([cmap[self.power.generators[i].id].chi for i in gas_gens]))

    @property
    def T(self) -> int:
        return self.power.T

    @property
    def n_wind(self) -> int:
        return len(self.power.wind_farms)


# ---------------------------------------------------------------- parsing

_GEN_KEYS = {
    "cost": "cost", "no_load_cost": "no_load_cost", "startup_cost": "startup_cost",
    "shutdown_cost": "shutdown_cost", "p_min": "p_min", "p_max": "p_max", "ramp_up": "ramp_up",
    "ramp_down": "ramp_down", "startup_ramp": "startup_ramp", "shutdown_ramp": "shutdown_ramp",
    "min_on": "min_on", "min_off": "min_off",
}


def _need(obj, key, where):
    if not isinstance(obj, dict) or key not in obj:
        raise NetworkError(f"schema violation: {where} missing '{key}'")
    return obj[key]


def _num(obj, key, where, default=None):
    if key not in obj:
        if default is None:
            raise NetworkError(f"schema violation: {where} missing '{key}'")
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise NetworkError(f"schema violation: {where} field '{key}' must be a number")
    return float(v)


def _profile(loads, key_node, ids, T, where):
    out = np.zeros((len(ids), T))
    pos = {n: i for i, n in enumerate(ids)}
    for k, d in enumerate(loads):
        node = str(_need(d, key_node, f"{where}[{k}]"))
        if node not in pos:
            raise NetworkError(f"{where}[{k}]: unknown location '{node}'")
        dem = np.asarray(_need(d, "demand", f"{where}[{k}]"), dtype=float).ravel()
        if dem.size != T:
            raise NetworkError(f"{where}[{k}] at '{node}': demand has {dem.size} periods, expected {T}")
        if np.any(dem < 0):
            raise NetworkError(f"{where}[{k}] at '{node}': negative demand")
        out[pos[node]] += dem
    return out


def _horizon(doc):
    T = doc.get("meta", {}).get("periods")
    if T is None:
        loads = doc["power"].get("loads") or doc["gas"].get("loads") or []
        if not loads:
            raise NetworkError("schema violation: cannot infer horizon (no loads and no meta.periods)")
        T = len(loads[0]["demand"])
    return int(T)


def parse_network(doc: dict) -> IegsNetwork:
    for key in ("power", "gas", "coupling"):
        _need(doc, key, "document")
    T = _horizon(doc)
    pw, gs = doc["power"], doc["gas"]

    buses = tuple(str(b) for b in _need(pw, "buses", "power"))
    if len(set(buses)) != len(buses):
        raise NetworkError("power.buses: duplicate bus id")
    ref_bus = str(_need(pw, "reference_bus", "power"))
    if ref_bus not in buses:
        raise NetworkError(f"power.reference_bus '{ref_bus}' is not a bus")
    bset = set(buses)

    lines = []
    for k, l in enumerate(pw.get("lines", [])):
        lid = str(l.get("id", f"L{k + 1}"))
        fb, tb = str(_need(l, "from_bus", lid)), str(_need(l, "to_bus", lid))
        if fb not in bset or tb not in bset or fb == tb:
            raise NetworkError(f"line '{lid}': bad endpoints {fb}->{tb}")
        x = _num(l, "reactance", lid)
        if x <= 0:
            raise NetworkError(f"line '{lid}': reactance must be positive")
        lines.append(Line(lid, fb, tb, x, _num(l, "thermal_limit", lid)))

    gens = []
    for k, g in enumerate(pw.get("generators", [])):
        gid = str(g.get("id", f"G{k + 1}"))
        bus = str(_need(g, "bus", gid))
        if bus not in bset:
            raise NetworkError(f"generator '{gid}': unknown bus '{bus}'")
        kind = g.get("kind", "coal-fired")
        if kind not in ("coal-fired", "gas-fired"):
            raise NetworkError(f"generator '{gid}': kind must be coal-fired or gas-fired")
        vals = {k2: _num(g, k1, gid, 0.0 if "cost" in k1 else None) for k1, k2 in _GEN_KEYS.items()}
        if vals["p_min"] > vals["p_max"]:
            raise NetworkError(f"generator '{gid}': p_min exceeds p_max")
        if vals["min_on"] < 1 or vals["min_off"] < 1:
            raise NetworkError(f"generator '{gid}': min_on/min_off must be at least 1")
        vals["min_on"], vals["min_off"] = int(vals["min_on"]), int(vals["min_off"])
        gens.append(Generator(
            gid, bus, kind, **vals,
            initial_on=bool(g.get("initial_on", False)),
            initial_output=float(g.get("initial_output", 0.0)),
            initial_hours=int(g.get("initial_hours", 0)),
        ))
    if len({g.id for g in gens}) != len(gens):
        raise NetworkError("power.generators: duplicate generator id")

    farms = []
    for k, w in enumerate(pw.get("wind_farms", [])):
        wid = str(w.get("id", f"W{k + 1}"))
        bus = str(_need(w, "bus", wid))
        if bus not in bset:
            raise NetworkError(f"wind farm '{wid}': unknown bus '{bus}'")
        lo, hi = _num(w, "p_min", wid, 0.0), _num(w, "p_max", wid)
        if lo > hi:
            raise NetworkError(f"wind farm '{wid}': p_min exceeds p_max")
        farms.append(WindFarm(wid, bus, lo, hi))
    pload = _profile(pw.get("loads", []), "bus", buses, T, "power.loads")

    nodes = []
    for k, n in enumerate(_need(gs, "nodes", "gas")):
        nid = str(_need(n, "id", f"gas.nodes[{k}]"))
        lo, hi = _num(n, "pressure_min", nid), _num(n, "pressure_max", nid)
        if lo <= 0 or lo > hi:
            raise NetworkError(f"gas node '{nid}': need 0 < pressure_min <= pressure_max")
        nodes.append(GasNode(nid, lo, hi))
    nids = [n.id for n in nodes]
    if len(set(nids)) != len(nids):
        raise NetworkError("gas.nodes: duplicate node id")
    nset = set(nids)
    ref_node = str(_need(gs, "reference_node", "gas"))
    if ref_node not in nset:
        raise NetworkError(f"gas.reference_node '{ref_node}' is not a node")

    pipes = []
    for k, p in enumerate(gs.get("pipelines", [])):
        pid = str(p.get("id", f"P{k + 1}"))
        a, b = str(_need(p, "from", pid)), str(_need(p, "to", pid))
        if a not in nset or b not in nset or a == b:
            raise NetworkError(f"pipeline '{pid}': bad endpoints {a}->{b}")
        W = _num(p, "weymouth", pid)
        if W <= 0:
            raise NetworkError(f"pipeline '{pid}': weymouth constant must be positive")
        pipes.append(Pipeline(pid, a, b, W, _num(p, "flow_limit", pid)))
    comps = []
    for k, c in enumerate(gs.get("compressors", [])):
        cid = str(c.get("id", f"C{k + 1}"))
        a, b = str(_need(c, "from", cid)), str(_need(c, "to", cid))
        if a not in nset or b not in nset or a == b:
            raise NetworkError(f"compressor '{cid}': bad endpoints {a}->{b}")
        lo, hi = _num(c, "ratio_min", cid), _num(c, "ratio_max", cid)
        if not 0 < lo <= hi:
            raise NetworkError(f"compressor '{cid}': need 0 < ratio_min <= ratio_max")
        comps.append(Compressor(cid, a, b, lo, hi, _num(c, "flow_limit", cid)))
    wells = []
    for k, w in enumerate(gs.get("wells", [])):
        wid = str(w.get("id", f"S{k + 1}"))
        node = str(_need(w, "node", wid))
        if node not in nset:
            raise NetworkError(f"well '{wid}': unknown node '{node}'")
        lo, hi = _num(w, "g_min", wid, 0.0), _num(w, "g_max", wid)
        if lo > hi:
            raise NetworkError(f"well '{wid}': g_min exceeds g_max")
        wells.append(Well(wid, node, lo, hi, _num(w, "cost", wid, 0.0)))
    gload = _profile(gs.get("loads", []), "node", nids, T, "gas.loads")

    coupling = []
    gen_ids = {g.id: g for g in gens}
    for k, c in enumerate(doc["coupling"]):
        gid = str(_need(c, "generator", f"coupling[{k}]"))
        if gid not in gen_ids or gen_ids[gid].kind != "gas-fired":
            raise NetworkError(f"coupling[{k}]: '{gid}' is not a gas-fired generator")
        node = str(_need(c, "gas_node", gid))
        if node not in nset:
            raise NetworkError(f"coupling for '{gid}': unknown gas node '{node}'")
        chi = _num(c, "chi", gid)
        if chi <= 0:
            raise NetworkError(f"coupling for '{gid}': chi must be positive")
        coupling.append(Coupling(gid, node, chi))
    seen = [c.generator for c in coupling]
    for g in gens:
        if g.kind == "gas-fired" and seen.count(g.id) != 1:
            raise NetworkError(f"missing coupling for gas-fired generator '{g.id}'")

    power = PowerSystem(buses, ref_bus, tuple(lines), tuple(gens), tuple(farms), pload)
    gas = GasSystem(tuple(nodes), ref_node, tuple(pipes), tuple(comps), tuple(wells), gload)
    _check_power_graph(power)
    _check_gas_tree(gas)
    units = dict(doc.get("meta", {}).get("units", {}))
    return IegsNetwork(power, gas, tuple(coupling), units, str(doc.get("meta", {}).get("name", "iegs")))


def load_network(source) -> IegsNetwork:
    """Load a network from a path, JSON text, or an already-parsed dict."""
    if isinstance(source, dict):
        return parse_network(source)
    if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
        text = Path(source).read_text()
    else:
        text = source
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NetworkError(f"schema violation: not valid JSON ({exc})") from None
    return parse_network(doc)


def _graph(n, edges):
    if not edges:
        return coo_matrix((n, n))
    e = np.asarray(edges)
    return coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))


def _check_power_graph(power: PowerSystem):
    ix = power.bus_index
    edges = [(ix[l.from_bus], ix[l.to_bus]) for l in power.lines]
    ncomp, lab = connected_components(_graph(len(power.buses), edges), directed=False)
    if ncomp > 1:
        lone = [power.buses[i] for i in range(len(lab)) if lab[i] != lab[ix[power.reference_bus]]]
        raise NetworkError(f"power network disconnected: bus '{lone[0]}' unreachable")


def _check_gas_tree(gas: GasSystem):
    n = len(gas.nodes)
    edges = gas.edges()
    ncomp, lab = connected_components(_graph(n, edges), directed=False)
    if len(edges) != n - 1 or ncomp != 1:
        if ncomp > 1:
            bad = [gas.nodes[i].id for i in range(n) if lab[i] != lab[gas.ref]]
            if len(edges) >= n:
                raise NetworkError(f"gas network not radial (cycle present; node '{bad[0]}' disconnected)")
            raise NetworkError(f"gas network not radial: node '{bad[0]}' disconnected")
        raise NetworkError(f"gas network not radial: {len(edges)} edges for {n} nodes (cycle)")


# ---------------------------------------------------------------- matrices

def compute_ptdf(power: PowerSystem) -> Ptdf:
    nb = len(power.buses)
    ref = power.bus_index[power.reference_bus]
    L = len(power.lines)
    A = np.zeros((L, nb))
    b = np.zeros(L)
    for k, l in enumerate(power.lines):
        A[k, power.bus_index[l.from_bus]] = 1.0
        A[k, power.bus_index[l.to_bus]] = -1.0
        b[k] = 1.0 / l.reactance
    B = A.T @ (b[:, None] * A)
    keep = np.arange(nb) != ref
    if nb == 1:
        return Ptdf(_frozen(np.zeros((L, 1))))
    lu, piv = scipy.linalg.lu_factor(B[np.ix_(keep, keep)])
    if np.any(np.abs(np.diag(lu)) < 1e-12 * max(1.0, np.abs(B).max())):
        raise NetworkError("singular reduced susceptance matrix (disconnected power network)")
    X = np.zeros((nb, nb))
    X[np.ix_(keep, keep)] = scipy.linalg.lu_solve((lu, piv), np.eye(nb - 1))
    beta = (b[:, None] * A) @ X
    beta[:, ref] = 0.0
    return Ptdf(_frozen(beta))


def build_gas_incidence(gas: GasSystem, network: IegsNetwork | None = None) -> GasIncidence:
    n = len(gas.nodes)
    edges = gas.edges()
    BP = np.zeros((n, len(edges)))
    for k, (a, b) in enumerate(edges):
        BP[a, k] = 1.0
        BP[b, k] = -1.0
    BW = np.zeros((n, len(gas.wells)))
    BW[gas.well_node, np.arange(len(gas.wells))] = 1.0
    BD = np.eye(n)
    if network is not None:
        ng = len(network.gas_gens)
        BG = np.zeros((n, ng))
        BG[network.gas_gen_node, np.arange(ng)] = 1.0
        chi = np.asarray(network.gas_gen_chi)
    else:
        BG, chi = np.zeros((n, 0)), np.zeros(0)
    inc = GasIncidence(_frozen(BW), _frozen(BD), _frozen(BG), _frozen(BP), _frozen(chi), gas.ref)
    if n > 1:
        BPr = inc.BPr
        if abs(abs(np.linalg.det(BPr)) - 1.0) > 1e-9:
            raise NetworkError("reduced pipeline incidence is singular (internal inconsistency)")
    return inc
