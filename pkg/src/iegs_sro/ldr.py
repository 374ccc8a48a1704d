"""Assembly of the decision-rule model: UC logic, affine recourse and tagged robust rows.

Recourse is affine in the total wind output xi = sum_w p_w of each (t, s):
generator output r + R*xi, well output s + S*xi, and N1 node pressure
o + O*xi, where N1 is the reference node plus the free gas nodes.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .affine import Lin, Row, VarTable, lsum, matvec
from .gas import FreeNodeSet, ReductionMatrices, WeymouthLinearization, build_reduction, locate_free_nodes
from .network import IegsNetwork, Ptdf, build_gas_incidence, compute_ptdf
from .scenarios import ScenarioSet

NONROBUST = "nonrobust"
ROBUST_SUM = "robust-sum"
ROBUST_FULL = "robust-full"


class ModelError(ValueError):
    pass


@dataclass
class RobustRow:
    """``base(z) + sum_t sum_w unc[t][w](z) * p_w^{t,s} >= 0`` for every p in the balls of ``s``."""

    name: str
    family: str
    s: int
    base: Lin
    unc: dict  # period -> list of Lin, one per farm
    meta: dict = field(default_factory=dict)

    @property
    def periods(self):
        return sorted(self.unc)

    def sum_coef(self, t, tol=1e-12):
        """Common coefficient of every farm at period t, or None if farms differ."""
        coefs = self.unc[t]
        first = coefs[0]
        if all(first.same(c, tol) for c in coefs[1:]):
            return first
        return None

    @property
    def tag(self):
        # thermal rows keep their family tag when farms sit on distinct buses,
        # even on lines where the two shift factors happen to coincide
        if self.meta.get("full"):
            return ROBUST_FULL
        if all(self.sum_coef(t) is not None for t in self.unc):
            return ROBUST_SUM
        return ROBUST_FULL

    def value(self, z, P):
        """Row value at decision z and wind ``P[t] -> farm vector``."""
        v = self.base.value(z)
        for t, coefs in self.unc.items():
            v += sum(c.value(z) * P[t][w] for w, c in enumerate(coefs))
        return v

    def coef_values(self, z, t):
        return np.array([c.value(z) for c in self.unc[t]])


@dataclass
class ObjTerm:
    """``weight * max_{p in ball(t, s)} base(z) + sum_w unc[w](z) * p_w``."""

    t: int
    s: int
    weight: float
    base: Lin
    unc: list


@dataclass
class RobustModel:
    network: IegsNetwork
    scenarios: ScenarioSet
    vars: VarTable
    nonrobust: list
    robust: list
    first_stage: Lin
    objective_terms: list
    index: dict
    linearization: WeymouthLinearization | None = None
    free_nodes: FreeNodeSet | None = None
    reductions: dict = field(default_factory=dict)
    ptdf: Ptdf | None = None

    def census(self):
        """Row counts per family and tag, variable counts per block."""
        rows = Counter()
        for r in self.nonrobust:
            rows[(r.family, NONROBUST)] += 1
        for r in self.robust:
            rows[(r.family, r.tag)] += 1
        var_blocks = {k: int(np.asarray(v).size) for k, v in self.index.items()}
        return {
            "variables": var_blocks,
            "n_variables": len(self.vars),
            "n_binaries": len(self.vars.binaries),
            "rows": {f"{fam}/{tag}": n for (fam, tag), n in sorted(rows.items())},
            "n_rows": len(self.nonrobust) + len(self.robust),
            "n_objective_terms": len(self.objective_terms),
        }


# ---------------------------------------------------------------- UC rules

def build_uc_constraints(power, T, x, u, v):
    """Commitment logic and minimum up/down rules over index arrays ``x, u, v`` shaped (G, T)."""
    rows = []
    for g, gen in enumerate(power.generators):
        ON, OFF = gen.min_on, gen.min_off
        if ON > T or OFF > T:
            raise ModelError(f"generator '{gen.id}': min_on/min_off exceeds horizon {T}")
        x0 = 1.0 if gen.initial_on else 0.0
        X = [Lin.var(x[g, t]) for t in range(T)]
        for t in range(T):
            prev = X[t - 1] if t > 0 else Lin(const=x0)
            e = X[t] - prev - Lin.var(u[g, t]) + Lin.var(v[g, t])
            rows.append(Row(f"state_logic[{gen.id},{t + 1}]", "state_logic", e, "E"))
        for t in range(T - ON + 1):
            e = lsum(X[t:t + ON]) - Lin.var(u[g, t], ON)
            rows.append(Row(f"min_up[{gen.id},{t + 1}]", "min_up", e))
        for t in range(T - OFF + 1):
            e = lsum([1 - X[k] for k in range(t, t + OFF)]) - Lin.var(v[g, t], OFF)
            rows.append(Row(f"min_down[{gen.id},{t + 1}]", "min_down", e))
        for t in range(T - ON, T):
            e = lsum(X[t:]) - lsum(Lin.var(u[g, k]) for k in range(t, T))
            rows.append(Row(f"min_up_tail[{gen.id},{t + 1}]", "min_up_tail", e))
        for t in range(T - OFF, T):
            e = lsum(1 - X[k] for k in range(t, T)) - lsum(Lin.var(v[g, k]) for k in range(t, T))
            rows.append(Row(f"min_down_tail[{gen.id},{t + 1}]", "min_down_tail", e))
        for t in range(min(gen.initial_hours, T)):
            rows.append(Row(f"initial_state[{gen.id},{t + 1}]", "initial_state", X[t] - x0, "E"))
    return rows


def uc_cost(power, T, x, u, v) -> Lin:
    out = Lin()
    for g, gen in enumerate(power.generators):
        for t in range(T):
            out.iadd(Lin.var(x[g, t], gen.no_load_cost))
            out.iadd(Lin.var(u[g, t], gen.startup_cost))
            out.iadd(Lin.var(v[g, t], gen.shutdown_cost))
    return out.clean()


# ---------------------------------------------------------------- power side

def _aff(a, b):
    return (Lin.var(a), Lin.var(b))


def _sum_row(name, family, s, t, base, slope, W, meta=None):
    return RobustRow(name, family, s, base, {t: [slope] * W}, meta or {})


def build_power_robust(network: IegsNetwork, ptdf: Ptdf, scen: ScenarioSet, idx):
    """Output bounds, ramping, thermal limits and the balance identities."""
    power = network.power
    T, S, W = scen.T, scen.S, scen.W
    x, u, v, r, R = idx["x"], idx["u"], idx["v"], idx["r"], idx["R"]
    robust, fixed = [], []
    beta = ptdf.matrix
    distinct = len(set(power.w_bus.tolist())) > 1
    for s in range(S):
        for t in range(T):
            for g, gen in enumerate(power.generators):
                a0, a1 = _aff(r[s, t, g], R[s, t, g])
                tag = f"{gen.id},{t + 1},{s + 1}"
                robust.append(_sum_row(f"gen_output[{tag},lo]", "gen_output", s, t,
                                       a0 - Lin.var(x[g, t], gen.p_min), a1, W, {"g": g, "t": t}))
                robust.append(_sum_row(f"gen_output[{tag},hi]", "gen_output", s, t,
                                       Lin.var(x[g, t], gen.p_max) - a0, -a1, W, {"g": g, "t": t}))
                # ramping against the previous period (or the initial dispatch)
                if t > 0:
                    p0, p1 = Lin.var(r[s, t - 1, g]), Lin.var(R[s, t - 1, g])
                    xprev = Lin.var(x[g, t - 1])
                elif gen.initial_on:
                    p0, p1, xprev = Lin(const=gen.initial_output), None, Lin(const=1.0)
                else:
                    continue
                down = a0 - p0 + Lin.var(x[g, t], gen.ramp_down) + Lin.var(v[g, t], gen.shutdown_ramp)
                up = xprev * gen.ramp_up + Lin.var(u[g, t], gen.startup_ramp) - a0 + p0
                unc_d = {t: [a1] * W}
                unc_u = {t: [-a1] * W}
                if p1 is not None:
                    unc_d[t - 1] = [-p1] * W
                    unc_u[t - 1] = [p1] * W
                meta = {"g": g, "t": t}
                robust.append(RobustRow(f"ramp[{tag},down]", "ramp", s, down, unc_d, meta))
                robust.append(RobustRow(f"ramp[{tag},up]", "ramp", s, up, unc_u, meta))
            # balance identities
            fixed.append(Row(f"power_balance[{t + 1},{s + 1},r]", "power_balance",
                             lsum(Lin.var(j) for j in r[s, t]) - float(power.total_load[t]), "E"))
            fixed.append(Row(f"power_balance[{t + 1},{s + 1},R]", "power_balance",
                             lsum(Lin.var(j) for j in R[s, t]) + 1.0, "E"))
            # thermal limits with per-farm uncertain coefficients
            for l, line in enumerate(power.lines):
                bg = beta[l, power.g_bus]
                bw = beta[l, power.w_bus]
                flow0 = lsum((Lin.var(r[s, t, g]) for g in range(len(bg))), bg)
                flow0.iadd(-float(beta[l] @ power.load[:, t]))
                slopeR = lsum((Lin.var(R[s, t, g]) for g in range(len(bg))), bg)
                coefs = [slopeR + float(bw[w]) for w in range(W)]
                meta = {"line": l, "t": t, "full": distinct}
                tag = f"{line.id},{t + 1},{s + 1}"
                robust.append(RobustRow(f"thermal[{tag},max]", "thermal", s,
                                        line.thermal_limit - flow0, {t: [-c for c in coefs]}, dict(meta, dir="max")))
                robust.append(RobustRow(f"thermal[{tag},min]", "thermal", s,
                                        flow0 + line.thermal_limit, {t: coefs}, dict(meta, dir="min")))
    return robust, fixed


# ---------------------------------------------------------------- gas side

def gas_injection(network: IegsNetwork, red: ReductionMatrices, t, s, idx):
    """Reduced nodal injections as (constant, slope) Lin lists over ``red.nonref``."""
    gas = network.gas
    N = len(gas.nodes)
    c0 = [Lin(const=-float(gas.load[n, t])) for n in range(N)]
    c1 = [Lin() for _ in range(N)]
    for k, n in enumerate(gas.well_node):
        c0[n].iadd(Lin.var(idx["s"][s, t, k]))
        c1[n].iadd(Lin.var(idx["S"][s, t, k]))
    for k, g in enumerate(network.gas_gens):
        n = network.gas_gen_node[k]
        chi = float(network.gas_gen_chi[k])
        c0[n].iadd(Lin.var(idx["r"][s, t, g]), -chi)
        c1[n].iadd(Lin.var(idx["R"][s, t, g]), -chi)
    return [c0[n] for n in red.nonref], [c1[n] for n in red.nonref]


def gas_affine_state(network: IegsNetwork, red: ReductionMatrices, t, s, idx):
    """Edge flows and nodal pressures as (constant, slope) Lin pairs."""
    inj0, inj1 = gas_injection(network, red, t, s, idx)
    f0, f1 = matvec(red.QP, inj0), matvec(red.QP, inj1)
    N = len(network.gas.nodes)
    p0 = [None] * N
    p1 = [None] * N
    n1_0 = [Lin.var(j) for j in idx["o"][s, t]]
    n1_1 = [Lin.var(j) for j in idx["O"][s, t]]
    for k, n in enumerate(red.N1):
        p0[n], p1[n] = n1_0[k], n1_1[k]
    if red.N2:
        q0 = matvec(red.QNP, inj0)
        q1 = matvec(red.QNP, inj1)
        m0 = matvec(red.QNF, n1_0)
        m1 = matvec(red.QNF, n1_1)
        for k, n in enumerate(red.N2):
            p0[n] = q0[k] - m0[k]
            p1[n] = q1[k] - m1[k]
    return (f0, f1), (p0, p1)


def build_gas_robust(network: IegsNetwork, reductions, scen: ScenarioSet, idx):
    gas = network.gas
    T, S, W = scen.T, scen.S, scen.W
    ix = gas.node_index
    L = len(gas.pipelines)
    robust, fixed = [], []
    for s in range(S):
        for t in range(T):
            red = reductions[(t, s)]
            (f0, f1), (p0, p1) = gas_affine_state(network, red, t, s, idx)
            ts = f"{t + 1},{s + 1}"
            for k, well in enumerate(gas.wells):
                a0, a1 = _aff(idx["s"][s, t, k], idx["S"][s, t, k])
                robust.append(_sum_row(f"well_output[{well.id},{ts},lo]", "well_output", s, t, a0 - well.g_min, a1, W))
                robust.append(_sum_row(f"well_output[{well.id},{ts},hi]", "well_output", s, t, well.g_max - a0, -a1, W))
            for n, node in enumerate(gas.nodes):
                robust.append(_sum_row(f"pressure[{node.id},{ts},lo]", "pressure", s, t,
                                       p0[n] - node.pressure_min, p1[n], W, {"node": n}))
                robust.append(_sum_row(f"pressure[{node.id},{ts},hi]", "pressure", s, t,
                                       node.pressure_max - p0[n], -p1[n], W, {"node": n}))
            for c, comp in enumerate(gas.compressors):
                a, b = ix[comp.from_node], ix[comp.to_node]
                # outlet / inlet pressure ratio within [ratio_min, ratio_max]
                lo0 = p0[b] - p0[a] * comp.ratio_min
                lo1 = p1[b] - p1[a] * comp.ratio_min
                hi0 = p0[a] * comp.ratio_max - p0[b]
                hi1 = p1[a] * comp.ratio_max - p1[b]
                robust.append(_sum_row(f"compressor_ratio[{comp.id},{ts},lo]", "compressor_ratio", s, t, lo0, lo1, W))
                robust.append(_sum_row(f"compressor_ratio[{comp.id},{ts},hi]", "compressor_ratio", s, t, hi0, hi1, W))
            for e in range(len(f0)):
                if e < L:
                    fam, el = "pipe_flow", gas.pipelines[e]
                else:
                    fam, el = "compressor_flow", gas.compressors[e - L]
                robust.append(_sum_row(f"{fam}[{el.id},{ts},lo]", fam, s, t, f0[e].copy(), f1[e].copy(), W))
                robust.append(_sum_row(f"{fam}[{el.id},{ts},hi]", fam, s, t, el.flow_limit - f0[e], -f1[e], W))
            # total gas balance identities
            chi = network.gas_gen_chi
            gg = network.gas_gens
            e0 = lsum(Lin.var(j) for j in idx["s"][s, t]) - lsum((Lin.var(idx["r"][s, t, g]) for g in gg), chi)
            e0.iadd(-float(gas.load[:, t].sum()))
            e1 = lsum(Lin.var(j) for j in idx["S"][s, t]) - lsum((Lin.var(idx["R"][s, t, g]) for g in gg), chi)
            fixed.append(Row(f"gas_balance[{ts},s]", "gas_balance", e0, "E"))
            fixed.append(Row(f"gas_balance[{ts},S]", "gas_balance", e1, "E"))
    return robust, fixed


# ---------------------------------------------------------------- assembly

def allocate(network: IegsNetwork, scen: ScenarioSet, n_n1: int, vt: VarTable | None = None):
    vt = vt or VarTable()
    G = len(network.power.generators)
    T, S = scen.T, scen.S
    idx = {}
    idx["x"] = vt.block("x", (G, T), 0, 1, True)
    idx["u"] = vt.block("u", (G, T), 0, 1, True)
    idx["v"] = vt.block("v", (G, T), 0, 1, True)
    idx["r"] = vt.block("r", (S, T, G))
    idx["R"] = vt.block("R", (S, T, G))
    nw = len(network.gas.wells)
    idx["s"] = vt.block("s", (S, T, nw))
    idx["S"] = vt.block("S", (S, T, nw))
    idx["o"] = vt.block("o", (S, T, n_n1))
    idx["O"] = vt.block("O", (S, T, n_n1))
    return vt, idx


def objective_terms(network, scen, idx):
    power, gas = network.power, network.gas
    terms = []
    W = scen.W
    for s in range(scen.S):
        for t in range(scen.T):
            base = lsum((Lin.var(j) for j in idx["r"][s, t]), power.g_cost)
            base.iadd(lsum((Lin.var(j) for j in idx["s"][s, t]), gas.well_cost))
            slope = lsum((Lin.var(j) for j in idx["R"][s, t]), power.g_cost)
            slope.iadd(lsum((Lin.var(j) for j in idx["S"][s, t]), gas.well_cost))
            terms.append(ObjTerm(t, s, 1.0 / scen.S, base.clean(), [slope.clean()] * W))
    return terms


def assemble(network: IegsNetwork, scen: ScenarioSet, lin: WeymouthLinearization,
             reductions=None, free: FreeNodeSet | None = None, ptdf: Ptdf | None = None) -> RobustModel:
    if scen.T != network.T:
        raise ModelError(f"samples cover {scen.T} periods, network has {network.T}")
    if scen.W != network.n_wind:
        raise ModelError("sample width does not match wind farm count")
    ptdf = ptdf or compute_ptdf(network.power)
    free = free or locate_free_nodes(network.gas)
    if reductions is None:
        inc = build_gas_incidence(network.gas, network)
        reductions = {(t, s): build_reduction(network, inc, free, lin, t, s)
                      for s in range(scen.S) for t in range(scen.T)}
    n1 = len(next(iter(reductions.values())).N1)
    vt, idx = allocate(network, scen, n1)
    uc = build_uc_constraints(network.power, scen.T, idx["x"], idx["u"], idx["v"])
    p_rob, p_fix = build_power_robust(network, ptdf, scen, idx)
    g_rob, g_fix = build_gas_robust(network, reductions, scen, idx)
    robust = p_rob + g_rob
    nonrobust = uc + p_fix + g_fix
    if scen.W == 0:
        # no wind: every robust row is deterministic
        nonrobust += [Row(r.name, r.family, r.base, "G") for r in robust]
        robust = []
    for r in robust:
        r.base.clean()
    return RobustModel(
        network=network, scenarios=scen, vars=vt, nonrobust=nonrobust, robust=robust,
        first_stage=uc_cost(network.power, scen.T, idx["x"], idx["u"], idx["v"]),
        objective_terms=objective_terms(network, scen, idx), index=idx,
        linearization=lin, free_nodes=free, reductions=reductions, ptdf=ptdf,
    )
