"""Direct second-stage model with explicit dispatch, flow and pressure variables.

One full recourse block per wind realization. Used for the zero-budget
linearization LP, the exact-recourse sample average model and out-of-sample
feasibility checks.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .affine import Lin, Row, VarTable, build_lp, lsum
from .ldr import build_uc_constraints, uc_cost
from .milp import solve_lp, solve_milp
from .milp.bnb import BnbOptions
from .milp.lp import OPTIMAL
from .network import IegsNetwork, compute_ptdf


@dataclass
class DirectResult:
    status: str
    objective: float
    x: np.ndarray | None
    index: dict
    rows: list
    pressures: np.ndarray | None = None  # (S, T, N)
    dispatch: np.ndarray | None = None  # (S, T, G)
    uc: dict | None = None
    violated: list | None = None  # families of rows flagged by phase 1
    gap: float = 0.0

    @property
    def optimal(self):
        return self.status == OPTIMAL


def build_direct(network: IegsNetwork, wind, lin, uc_fixed=None, relax=False, tie_break=0.0,
                 lin_scenario=None, ptdf=None):
    """Assemble the direct model.

    ``wind`` is (S, T, W). ``lin_scenario[s, t]`` picks which linearization
    scenario supplies the Weymouth coefficients (default: the same s).
    ``uc_fixed`` maps x/u/v to (G, T) arrays to fix the commitment.
    """
    power, gas = network.power, network.gas
    wind = np.asarray(wind, dtype=float)
    S, T, W = wind.shape
    G, N = len(power.generators), len(gas.nodes)
    L, C, nw = len(gas.pipelines), len(gas.compressors), len(gas.wells)
    ptdf = ptdf or compute_ptdf(power)
    vt = VarTable()
    idx = {}
    binary = not relax and uc_fixed is None
    idx["x"] = vt.block("x", (G, T), 0, 1, binary)
    idx["u"] = vt.block("u", (G, T), 0, 1, binary)
    idx["v"] = vt.block("v", (G, T), 0, 1, binary)
    idx["p"] = vt.block("p", (S, T, G))
    idx["gw"] = vt.block("gw", (S, T, nw))
    idx["pi"] = vt.block("pi", (S, T, N))
    idx["fl"] = vt.block("fl", (S, T, L), 0.0)
    idx["fc"] = vt.block("fc", (S, T, C), 0.0)
    for s in range(S):
        for t in range(T):
            for k, w in enumerate(gas.wells):
                vt.lb[idx["gw"][s, t, k]], vt.ub[idx["gw"][s, t, k]] = w.g_min, w.g_max
            for n, node in enumerate(gas.nodes):
                vt.lb[idx["pi"][s, t, n]], vt.ub[idx["pi"][s, t, n]] = node.pressure_min, node.pressure_max
            for l, p in enumerate(gas.pipelines):
                vt.ub[idx["fl"][s, t, l]] = p.flow_limit
            for c, comp in enumerate(gas.compressors):
                vt.ub[idx["fc"][s, t, c]] = comp.flow_limit
    if uc_fixed is not None:
        for key in ("x", "u", "v"):
            vals = np.asarray(uc_fixed[key], dtype=float)
            for j, val in zip(idx[key].ravel(), vals.ravel()):
                vt.lb[j] = vt.ub[j] = float(round(val))

    x, u, v, p = idx["x"], idx["u"], idx["v"], idx["p"]
    rows = build_uc_constraints(power, T, x, u, v)
    beta = ptdf.matrix
    ix = gas.node_index
    for s in range(S):
        ls = s if lin_scenario is None else None
        for t in range(T):
            ts = f"{t + 1},{s + 1}"
            for g, gen in enumerate(power.generators):
                P = Lin.var(p[s, t, g])
                if uc_fixed is not None:
                    # commitment known: output limits are plain bounds
                    on = vt.lb[x[g, t]]
                    vt.lb[p[s, t, g]], vt.ub[p[s, t, g]] = on * gen.p_min, on * gen.p_max
                else:
                    rows.append(Row(f"gen_output[{gen.id},{ts},lo]", "gen_output", P - Lin.var(x[g, t], gen.p_min)))
                    rows.append(Row(f"gen_output[{gen.id},{ts},hi]", "gen_output", Lin.var(x[g, t], gen.p_max) - P))
                if t > 0:
                    prev, xprev = Lin.var(p[s, t - 1, g]), Lin.var(x[g, t - 1])
                elif gen.initial_on:
                    prev, xprev = Lin(const=gen.initial_output), Lin(const=1.0)
                else:
                    continue
                rows.append(Row(f"ramp[{gen.id},{ts},down]", "ramp",
                                P - prev + Lin.var(x[g, t], gen.ramp_down) + Lin.var(v[g, t], gen.shutdown_ramp)))
                rows.append(Row(f"ramp[{gen.id},{ts},up]", "ramp",
                                xprev * gen.ramp_up + Lin.var(u[g, t], gen.startup_ramp) - P + prev))
            wt = wind[s, t]
            rows.append(Row(f"power_balance[{ts}]", "power_balance",
                            lsum(Lin.var(j) for j in p[s, t]) + float(wt.sum() - power.total_load[t]), "E"))
            inj_const = -power.load[:, t].copy()
            np.add.at(inj_const, power.w_bus, wt)
            for l, line in enumerate(power.lines):
                flow = lsum((Lin.var(j) for j in p[s, t]), beta[l, power.g_bus])
                flow.iadd(float(beta[l] @ inj_const))
                rows.append(Row(f"thermal[{line.id},{ts},max]", "thermal", line.thermal_limit - flow))
                rows.append(Row(f"thermal[{line.id},{ts},min]", "thermal", flow + line.thermal_limit))
            # gas network
            src = ls if ls is not None else int(lin_scenario[s, t])
            if L:
                Km, Kn = lin.at(t, src)
            PI = [Lin.var(j) for j in idx["pi"][s, t]]
            for l, pipe in enumerate(gas.pipelines):
                e = Lin.var(idx["fl"][s, t, l], -1.0) + PI[ix[pipe.from_node]] * Km[l] - PI[ix[pipe.to_node]] * Kn[l]
                rows.append(Row(f"weymouth[{pipe.id},{ts}]", "weymouth", e, "E"))
            for c, comp in enumerate(gas.compressors):
                a, b = PI[ix[comp.from_node]], PI[ix[comp.to_node]]
                rows.append(Row(f"compressor_ratio[{comp.id},{ts},lo]", "compressor_ratio", b - a * comp.ratio_min))
                rows.append(Row(f"compressor_ratio[{comp.id},{ts},hi]", "compressor_ratio", a * comp.ratio_max - b))
            bal = [Lin(const=-float(gas.load[n, t])) for n in range(N)]
            for k, n in enumerate(gas.well_node):
                bal[n].iadd(Lin.var(idx["gw"][s, t, k]))
            for k, g in enumerate(network.gas_gens):
                bal[network.gas_gen_node[k]].iadd(Lin.var(p[s, t, g]), -float(network.gas_gen_chi[k]))
            for l, pipe in enumerate(gas.pipelines):
                bal[ix[pipe.from_node]].iadd(Lin.var(idx["fl"][s, t, l]), -1.0)
                bal[ix[pipe.to_node]].iadd(Lin.var(idx["fl"][s, t, l]))
            for c, comp in enumerate(gas.compressors):
                bal[ix[comp.from_node]].iadd(Lin.var(idx["fc"][s, t, c]), -1.0)
                bal[ix[comp.to_node]].iadd(Lin.var(idx["fc"][s, t, c]))
            for n, node in enumerate(gas.nodes):
                rows.append(Row(f"gas_balance[{node.id},{ts}]", "gas_balance", bal[n], "E"))

    obj = uc_cost(power, T, x, u, v)
    for s in range(S):
        for t in range(T):
            obj.iadd(lsum((Lin.var(j) for j in p[s, t]), power.g_cost), 1.0 / S)
            obj.iadd(lsum((Lin.var(j) for j in idx["gw"][s, t]), gas.well_cost), 1.0 / S)
            if tie_break:
                obj.iadd(lsum(Lin.var(j) for j in idx["pi"][s, t]), -tie_break / S)
    return vt, rows, obj.clean(), idx


def solve_direct(network: IegsNetwork, wind, lin, uc_fixed=None, relax=False, tie_break=0.0,
                 lin_scenario=None, backend="simplex", opts=None, feasibility=False) -> DirectResult:
    vt, rows, obj, idx = build_direct(network, wind, lin, uc_fixed, relax, tie_break, lin_scenario)
    if feasibility:
        obj = Lin()
    prob = build_lp(vt, rows, obj, name="direct")
    bins = vt.binaries
    if bins:
        sol = solve_milp(prob, bins, opts or BnbOptions(), backend=backend)
    else:
        sol = solve_lp(prob, backend=backend)
    if sol.status != OPTIMAL:
        fams = sorted({rows[i].family for i in (sol.infeasible_rows or []) if i < len(rows)})
        return DirectResult(sol.status, float("nan"), None, idx, rows, violated=fams)
    z = sol.x
    uc = {k: np.round(z[idx[k]]) if not relax else z[idx[k]] for k in ("x", "u", "v")}
    obj_val = float(sol.objective)
    if tie_break:
        obj_val += tie_break * float(z[idx["pi"]].sum()) / np.asarray(wind).shape[0]
    return DirectResult(OPTIMAL, obj_val, z, idx, rows, pressures=z[idx["pi"]], dispatch=z[idx["p"]],
                        uc=uc, gap=float(sol.gap) if np.isfinite(sol.gap) else 0.0)
