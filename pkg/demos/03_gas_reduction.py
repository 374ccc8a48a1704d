"""Reduced gas model on a chain of pipeline subnetworks joined by compressors.

Flows follow from the injections alone. Pressures need the reference and the
free nodes, after which every other pressure is fixed by the linearized
Weymouth rows. The check below feeds the reduction with the injections and
free-node pressures of the full zero-budget model and recovers its pressures.
"""
import numpy as np

from iegs_sro.deterministic import solve_direct
from iegs_sro.fixtures import bundled
from iegs_sro.gas import build_reduction, locate_free_nodes, select_linearization_points
from iegs_sro.network import build_gas_incidence
from iegs_sro.scenarios import ingest_samples

np.set_printoptions(precision=4, suppress=True)
net, text = bundled("large")
gas = net.gas
print("edges:", [(e.id, e.from_node, e.to_node) for e in gas.pipelines + gas.compressors])
free = locate_free_nodes(gas)
print("reference", gas.nodes[gas.ref].id, "free", {gas.nodes[n].id: c for n, c in free.source.items()})

scen = ingest_samples(text, net)
lin = select_linearization_points(net, scen)
inc = build_gas_incidence(gas, net)
red = build_reduction(net, inc, free, lin, 0, 0)
print("N1 (reference + free):", [gas.nodes[n].id for n in red.N1])

full = solve_direct(net, scen.pbar, lin)
t = s = 0
burn = np.zeros(len(gas.nodes))
for g, node, chi in zip(net.gas_gens, net.gas_gen_node, net.gas_gen_chi):
    burn[node] += chi * full.dispatch[s, t, g]
withdraw = gas.load[:, t] + burn
ginj = -np.delete(withdraw, gas.ref)  # wells sit at the reference node
P_full = full.pressures[s, t]

f = red.flows(ginj)
P = red.pressures(ginj, P_full[list(red.N1)], len(gas.nodes))
print("flows:", f)
print("pressures (reduced):", P)
print("pressures (full):   ", P_full)
print("balance residual:", np.abs(inc.BPr @ f - ginj).max(), " pressure gap:", np.abs(P - P_full).max())
