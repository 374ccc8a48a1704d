"""Free gas nodes, Weymouth tangent-plane linearization and the gas variable reduction."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components

from .network import GasIncidence, GasSystem, IegsNetwork, _graph

log = logging.getLogger(__name__)

CONV_TOL = 1e-4
MAX_ITER = 20
INV_TOL = 1e-10


class GasReductionError(ValueError):
    pass


@dataclass(frozen=True)
class FreeNodeSet:
    nodes: tuple  # node indices, in discovery order
    source: dict  # node index -> compressor index that freed it

    def __len__(self):
        return len(self.nodes)

    def __contains__(self, n):
        return n in self.nodes


def locate_free_nodes(gas: GasSystem) -> FreeNodeSet:
    n = len(gas.nodes)
    ix = gas.node_index
    pipe_edges = [(ix[p.from_node], ix[p.to_node]) for p in gas.pipelines]
    _, label = connected_components(_graph(n, pipe_edges), directed=False)
    ref_set = set(np.flatnonzero(label == label[gas.ref]).tolist())
    left = list(range(len(gas.compressors)))
    free, source = [], {}
    while left:
        for c in left:  # ascending compressor order
            comp = gas.compressors[c]
            a, b = ix[comp.from_node], ix[comp.to_node]
            if (a in ref_set) != (b in ref_set):
                out = b if a in ref_set else a
                free.append(out)
                source[out] = c
                ref_set |= set(np.flatnonzero(label == label[out]).tolist())
                left.remove(c)
                break
        else:
            raise GasReductionError(
                f"compressor '{gas.compressors[left[0]].id}' never adjoins the reference subnetwork"
            )
    return FreeNodeSet(tuple(free), source)


def linearize_weymouth(W, pm, pn):
    """Tangent coefficients of ``W*sqrt(pm^2 - pn^2)``; vectorised."""
    pm = np.asarray(pm, dtype=float)
    pn = np.asarray(pn, dtype=float)
    if np.any(pm <= pn) or np.any(pn <= 0):
        raise GasReductionError("degenerate linearization point: need pm > pn > 0")
    root = np.sqrt(pm * pm - pn * pn)
    W = np.asarray(W, dtype=float)
    return W * pm / root, W * pn / root


def weymouth_flow(W, pm, pn):
    return np.asarray(W) * np.sqrt(np.maximum(np.asarray(pm) ** 2 - np.asarray(pn) ** 2, 0.0))


@dataclass(frozen=True)
class WeymouthLinearization:
    pm: np.ndarray  # (S, T, L)
    pn: np.ndarray
    Km: np.ndarray
    Kn: np.ndarray
    pressures: np.ndarray | None = None  # node pressures of the last LP (S, T, N)
    history: tuple = ()  # max pressure change per iteration
    iterations: int = 0

    def at(self, t, s):
        return self.Km[s, t], self.Kn[s, t]


def linearization_from_points(network: IegsNetwork, pm, pn, **kw) -> WeymouthLinearization:
    W = np.array([p.weymouth for p in network.gas.pipelines])
    Km, Kn = linearize_weymouth(W, pm, pn)
    return WeymouthLinearization(np.asarray(pm, float), np.asarray(pn, float), Km, Kn, **kw)


def _points_from_pressures(network, P, floor_frac=1e-3):
    """Per-pipeline points from node pressures, forced strictly decreasing."""
    gas = network.gas
    ix = gas.node_index
    m = np.array([ix[p.from_node] for p in gas.pipelines], dtype=int)
    n = np.array([ix[p.to_node] for p in gas.pipelines], dtype=int)
    W = np.array([p.weymouth for p in gas.pipelines])
    G = np.array([p.flow_limit for p in gas.pipelines])
    pm = P[..., m].copy()
    pn = P[..., n].copy()
    # keep the upstream point and pull the downstream one below it by at least
    # the drop that carries a small fraction of the pipeline capacity
    floor = (floor_frac * G / W) ** 2
    gap = pm * pm - pn * pn
    low = gap < floor
    pn = np.where(low, np.sqrt(np.maximum(pm * pm - floor, 0.0)), pn)
    bad = pn <= 0
    if np.any(bad):
        pn = np.where(bad, 0.5 * pm, pn)
    return pm, pn


def select_linearization_points(network: IegsNetwork, scenarios, backend="simplex",
                                tol=CONV_TOL, max_iter=MAX_ITER, strict=True) -> WeymouthLinearization:
    """Successive linearization on the LP relaxation of the zero-budget model."""
    from .deterministic import solve_direct

    gas = network.gas
    S, T = scenarios.S, scenarios.T
    N = len(gas.nodes)
    P = np.broadcast_to(0.5 * (gas.pi_min + gas.pi_max), (S, T, N)).copy()
    if not gas.pipelines:
        e = np.zeros((S, T, 0))
        return WeymouthLinearization(e, e, e, e, P, (), 0)
    history = []
    pm, pn = _points_from_pressures(network, P)
    for it in range(1, max_iter + 1):
        lin = linearization_from_points(network, pm, pn)
        res = solve_direct(network, scenarios.pbar, lin, relax=True, backend=backend,
                           tie_break=1e-6)
        if not res.optimal:
            raise GasReductionError(f"deterministic model infeasible (iteration {it}, status {res.status})")
        newP = res.pressures
        pm2, pn2 = _points_from_pressures(network, newP)
        change = float(max(np.abs(pm2 - pm).max(initial=0), np.abs(pn2 - pn).max(initial=0)))
        history.append(change)
        log.debug("linearization iteration %d: max change %.3e", it, change)
        pm, pn, P = pm2, pn2, newP
        if change < tol:
            return linearization_from_points(network, pm, pn, pressures=P, history=tuple(history), iterations=it)
    msg = f"linearization did not converge in {max_iter} iterations (last change {history[-1]:.3e})"
    if strict:
        raise GasReductionError(msg)
    log.warning(msg)
    return linearization_from_points(network, pm, pn, pressures=P, history=tuple(history), iterations=max_iter)


@dataclass(frozen=True)
class ReductionMatrices:
    QP: np.ndarray
    QPL: np.ndarray
    QPC: np.ndarray
    QN: np.ndarray
    QNP: np.ndarray
    QNF: np.ndarray
    BF: np.ndarray
    BN: np.ndarray
    N1: tuple  # reference node first, then free nodes
    N2: tuple
    nonref: tuple  # node order of the reduced injection vector

    def pressures(self, ginj_r, pi_n1, n_nodes):
        """Full nodal pressure vector from reduced injections and N1 pressures."""
        P = np.zeros(n_nodes)
        P[list(self.N1)] = pi_n1
        P[list(self.N2)] = self.QNP @ ginj_r - self.QNF @ pi_n1
        return P

    def flows(self, ginj_r):
        return self.QP @ ginj_r


def n1_nodes(gas: GasSystem, free: FreeNodeSet):
    return (gas.ref,) + tuple(n for n in free.nodes if n != gas.ref)


def build_reduction(network: IegsNetwork, incidence: GasIncidence, free: FreeNodeSet,
                    lin: WeymouthLinearization, t: int, s: int) -> ReductionMatrices:
    gas = network.gas
    N = len(gas.nodes)
    L = len(gas.pipelines)
    nonref = tuple(n for n in range(N) if n != gas.ref)
    BPr = incidence.BPr
    QP = np.linalg.inv(BPr) if N > 1 else np.zeros((0, 0))
    if N > 1 and np.abs(QP @ BPr - np.eye(N - 1)).max() > INV_TOL:
        raise GasReductionError("pipeline incidence inverse failed verification")
    N1 = n1_nodes(gas, free)
    N2 = tuple(n for n in range(N) if n not in N1)
    Km, Kn = lin.at(t, s)
    BK = np.zeros((L, N))
    ix = gas.node_index
    for l, p in enumerate(gas.pipelines):
        BK[l, ix[p.from_node]] += Km[l]
        BK[l, ix[p.to_node]] -= Kn[l]
    BF = BK[:, list(N1)]
    BN = BK[:, list(N2)]
    if BN.shape[0] != BN.shape[1]:
        raise GasReductionError(f"pressure system not square ({BN.shape}); check compressor placement")
    if BN.size:
        if np.linalg.cond(BN) > 1e12:
            raise GasReductionError("singular pressure system: remaining pressures not determined by free nodes")
        QN = np.linalg.inv(BN)
        if np.abs(QN @ BN - np.eye(len(N2))).max() > INV_TOL * max(1.0, np.abs(BN).max()):
            raise GasReductionError("pressure system inverse failed verification")
    else:
        QN = np.zeros((0, 0))
    QPL, QPC = QP[:L], QP[L:]
    return ReductionMatrices(QP, QPL, QPC, QN, QN @ QPL, QN @ BF, BF, BN, N1, N2, nonref)
