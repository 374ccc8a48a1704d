"""Wind samples, per-(t, s) 1-norm uncertainty balls and their sum extremes."""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

TOL = 1e-9


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioSet:
    """Samples ``pbar[s, t, w]`` with budgets ``eps[s, t]`` and farm box ``[lo, hi]``."""

    pbar: np.ndarray
    eps: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        pbar = np.array(self.pbar, dtype=float)
        if pbar.ndim != 3:
            raise ScenarioError("samples must be indexed (scenario, period, farm)")
        S, T, _ = pbar.shape
        eps = np.broadcast_to(np.asarray(self.eps, dtype=float), (S, T)).copy()
        if np.any(eps < 0):
            raise ScenarioError("budget must be nonnegative")
        lo = np.array(self.lo, dtype=float).reshape(-1)
        hi = np.array(self.hi, dtype=float).reshape(-1)
        if lo.size != pbar.shape[2] or hi.size != pbar.shape[2]:
            raise ScenarioError("farm bounds do not match sample width")
        if np.any(pbar < lo - TOL) or np.any(pbar > hi + TOL):
            raise ScenarioError("sample outside farm bounds")
        for name, a in (("pbar", pbar), ("eps", eps), ("lo", lo), ("hi", hi)):
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def S(self) -> int:
        return self.pbar.shape[0]

    @property
    def T(self) -> int:
        return self.pbar.shape[1]

    @property
    def W(self) -> int:
        return self.pbar.shape[2]

    def ball(self, t: int, s: int) -> "UncertaintyBall":
        c = self.pbar[s, t]
        return UncertaintyBall(c, float(self.eps[s, t] * c.sum()), self.lo, self.hi)

    def with_budget(self, eps) -> "ScenarioSet":
        return ScenarioSet(self.pbar, eps, self.lo, self.hi)

    def subset(self, scenarios) -> "ScenarioSet":
        idx = list(scenarios)
        return ScenarioSet(self.pbar[idx], self.eps[idx], self.lo, self.hi)

    def radius(self) -> np.ndarray:
        """Ball radius per (s, t)."""
        return self.eps * self.pbar.sum(axis=2)


@dataclass(frozen=True)
class UncertaintyBall:
    center: np.ndarray
    radius: float
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        if self.radius < 0:
            raise ScenarioError("radius must be nonnegative")
        c = np.asarray(self.center, dtype=float)
        if np.any(c < self.lo - TOL) or np.any(c > self.hi + TOL):
            raise ScenarioError("ball center outside the farm box")

    @property
    def W(self) -> int:
        return len(self.center)

    def box_rows(self):
        """Box as ``U p + u0 >= 0`` with ``U = [I; -I]``; returns (U, h) where h = U pbar + u0."""
        W = self.W
        U = np.vstack([np.eye(W), -np.eye(W)])
        h = np.concatenate([self.center - self.lo, self.hi - self.center])
        return U, h


@dataclass(frozen=True)
class SumExtremes:
    p_max: np.ndarray
    p_min: np.ndarray
    sigma_max: float
    sigma_min: float


def _greedy(center, room, budget):
    step = np.zeros_like(center)
    left = budget
    for w in range(len(center)):  # ascending farm order
        d = min(room[w], left)
        step[w] = d
        left -= d
        if left <= 0:
            break
    return step


def sum_extremes(ball: UncertaintyBall) -> SumExtremes:
    c = np.asarray(ball.center, dtype=float)
    up = _greedy(c, np.maximum(ball.hi - c, 0.0), ball.radius)
    dn = _greedy(c, np.maximum(c - ball.lo, 0.0), ball.radius)
    pmax, pmin = c + up, c - dn
    total = c.sum()
    smax = total + min(ball.radius, np.maximum(ball.hi - c, 0).sum())
    smin = total - min(ball.radius, np.maximum(c - ball.lo, 0).sum())
    assert membership(ball, pmax) and membership(ball, pmin)
    return SumExtremes(pmax, pmin, float(smax), float(smin))


def membership(ball: UncertaintyBall, p) -> bool:
    p = np.asarray(p, dtype=float)
    if p.shape != (ball.W,):
        raise ScenarioError(f"point has {p.size} entries, ball has {ball.W} farms")
    if np.any(p < ball.lo - TOL) or np.any(p > ball.hi + TOL):
        return False
    return bool(np.abs(p - ball.center).sum() <= ball.radius + TOL)


def all_extremes(scen: ScenarioSet):
    """Sum extremes for every (s, t); returns arrays ``smin, smax`` of shape (S, T)."""
    smin = np.zeros((scen.S, scen.T))
    smax = np.zeros((scen.S, scen.T))
    for s in range(scen.S):
        for t in range(scen.T):
            e = sum_extremes(scen.ball(t, s))
            smin[s, t], smax[s, t] = e.sigma_min, e.sigma_max
    return smin, smax


def ingest_samples(text: str, network, budgets=0.0, clip: bool = False) -> ScenarioSet:
    """Parse a ``scenario,period,farm,value`` CSV (1-based scenario/period)."""
    farms = [w.id for w in network.power.wind_farms]
    fpos = {f: i for i, f in enumerate(farms)}
    lo = np.asarray(network.power.w_min, dtype=float)
    hi = np.asarray(network.power.w_max, dtype=float)
    rows = list(csv.DictReader(io.StringIO(text)))
    if rows and set(rows[0]) != {"scenario", "period", "farm", "value"}:
        raise ScenarioError("samples CSV header must be scenario,period,farm,value")
    cells = {}
    for k, r in enumerate(rows, start=2):
        try:
            s, t = int(r["scenario"]), int(r["period"])
            v = float(r["value"])
        except (TypeError, ValueError):
            raise ScenarioError(f"line {k}: malformed row") from None
        f = r["farm"].strip()
        if f not in fpos:
            raise ScenarioError(f"line {k}: unknown farm id '{f}'")
        if s < 1 or t < 1:
            raise ScenarioError(f"line {k}: scenario and period are 1-based")
        if v < 0:
            raise ScenarioError(f"line {k}: negative value")
        w = fpos[f]
        if v > hi[w] or v < lo[w]:
            if not clip:
                raise ScenarioError(f"line {k}: sample exceeds farm capacity (farm '{f}', value {v})")
            nv = float(np.clip(v, lo[w], hi[w]))
            log.warning("clipping sample %s at farm %s from %g to %g", (s, t), f, v, nv)
            v = nv
        cells[(s - 1, t - 1, w)] = v
    T = network.T
    S = 1 + max((c[0] for c in cells), default=-1)
    if not farms:
        S = max(S, 1)
    pbar = np.zeros((S, T, len(farms)))
    for s in range(S):
        for t in range(T):
            for w in range(len(farms)):
                if (s, t, w) not in cells:
                    raise ScenarioError(f"missing sample cell (scenario {s + 1}, period {t + 1}, farm '{farms[w]}')")
                pbar[s, t, w] = cells[(s, t, w)]
    if any(c[1] >= T for c in cells):
        raise ScenarioError(f"period index beyond horizon {T}")
    return ScenarioSet(pbar, _budget(budgets, S, T), lo, hi)


def _budget(budgets, S, T):
    b = np.asarray(budgets, dtype=float)
    if b.ndim == 0:
        return np.full((S, T), float(b))
    if b.shape != (S, T):
        raise ScenarioError(f"budget table must be scalar or shaped ({S}, {T})")
    return b


def samples_csv(scen: ScenarioSet, farm_ids) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scenario", "period", "farm", "value"])
    for s in range(scen.S):
        for t in range(scen.T):
            for k, f in enumerate(farm_ids):
                w.writerow([s + 1, t + 1, f, repr(float(scen.pbar[s, t, k]))])
    return buf.getvalue()
