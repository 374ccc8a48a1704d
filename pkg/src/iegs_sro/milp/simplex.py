"""Dense bounded-variable revised simplex.

The engine works on ``A x = b, lo <= x <= hi`` after the problem has been
scaled and given one slack per inequality row and one artificial per row.
The basis inverse is held explicitly and refreshed from scratch every
``REFACTOR_EVERY`` pivots; at desk scale (a few thousand rows) this is cheaper
than maintaining a factorization by hand.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.linalg.blas import dger

from .lp import INFEASIBLE, NUMERICAL, OPTIMAL, UNBOUNDED, LpProblem, LpSolution

FEAS_TOL = 1e-9
OPT_TOL = 1e-9
PIV_TOL = 1e-9
REFACTOR_EVERY = 50
DEGENERATE_RUN = 40

AT_LOWER, AT_UPPER, AT_ZERO, BASIC = 0, 1, 2, 3


def _pow2(v):
    with np.errstate(divide="ignore"):
        return np.exp2(np.round(np.log2(v)))


class StandardForm:
    """Scaled equality form of an :class:`LpProblem` with slack and artificial columns."""

    def __init__(self, prob: LpProblem):
        A = prob.A.copy()
        m, n = A.shape
        rhs = prob.rhs.copy()
        senses = prob.senses.copy()
        self.prob = prob
        self.n = n

        nonempty = np.abs(A).max(axis=1, initial=0.0) > 0
        bad = []
        for i in np.flatnonzero(~nonempty):
            s, r = senses[i], rhs[i]
            if (s == "L" and r < -FEAS_TOL) or (s == "G" and r > FEAS_TOL) or (s == "E" and abs(r) > FEAS_TOL):
                bad.append(int(i))
        self.inconsistent_rows = bad
        self.rows = np.flatnonzero(nonempty)
        A = A[self.rows]
        rhs = rhs[self.rows]
        senses = senses[self.rows]
        m = len(self.rows)

        # G rows are negated into L rows.
        self.flip = np.where(senses == "G", -1.0, 1.0)
        A *= self.flip[:, None]
        rhs = rhs * self.flip
        is_ineq = senses != "E"

        if m:
            rs = _pow2(1.0 / np.abs(A).max(axis=1))
        else:
            rs = np.ones(0)
        A *= rs[:, None]
        colmax = np.abs(A).max(axis=0, initial=0.0) if m else np.zeros(n)
        cs = np.where(colmax > 0, _pow2(1.0 / np.where(colmax > 0, colmax, 1.0)), 1.0)
        A *= cs[None, :]
        self.row_scale = rs
        self.col_scale = cs

        self.m = m
        self.slack_rows = np.flatnonzero(is_ineq)
        n_slack = len(self.slack_rows)
        self.n_slack = n_slack
        self.N = n + n_slack + m
        self.art0 = n + n_slack

        self.A_struct = A
        self.b = rhs * rs
        self.c = np.concatenate([prob.c * cs, np.zeros(n_slack + m)])
        lo = np.concatenate([prob.lb / cs, np.zeros(n_slack), np.zeros(m)])
        hi = np.concatenate([prob.ub / cs, np.full(n_slack, np.inf), np.zeros(m)])
        self.lo, self.hi = lo, hi

    def scale_bounds(self, lb, ub):
        lo = self.lo.copy()
        hi = self.hi.copy()
        lo[: self.n] = lb / self.col_scale
        hi[: self.n] = ub / self.col_scale
        return lo, hi

    def build_matrix(self, art_sign):
        m, n = self.m, self.n
        slack = sp.csc_matrix(
            (np.ones(self.n_slack), (self.slack_rows, np.arange(self.n_slack))), shape=(m, self.n_slack)
        )
        art = sp.csc_matrix((art_sign, (np.arange(m), np.arange(m))), shape=(m, m))
        return sp.hstack([sp.csc_matrix(self.A_struct), slack, art], format="csc")

    def unscale(self, x_s, y_s, d_s):
        x = x_s[: self.n] * self.col_scale
        y = np.zeros(self.prob.A.shape[0])
        if y_s is not None:
            y[self.rows] = y_s * self.row_scale * self.flip
        d = d_s[: self.n] / self.col_scale if d_s is not None else None
        return x, y, d


class SimplexEngine:
    """Primal and dual simplex iterations sharing one basis."""

    def __init__(self, sf: StandardForm, max_iter: int | None = None):
        self.sf = sf
        self.m = sf.m
        self.N = sf.N
        self.lo = sf.lo.copy()
        self.hi = sf.hi.copy()
        self.b = sf.b
        self.max_iter = max_iter or 50 * (sf.m + sf.N) + 1000
        self.iterations = 0
        self.phase1_art = np.zeros(0, dtype=int)
        self.A = None

    # ------------------------------------------------------------------ setup
    def crash(self):
        """Slack/artificial starting basis; returns phase-1 cost vector."""
        sf, m, n = self.sf, self.m, self.sf.n
        status = np.full(self.N, AT_LOWER, dtype=np.int8)
        x = np.zeros(self.N)
        lo, hi = self.lo, self.hi
        for j in range(n):
            if np.isfinite(lo[j]):
                x[j] = lo[j]
            elif np.isfinite(hi[j]):
                x[j] = hi[j]
                status[j] = AT_UPPER
            else:
                status[j] = AT_ZERO
        r = sf.b - sf.A_struct @ x[:n]
        art_sign = np.where(r >= 0, 1.0, -1.0)
        basis = np.empty(m, dtype=int)
        slack_of_row = -np.ones(m, dtype=int)
        slack_of_row[sf.slack_rows] = n + np.arange(sf.n_slack)
        active = []
        for i in range(m):
            k = slack_of_row[i]
            if k >= 0 and r[i] >= 0:
                basis[i] = k
                x[k] = r[i]
            else:
                a = sf.art0 + i
                basis[i] = a
                x[a] = abs(r[i])
                self.hi[a] = np.inf
                active.append(a)
        status[basis] = BASIC
        self.A = sf.build_matrix(art_sign)
        self.basis, self.status, self.x = basis, status, x
        self.phase1_art = np.array(active, dtype=int)
        cost = np.zeros(self.N)
        cost[self.phase1_art] = 1.0
        self.refactor()
        return cost

    def _unit_part(self):
        """Basis positions holding slack/artificial columns, with their rows and signs."""
        sf, basis = self.sf, self.basis
        pos = np.flatnonzero(basis >= sf.n)
        cols = basis[pos]
        is_slack = cols < sf.art0
        rows = cols - sf.art0
        if is_slack.any():
            rows[is_slack] = sf.slack_rows[cols[is_slack] - sf.n]
        vals = np.asarray(self.A[rows, cols]).ravel()
        # two unit columns on one row would make the basis singular; keep the first
        _, first = np.unique(rows, return_index=True)
        keep = np.zeros(len(pos), dtype=bool)
        keep[first] = True
        return pos[keep], rows[keep], vals[keep]

    def refactor(self):
        """Explicit inverse; unit columns are eliminated so only the structural block is inverted."""
        m = self.m
        pu, ru, vu = self._unit_part()
        po = np.setdiff1d(np.arange(m), pu, assume_unique=True)
        ro = np.setdiff1d(np.arange(m), ru, assume_unique=True)
        Bo = self.A[:, self.basis[po]]
        D = Bo[ro].toarray()
        C = Bo[ru].toarray()
        try:
            Dinv = np.linalg.inv(D) if len(po) else np.zeros((0, 0))
        except np.linalg.LinAlgError as exc:  # pragma: no cover - defensive
            raise np.linalg.LinAlgError("singular basis") from exc
        Binv = np.zeros((m, m))
        Binv[np.ix_(po, ro)] = Dinv
        Binv[pu, ru] = 1.0 / vu
        Binv[np.ix_(pu, ro)] = -(C @ Dinv) / vu[:, None]
        self.Binv = Binv
        self.since_refactor = 0
        self.valid = True
        self.recompute_x()

    def recompute_x(self):
        xn = self.x.copy()
        xn[self.basis] = 0.0
        self.x[self.basis] = self.Binv @ (self.b - self.A @ xn)

    def refresh(self):
        """Refactor unless the held inverse is recent enough for the current basis."""
        if getattr(self, "valid", False) and self.since_refactor <= REFACTOR_EVERY // 2:
            self.recompute_x()
        else:
            self.refactor()

    # --------------------------------------------------------------- helpers
    def column(self, j):
        A = self.A
        s, e = A.indptr[j], A.indptr[j + 1]
        return self.Binv[:, A.indices[s:e]] @ A.data[s:e]

    def reduced_costs(self, cost):
        y = self.Binv.T @ cost[self.basis]
        d = cost - self.A.T @ y
        d[self.basis] = 0.0
        return y, d

    def pivot(self, r, q, alpha):
        piv = alpha[r]
        row = self.Binv[r] / piv
        # in-place rank-one update (Binv is C-ordered, so its transpose is Fortran-ordered)
        dger(-1.0, row, alpha, a=self.Binv.T, overwrite_a=True)
        self.Binv[r] = row
        self.basis[r] = q
        self.status[q] = BASIC
        self.since_refactor += 1
        if self.since_refactor >= REFACTOR_EVERY:
            self.refactor()

    def primal_infeasibility(self):
        xb = self.x[self.basis]
        below = self.lo[self.basis] - xb
        above = xb - self.hi[self.basis]
        return np.maximum(below, above)

    def _leave(self, r, q, direction, step, alpha):
        """Apply a primal step of length ``step`` and pivot ``q`` into row ``r``."""
        delta = direction * alpha
        leaving = self.basis[r]
        self.x[self.basis] -= step * delta
        self.x[q] += step * direction
        if delta[r] > 0:
            self.x[leaving] = self.lo[leaving]
            self.status[leaving] = AT_LOWER
        else:
            self.x[leaving] = self.hi[leaving]
            self.status[leaving] = AT_UPPER
        if self.lo[leaving] == self.hi[leaving]:
            self.status[leaving] = AT_LOWER
        self.pivot(r, q, alpha)

    # ---------------------------------------------------------------- primal
    def primal(self, cost):
        """Primal simplex from a primal-feasible basis."""
        degenerate = 0
        bland = False
        movable = self.hi > self.lo
        while True:
            if self.iterations >= self.max_iter:
                return NUMERICAL
            _, d = self.reduced_costs(cost)
            st = self.status
            elig = np.zeros(self.N, dtype=bool)
            elig |= (st == AT_LOWER) & (d < -OPT_TOL) & movable
            elig |= (st == AT_UPPER) & (d > OPT_TOL) & movable
            elig |= (st == AT_ZERO) & (np.abs(d) > OPT_TOL)
            if not elig.any():
                return OPTIMAL
            if bland:
                q = int(np.flatnonzero(elig)[0])
            else:
                q = int(np.argmax(np.where(elig, np.abs(d), 0.0)))
            direction = 1.0 if d[q] < 0 else -1.0
            alpha = self.column(q)
            delta = direction * alpha
            xb = self.x[self.basis]
            lob = self.lo[self.basis]
            hib = self.hi[self.basis]
            dec = delta > PIV_TOL
            inc = delta < -PIV_TOL
            with np.errstate(divide="ignore", invalid="ignore"):
                room = np.full(self.m, np.inf)
                room[dec] = (xb[dec] - lob[dec]) / delta[dec]
                room[inc] = (hib[inc] - xb[inc]) / (-delta[inc])
                relaxed = np.full(self.m, np.inf)
                relaxed[dec] = (xb[dec] - lob[dec] + FEAS_TOL) / delta[dec]
                relaxed[inc] = (hib[inc] - xb[inc] + FEAS_TOL) / (-delta[inc])
            room = np.maximum(room, 0.0)
            flip = self.hi[q] - self.lo[q]
            tmax = max(relaxed.min(initial=np.inf), 0.0)
            if not np.isfinite(tmax) and not np.isfinite(flip):
                return UNBOUNDED
            if flip <= tmax:
                # bound flip, no basis change
                step = flip
                self.x[self.basis] -= step * delta
                self.x[q] += step * direction
                self.status[q] = AT_UPPER if direction > 0 else AT_LOWER
                self.iterations += 1
                degenerate = 0
                continue
            if bland:
                tmin = room.min()
                cand = np.flatnonzero(room <= tmin + 1e-12)
                r = int(cand[np.argmin(self.basis[cand])])
            else:
                cand = np.flatnonzero(room <= tmax)
                if cand.size == 0:
                    cand = np.flatnonzero(room <= room.min())
                r = int(cand[np.argmax(np.abs(delta[cand]))])
            step = room[r]
            self._leave(r, q, direction, step, alpha)
            self.iterations += 1
            if step <= 1e-12:
                degenerate += 1
                if degenerate > DEGENERATE_RUN:
                    bland = True
            else:
                degenerate = 0
                bland = False

    # ------------------------------------------------------------------ dual
    def dual(self, cost):
        """Dual simplex from a dual-feasible basis; returns OPTIMAL or INFEASIBLE."""
        movable = self.hi > self.lo
        A = self.A
        while True:
            if self.iterations >= self.max_iter:
                return NUMERICAL
            viol = self.primal_infeasibility()
            r = int(np.argmax(viol))
            if viol[r] <= FEAS_TOL:
                return OPTIMAL
            _, d = self.reduced_costs(cost)
            leaving = self.basis[r]
            xr = self.x[leaving]
            below = xr < self.lo[leaving]
            target = self.lo[leaving] if below else self.hi[leaving]
            arow = A.T @ self.Binv[r]
            st = self.status
            nb = (st != BASIC) & movable
            sgn = 1.0 if below else -1.0
            # x_r changes by -arow_j * dx_j; we need sgn * (-arow_j * dx_j) > 0
            ok_lower = nb & (st == AT_LOWER) & (sgn * arow < -PIV_TOL)
            ok_upper = nb & (st == AT_UPPER) & (sgn * arow > PIV_TOL)
            ok_free = nb & (st == AT_ZERO) & (np.abs(arow) > PIV_TOL)
            elig = ok_lower | ok_upper | ok_free
            if not elig.any():
                self.infeasible_row = r
                return INFEASIBLE
            idx = np.flatnonzero(elig)
            ratios = np.abs(d[idx]) / np.abs(arow[idx])
            rmin = ratios.min()
            near = idx[ratios <= rmin + OPT_TOL]
            q = int(near[np.argmax(np.abs(arow[near]))])
            alpha = self.column(q)
            if abs(alpha[r]) <= PIV_TOL:  # pragma: no cover - defensive
                self.refactor()
                continue
            dq = (xr - target) / alpha[r]
            self.x[self.basis] -= dq * alpha
            self.x[q] += dq
            self.x[leaving] = target
            self.status[leaving] = AT_LOWER if below else AT_UPPER
            if self.lo[leaving] == self.hi[leaving]:
                self.status[leaving] = AT_LOWER
            self.pivot(r, q, alpha)
            self.iterations += 1

    # ------------------------------------------------------------ drivers
    def run(self, cost):
        """Two-phase solve from scratch."""
        p1 = self.crash()
        status = self.primal(p1)
        if status != OPTIMAL:
            return NUMERICAL
        art = self.phase1_art
        if len(art) and self.x[art].max() > 1e-7:
            self.infeasible_rows = [int(i) for i in (art - self.sf.art0)[self.x[art] > 1e-7]]
            return INFEASIBLE
        self.infeasible_rows = []
        self.hi[self.sf.art0:] = 0.0
        self.x[self.sf.art0:] = np.clip(self.x[self.sf.art0:], 0.0, 0.0)
        self.refactor()
        return self.finish(cost, start="primal")

    def finish(self, cost, start):
        """Alternate dual/primal passes until the refactored basis is clean."""
        for _ in range(6):
            if start == "dual":
                status = self.dual(cost)
                if status != OPTIMAL:
                    return status
            status = self.primal(cost)
            if status != OPTIMAL:
                return status
            self.refresh()
            if self.primal_infeasibility().max(initial=0.0) <= FEAS_TOL * 10:
                _, d = self.reduced_costs(cost)
                if not self._dual_violations(d).any():
                    return OPTIMAL
            start = "dual"
        return NUMERICAL

    def _dual_violations(self, d):
        st = self.status
        movable = self.hi > self.lo
        return (
            ((st == AT_LOWER) & (d < -OPT_TOL * 10) & movable)
            | ((st == AT_UPPER) & (d > OPT_TOL * 10) & movable)
            | ((st == AT_ZERO) & (np.abs(d) > OPT_TOL * 10))
        )

    def reoptimize(self, cost, lo, hi):
        """Warm restart after a change of structural bounds."""
        self.lo, self.hi = lo, hi
        nb = self.status != BASIC
        at_lo = nb & (self.status == AT_LOWER)
        at_hi = nb & (self.status == AT_UPPER)
        self.x[at_lo] = lo[at_lo]
        self.x[at_hi] = hi[at_hi]
        bad = (at_lo & ~np.isfinite(lo)) | (at_hi & ~np.isfinite(hi))
        if bad.any():  # pragma: no cover - bounds in B&B stay finite
            raise ValueError("warm start with infinite nonbasic bound")
        self.refresh()
        return self.finish(cost, start="dual")

    def get_state(self):
        return self.basis.copy(), self.status.copy()

    def set_state(self, state):
        basis, status = state
        if not np.array_equal(basis, self.basis):
            self.valid = False
        self.basis = basis.copy()
        self.status = status.copy()
        self.x = np.zeros(self.N)


def _finalize(engine: SimplexEngine, sf: StandardForm, status: str) -> LpSolution:
    prob = sf.prob
    if status != OPTIMAL:
        rows = []
        if status == INFEASIBLE:
            rows = [int(sf.rows[i]) for i in getattr(engine, "infeasible_rows", [])]
        return LpSolution(status=status, iterations=engine.iterations, infeasible_rows=rows)
    y_s, d_s = engine.reduced_costs(sf.c)
    x, y, d = sf.unscale(engine.x, y_s, d_s)
    # snap tiny bound overshoot
    x = np.clip(x, prob.lb, prob.ub)
    return LpSolution(
        status=OPTIMAL,
        x=x,
        objective=prob.objective(x),
        iterations=engine.iterations,
        duals=y,
        reduced_costs=d,
    )


def simplex_solve(prob: LpProblem) -> LpSolution:
    """Solve ``prob`` from scratch with the two-phase bounded simplex."""
    sf = StandardForm(prob)
    if sf.inconsistent_rows:
        return LpSolution(status=INFEASIBLE, infeasible_rows=list(sf.inconsistent_rows))
    if sf.m == 0:
        return _no_rows(prob)
    engine = SimplexEngine(sf)
    status = engine.run(sf.c)
    return _finalize(engine, sf, status)


def _no_rows(prob: LpProblem) -> LpSolution:
    x = np.zeros(prob.c.size)
    for j, cj in enumerate(prob.c):
        lo, hi = prob.lb[j], prob.ub[j]
        if cj > 0:
            if not np.isfinite(lo):
                return LpSolution(status=UNBOUNDED)
            x[j] = lo
        elif cj < 0:
            if not np.isfinite(hi):
                return LpSolution(status=UNBOUNDED)
            x[j] = hi
        else:
            x[j] = lo if np.isfinite(lo) else (hi if np.isfinite(hi) else 0.0)
    return LpSolution(
        status=OPTIMAL,
        x=x,
        objective=prob.objective(x),
        duals=np.zeros(prob.A.shape[0]),
        reduced_costs=prob.c.copy(),
    )
