"""Sparse affine expressions over decision variables and a small model builder."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .milp.lp import LpProblem


class Lin:
    """``const + sum(coef[j] * z_j)`` with ``coef`` a dict keyed by variable index."""

    __slots__ = ("coef", "const")

    def __init__(self, coef=None, const=0.0):
        self.coef = dict(coef) if coef else {}
        self.const = float(const)

    @classmethod
    def var(cls, j, c=1.0):
        return cls({int(j): float(c)})

    def copy(self):
        return Lin(self.coef, self.const)

    def iadd(self, other, scale=1.0):
        """In-place ``self += scale * other``; ``other`` may be a number."""
        if scale == 0:
            return self
        if isinstance(other, Lin):
            co = self.coef
            for j, v in other.coef.items():
                co[j] = co.get(j, 0.0) + scale * v
            self.const += scale * other.const
        else:
            self.const += scale * float(other)
        return self

    def __add__(self, other):
        return self.copy().iadd(other)

    __radd__ = __add__

    def __sub__(self, other):
        return self.copy().iadd(other, -1.0)

    def __rsub__(self, other):
        return (-self).iadd(other)

    def __neg__(self):
        return self * -1.0

    def __mul__(self, k):
        k = float(k)
        return Lin({j: k * v for j, v in self.coef.items()}, k * self.const)

    __rmul__ = __mul__

    def clean(self, tol=0.0):
        self.coef = {j: v for j, v in self.coef.items() if abs(v) > tol}
        return self

    def value(self, x) -> float:
        return self.const + sum(v * x[j] for j, v in self.coef.items())

    def is_const(self, tol=0.0) -> bool:
        return all(abs(v) <= tol for v in self.coef.values())

    def same(self, other, tol=1e-12) -> bool:
        keys = set(self.coef) | set(other.coef)
        if abs(self.const - other.const) > tol:
            return False
        return all(abs(self.coef.get(j, 0.0) - other.coef.get(j, 0.0)) <= tol for j in keys)

    def key(self, digits=12):
        """Hashable rounded signature, used for row deduplication."""
        items = tuple(sorted((j, round(v, digits)) for j, v in self.coef.items() if v != 0))
        return items, round(self.const, digits)

    def __repr__(self):
        terms = " + ".join(f"{v:g}*z{j}" for j, v in sorted(self.coef.items()))
        return f"Lin({terms or '0'} + {self.const:g})"


def lsum(items, weights=None) -> Lin:
    out = Lin()
    if weights is None:
        for it in items:
            out.iadd(it)
    else:
        for it, w in zip(items, weights):
            out.iadd(it, w)
    return out


def matvec(M, vec) -> list:
    """Rows of ``M`` applied to a list of Lin (or numbers)."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    out = []
    for i in range(M.shape[0]):
        acc = Lin()
        for k in np.flatnonzero(M[i]):
            acc.iadd(vec[k], M[i, k])
        out.append(acc)
    return out


@dataclass
class Row:
    """``expr (sense) 0`` with sense ``G`` (>=), ``L`` or ``E``."""

    name: str
    family: str
    expr: Lin
    sense: str = "G"


@dataclass
class VarTable:
    names: list = field(default_factory=list)
    lb: list = field(default_factory=list)
    ub: list = field(default_factory=list)
    binary: list = field(default_factory=list)

    def add(self, name, lb=-np.inf, ub=np.inf, binary=False) -> int:
        self.names.append(name)
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.binary.append(bool(binary))
        return len(self.names) - 1

    def block(self, prefix, shape, lb=-np.inf, ub=np.inf, binary=False) -> np.ndarray:
        shape = tuple(np.atleast_1d(shape))
        idx = np.empty(shape, dtype=int)
        for pos in np.ndindex(*shape):
            tag = ",".join(str(p + 1) for p in pos)
            idx[pos] = self.add(f"{prefix}[{tag}]", lb, ub, binary)
        return idx

    def __len__(self):
        return len(self.names)

    def copy(self):
        return VarTable(list(self.names), list(self.lb), list(self.ub), list(self.binary))

    @property
    def binaries(self):
        return [j for j, b in enumerate(self.binary) if b]


def build_lp(vars: VarTable, rows, objective: Lin, name="model") -> LpProblem:
    n = len(vars)
    m = len(rows)
    A = np.zeros((m, n))
    rhs = np.zeros(m)
    senses = []
    for i, r in enumerate(rows):
        for j, v in r.expr.coef.items():
            A[i, j] += v
        rhs[i] = -r.expr.const
        senses.append(r.sense)
    c = np.zeros(n)
    for j, v in objective.coef.items():
        c[j] += v
    return LpProblem(
        c=c, A=A, senses=np.array(senses, dtype="<U1"), rhs=rhs,
        lb=np.array(vars.lb), ub=np.array(vars.ub), offset=objective.const,
        col_names=list(vars.names), row_names=[r.name for r in rows], name=name,
    )
