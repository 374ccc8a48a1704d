"""Fixed-format MPS export and a matching reader.

Names are limited to 8 characters. Longer model names are truncated and, on
collision, given a numeric suffix; the mapping back to the original names is
returned as a ``name,original`` CSV sidecar.
"""
from __future__ import annotations

import csv
import io
import re

import numpy as np

from .lp import LpProblem

OBJ_ROW = "COST"


def _fmt(v: float) -> str:
    return f"{float(v):.12g}"


def _short_names(names, prefix, taken):
    out = []
    for i, name in enumerate(names):
        base = re.sub(r"[^A-Za-z0-9_\[\],.]", "", name or "")[:8] or f"{prefix}{i}"
        cand = base
        k = 1
        while cand in taken:
            suffix = str(k)
            cand = base[: 8 - len(suffix)] + suffix
            k += 1
        taken.add(cand)
        out.append(cand)
    return out


def _line(f1, f2, f3="", f4="", f5="", f6=""):
    # fixed columns 2-3, 5-12, 15-22, 25-36, 40-47, 50-61; wider values push right
    s = f" {f1:<2} {f2:<8}  {f3:<8}  {f4:>12}"
    if f5:
        s += f"   {f5:<8}  {f6:>12}"
    return s.rstrip()


def write_mps(prob: LpProblem, binaries=(), name: str | None = None):
    """Render ``prob`` as fixed-format MPS text.

    Returns ``(mps_text, sidecar_csv_text)``.
    """
    m, n = prob.A.shape
    binaries = set(int(j) for j in binaries)
    taken = {OBJ_ROW, "RHS", "BND", "MARKER"}
    col_orig = prob.col_names or [f"x{j}" for j in range(n)]
    row_orig = prob.row_names or [f"r{i}" for i in range(m)]
    cols = _short_names(col_orig, "C", taken)
    rows = _short_names(row_orig, "R", taken)

    out = [f"NAME          {(name or prob.name)[:8]}", "ROWS", f" N  {OBJ_ROW}"]
    for i in range(m):
        out.append(f" {prob.senses[i]}  {rows[i]}")
    out.append("COLUMNS")
    in_int = False
    for j in range(n):
        is_bin = j in binaries
        if is_bin and not in_int:
            out.append(f"    MARKER                 'MARKER'                 'INTORG'")
            in_int = True
        elif not is_bin and in_int:
            out.append(f"    MARKER                 'MARKER'                 'INTEND'")
            in_int = False
        entries = []
        if prob.c[j] != 0 or not np.any(prob.A[:, j]):
            entries.append((OBJ_ROW, prob.c[j]))
        for i in np.flatnonzero(prob.A[:, j]):
            entries.append((rows[i], prob.A[i, j]))
        for k in range(0, len(entries), 2):
            (r1, v1) = entries[k]
            if k + 1 < len(entries):
                r2, v2 = entries[k + 1]
                out.append(_line("", cols[j], r1, _fmt(v1), r2, _fmt(v2)))
            else:
                out.append(_line("", cols[j], r1, _fmt(v1)))
    if in_int:
        out.append(f"    MARKER                 'MARKER'                 'INTEND'")
    out.append("RHS")
    if prob.offset != 0:
        out.append(_line("", "RHS", OBJ_ROW, _fmt(-prob.offset)))
    for i in range(m):
        if prob.rhs[i] != 0:
            out.append(_line("", "RHS", rows[i], _fmt(prob.rhs[i])))
    out.append("BOUNDS")
    for j in range(n):
        lo, hi = prob.lb[j], prob.ub[j]
        if j in binaries and lo == 0 and hi == 1:
            out.append(_line("UP", "BND", cols[j], _fmt(1.0)))
            continue
        if np.isfinite(lo) and np.isfinite(hi) and lo == hi:
            out.append(_line("FX", "BND", cols[j], _fmt(lo)))
            continue
        if not np.isfinite(lo) and not np.isfinite(hi):
            out.append(_line("FR", "BND", cols[j]))
            continue
        if not np.isfinite(lo):
            out.append(_line("MI", "BND", cols[j]))
        elif lo != 0 or (np.isfinite(hi) and hi < 0):
            out.append(_line("LO", "BND", cols[j], _fmt(lo)))
        if np.isfinite(hi):
            out.append(_line("UP", "BND", cols[j], _fmt(hi)))
    out.append("ENDATA")
    text = "\n".join(out) + "\n"

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["name", "original"])
    for short, orig in zip(cols, col_orig):
        w.writerow([short, orig])
    for short, orig in zip(rows, row_orig):
        w.writerow([short, orig])
    return text, buf.getvalue()


def read_mps(text: str):
    """Parse MPS text produced by :func:`write_mps` (or any plain fixed/free MPS).

    Returns ``(LpProblem, binaries)``; column order follows first appearance.
    """
    section = None
    obj_row = None
    row_sense: dict[str, str] = {}
    row_order: list[str] = []
    col_index: dict[str, int] = {}
    entries: dict[tuple[str, str], float] = {}
    cost: dict[str, float] = {}
    rhs: dict[str, float] = {}
    ranges: dict[str, float] = {}
    bounds: dict[str, list[float]] = {}
    integer: set[str] = set()
    explicit_int_bound: set[str] = set()
    offset = 0.0
    in_int = False
    name = "LP"
    for raw in text.splitlines():
        if not raw.strip() or raw.startswith("*"):
            continue
        if not raw[0].isspace():
            tok = raw.split()
            section = tok[0].upper()
            if section == "NAME" and len(tok) > 1:
                name = tok[1]
            continue
        tok = raw.split()
        if section == "ROWS":
            sense, rname = tok[0].upper(), tok[1]
            if sense == "N":
                if obj_row is None:
                    obj_row = rname
                continue
            row_sense[rname] = sense
            row_order.append(rname)
        elif section == "COLUMNS":
            if len(tok) >= 3 and tok[1].strip("'") == "MARKER":
                in_int = "INTORG" in tok[2]
                continue
            cname = tok[0]
            if cname not in col_index:
                col_index[cname] = len(col_index)
                bounds[cname] = [0.0, np.inf]
            if in_int:
                integer.add(cname)
            for rname, val in zip(tok[1::2], tok[2::2]):
                v = float(val)
                if rname == obj_row:
                    cost[cname] = cost.get(cname, 0.0) + v
                else:
                    entries[(rname, cname)] = v
        elif section == "RHS":
            pairs = tok[1:] if len(tok) % 2 == 1 else tok
            for rname, val in zip(pairs[0::2], pairs[1::2]):
                if rname == obj_row:
                    offset = -float(val)
                else:
                    rhs[rname] = float(val)
        elif section == "RANGES":
            pairs = tok[1:] if len(tok) % 2 == 1 else tok
            for rname, val in zip(pairs[0::2], pairs[1::2]):
                ranges[rname] = float(val)
        elif section == "BOUNDS":
            btype = tok[0].upper()
            cname = tok[2] if len(tok) >= 3 else tok[1]
            val = float(tok[3]) if len(tok) >= 4 else None
            b = bounds.setdefault(cname, [0.0, np.inf])
            if btype == "UP":
                b[1] = val
                if val < 0 and b[0] == 0:
                    b[0] = -np.inf
                explicit_int_bound.add(cname)
            elif btype == "LO":
                b[0] = val
            elif btype == "FX":
                b[0] = b[1] = val
            elif btype == "FR":
                b[0], b[1] = -np.inf, np.inf
            elif btype == "MI":
                b[0] = -np.inf
            elif btype == "PL":
                b[1] = np.inf
            elif btype == "BV":
                b[0], b[1] = 0.0, 1.0
                integer.add(cname)
    if ranges:
        raise ValueError("RANGES section is not supported")
    cols = sorted(col_index, key=col_index.get)
    rindex = {r: i for i, r in enumerate(row_order)}
    A = np.zeros((len(row_order), len(cols)))
    for (rname, cname), v in entries.items():
        A[rindex[rname], col_index[cname]] = v
    c = np.array([cost.get(cn, 0.0) for cn in cols])
    lb = np.array([bounds[cn][0] for cn in cols])
    ub = np.array([bounds[cn][1] for cn in cols])
    for cn in integer:
        if cn not in explicit_int_bound and bounds[cn][1] == np.inf:
            ub[col_index[cn]] = 1.0
    prob = LpProblem(
        c=c,
        A=A,
        senses=np.array([row_sense[r] for r in row_order]),
        rhs=np.array([rhs.get(r, 0.0) for r in row_order]),
        lb=lb,
        ub=ub,
        offset=offset,
        col_names=cols,
        row_names=list(row_order),
        name=name,
    )
    binaries = sorted(col_index[cn] for cn in integer)
    return prob, binaries
