"""Command line front-end: ``solve``, ``compare`` and ``gen``.

Exit codes: 0 success, 1 model or solver failure, 2 usage or input error.
Output files land in ``--out`` (default ``$IEGS_SRO_OUT`` or ``./out``) and
carry a short hash of the run configuration in their names.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import evaluation as ev
from . import fixtures
from .gas import GasReductionError, locate_free_nodes, n1_nodes, select_linearization_points
from .milp import BACKENDS
from .milp.lp import OPTIMAL
from .milp.mps import write_mps
from .network import NetworkError, load_network
from .pipeline import PipelineError, solve_sro
from .scenarios import ScenarioError, ingest_samples

log = logging.getLogger("iegs_sro")

OUT_ENV = "IEGS_SRO_OUT"
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(ValueError):
    pass


# One table drives both the parser and --help. (flags, kwargs)
COMMON = [
    (("--network",), dict(required=True, help="network document (JSON)")),
    (("--samples",), dict(required=True, help="wind samples CSV: scenario,period,farm,value")),
    (("--budget",), dict(default="0", help="budget: a scalar fraction, or a CSV scenario,period,epsilon")),
    (("--no-screen",), dict(action="store_true", help="keep every thermal row (skip the flow-range screen)")),
    (("--no-transform",), dict(action="store_true", help="dualize robust-sum rows instead of using sum extremes")),
    (("--clip",), dict(action="store_true", help="clip samples to farm bounds instead of rejecting them")),
    (("--backend",), dict(default="simplex", choices=BACKENDS, help="LP/MILP engine")),
    (("--seed",), dict(type=int, default=2024, help="seed for out-of-sample draws")),
    (("--out",), dict(default=None, help=f"output directory (default ${OUT_ENV} or ./out)")),
    (("-v", "--verbose"), dict(action="store_true", help="debug logging")),
]
SOLVE = [
    (("--mode",), dict(default="sro", choices=("sro", "saa", "ro"), help="model variant")),
    (("--mps",), dict(action="store_true", help="also export the MILP in fixed MPS with a name map")),
    (("--dump-gas-reduction",), dict(action="store_true", help="free nodes, Weymouth coefficients, fixed-point history")),
    (("--dump-model",), dict(action="store_true", help="variable and row census per family")),
    (("--dump-screen",), dict(action="store_true", help="relaxed flow ranges and survivors per line")),
    (("--no-polish",), dict(action="store_true", help="keep the solver's pressure rule as returned")),
]
COMPARE = [
    (("--grid",), dict(default="0,0.01,0.05", help="comma separated budgets for the SRO rows")),
    (("--draws",), dict(type=int, default=100, help="out-of-sample draw count")),
    (("--spread",), dict(type=float, default=0.25, help="draw spread as a fraction of farm capacity")),
]
GEN = [
    (("--buses",), dict(type=int, default=3)),
    (("--gas-nodes",), dict(type=int, default=3)),
    (("--compressors",), dict(type=int, default=1)),
    (("--seed",), dict(type=int, default=7)),
    (("--periods",), dict(type=int, default=4)),
    (("--scenarios",), dict(type=int, default=3)),
    (("--farms",), dict(type=int, default=2)),
    (("--name",), dict(default=None, help="file stem (default derived from the sizes)")),
    (("--out",), dict(default=None, help=f"output directory (default ${OUT_ENV} or ./out)")),
]


def _add(parser, table):
    for flags, kw in table:
        parser.add_argument(*flags, **kw)


def build_parser():
    p = argparse.ArgumentParser(prog="iegs-sro", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    ps = sub.add_parser("solve", help="solve one model variant")
    _add(ps, COMMON + SOLVE)
    pc = sub.add_parser("compare", help="SAA, RO and SRO over a budget grid, with out-of-sample rates")
    _add(pc, COMMON + COMPARE)
    pg = sub.add_parser("gen", help="generate a synthetic coupled system and wind samples")
    _add(pg, GEN)
    return p


# ---------------------------------------------------------------- helpers

def _read(path):
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _out_dir(args):
    d = Path(args.out or os.environ.get(OUT_ENV) or "out")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _parse_budget(spec, S, T):
    try:
        val = float(spec)
    except ValueError:
        table = np.full((S, T), np.nan)
        for r in csv.DictReader(io.StringIO(_read(spec))):
            try:
                table[int(r["scenario"]) - 1, int(r["period"]) - 1] = float(r["epsilon"])
            except (KeyError, ValueError, IndexError):
                raise UsageError(f"malformed budget table {spec}") from None
        if np.isnan(table).any():
            raise UsageError("budget table must cover every (scenario, period)")
        val = table
    if np.any(np.asarray(val) < 0):
        raise UsageError("budget must be nonnegative")
    return val


def config_hash(payload: dict) -> str:
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:10]


def _config(args, net_text, samples_text, extra):
    keys = {k: v for k, v in sorted(vars(args).items()) if k not in ("network", "samples", "out", "verbose")}
    keys.update(extra)
    keys["network_sha"] = hashlib.sha256(net_text.encode()).hexdigest()
    keys["samples_sha"] = hashlib.sha256(samples_text.encode()).hexdigest()
    return keys


def _load(args):
    net_text = _read(args.network)
    samples_text = _read(args.samples)
    net = load_network(net_text)
    scen = ingest_samples(samples_text, net, 0.0, clip=args.clip)
    eps = _parse_budget(args.budget, scen.S, scen.T)
    return net, scen.with_budget(eps), net_text, samples_text


def _write(path: Path, text: str):
    path.write_text(text)
    log.info("wrote %s", path)


def _num(v):
    v = float(v)
    return v if np.isfinite(v) else None


# ---------------------------------------------------------------- writers

def uc_csv(network, uc):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["generator", "period", "x", "u", "v"])
    for g, gen in enumerate(network.power.generators):
        for t in range(network.T):
            w.writerow([gen.id, t + 1, int(uc["x"][g, t]), int(uc["u"][g, t]), int(uc["v"][g, t])])
    return buf.getvalue()


def policy_json(report):
    model, z = report.model, report.z
    net, scen = model.network, model.scenarios
    idx = model.index
    nodes = [net.gas.nodes[n].id for n in n1_nodes(net.gas, model.free_nodes or locate_free_nodes(net.gas))]
    out = []
    for s in range(scen.S):
        for t in range(scen.T):
            out.append({
                "scenario": s + 1, "period": t + 1,
                "generators": {g.id: [_num(z[idx["r"][s, t, k]]), _num(z[idx["R"][s, t, k]])]
                               for k, g in enumerate(net.power.generators)},
                "wells": {w.id: [_num(z[idx["s"][s, t, k]]), _num(z[idx["S"][s, t, k]])]
                          for k, w in enumerate(net.gas.wells)},
                "pressures": {nid: [_num(z[idx["o"][s, t, k]]), _num(z[idx["O"][s, t, k]])]
                              for k, nid in enumerate(nodes)},
            })
    doc = {"rule": "value = constant + slope * total wind", "blocks": out}
    return json.dumps(doc, indent=1) + "\n"


def gas_dump(network, lin):
    free = locate_free_nodes(network.gas)
    doc = {
        "free_nodes": [{"node": network.gas.nodes[n].id, "compressor": network.gas.compressors[free.source[n]].id}
                       for n in free.nodes if n in free.source],
        "iterations": lin.iterations,
        "history": [float(h) for h in lin.history],
        "pipelines": [],
    }
    for l, pipe in enumerate(network.gas.pipelines):
        doc["pipelines"].append({
            "id": pipe.id,
            "points": np.round(np.stack([lin.pm[..., l], lin.pn[..., l]], -1), 10).tolist(),
            "K": np.round(np.stack([lin.Km[..., l], lin.Kn[..., l]], -1), 12).tolist(),
        })
    return json.dumps(doc, indent=1) + "\n"


def screen_csv(network, screen):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["line", "period", "scenario", "limit", "flow_min", "flow_max", "survives_max", "survives_min"])
    L, T, S = screen.flow_max.shape
    for l, line in enumerate(network.power.lines):
        for t in range(T):
            for s in range(S):
                w.writerow([line.id, t + 1, s + 1, f"{line.thermal_limit:.10g}", f"{screen.flow_min[l, t, s]:.10g}",
                            f"{screen.flow_max[l, t, s]:.10g}", int(screen.in_max[l, t, s]), int(screen.in_min[l, t, s])])
    return buf.getvalue()


# ---------------------------------------------------------------- commands

def cmd_solve(args):
    net, scen, net_text, samples_text = _load(args)
    if args.mode == "saa":
        if np.any(scen.eps > 0):
            raise UsageError("--mode saa takes no budget (it is the zero-budget model)")
    cfg = _config(args, net_text, samples_text, {})
    tag = config_hash(cfg)
    out = _out_dir(args)
    target = scen
    if args.mode == "ro":
        target = ev.build_ro_variant(scen)
    try:
        lin = select_linearization_points(net, target.with_budget(0.0), backend=args.backend)
    except GasReductionError as exc:
        raise PipelineError("linearize", exc) from exc
    rep = solve_sro(net, target, lin=lin, screen=not args.no_screen, transform=not args.no_transform,
                    backend=args.backend)
    if args.dump_gas_reduction:
        _write(out / f"gas_reduction_{tag}.json", gas_dump(net, lin))
    if args.dump_model:
        _write(out / f"model_census_{tag}.json", json.dumps(rep.census(), indent=1, sort_keys=True) + "\n")
    if args.dump_screen and rep.reduced.screen is not None:
        _write(out / f"screen_{tag}.csv", screen_csv(net, rep.reduced.screen))
    if args.mps:
        text, names = write_mps(rep.milp.lp(f"sro{tag[:4]}"), rep.milp.binaries)
        _write(out / f"model_{tag}.mps", text)
        _write(out / f"model_{tag}.names.csv", names)
    summary = {"mode": args.mode, "status": rep.status, "objective": _num(rep.objective),
               "bound": _num(rep.bound), "gap": _num(rep.gap), "nodes": int(rep.nodes),
               "config": cfg, "config_hash": tag}
    if rep.status != OPTIMAL:
        _write(out / f"summary_{tag}.json", json.dumps(summary, indent=1, sort_keys=True) + "\n")
        print(f"solve failed: {rep.status}", file=sys.stderr)
        return EXIT_FAIL
    if not args.no_polish:
        rep = ev.polish_pressures(rep, backend=args.backend)
    if net.gas.pipelines:
        summary["weymouth_max_relative_residual"] = _num(ev.weymouth_residual(rep).max_relative)
    _write(out / f"uc_{tag}.csv", uc_csv(net, rep.uc))
    _write(out / f"policy_{tag}.json", policy_json(rep))
    _write(out / f"summary_{tag}.json", json.dumps(summary, indent=1, sort_keys=True) + "\n")
    print(f"{args.mode} objective {rep.objective:.6f} ({rep.status}); files tagged {tag} in {out}")
    return EXIT_OK


def _grid(text):
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"bad --grid '{text}'") from None
    if not vals:
        raise UsageError("--grid must name at least one budget")
    if any(v < 0 for v in vals):
        raise UsageError("budget must be nonnegative")
    return vals


def cmd_compare(args):
    grid = _grid(args.grid)
    if args.draws < 1:
        raise UsageError("--draws must be positive")
    net, scen, net_text, samples_text = _load(args)
    cfg = _config(args, net_text, samples_text, {"grid": grid})
    tag = config_hash(cfg)
    out = _out_dir(args)
    draws = fixtures.oos_draws(net, n=args.draws, seed=args.seed, spread=args.spread)
    rep = ev.compare(net, scen, grid, draws, backend=args.backend)
    _write(out / f"comparison_{tag}.csv", rep.to_csv())
    if rep.gap is not None:
        _write(out / f"gap_curve_{tag}.csv", rep.gap.to_csv())
    _write(out / f"comparison_{tag}.json", json.dumps({"config": cfg, "config_hash": tag}, indent=1, sort_keys=True) + "\n")
    for r in rep.rows:
        log.info("%s eps=%g %s obj=%.6f oos=%.3f (%.2fs)", r.variant, r.epsilon, r.status, r.objective, r.oos_rate,
                 r.solve_time)
    print(rep.to_csv(), end="")
    return EXIT_OK


def cmd_gen(args):
    try:
        doc, text = fixtures.generate(buses=args.buses, gas_nodes=args.gas_nodes, compressors=args.compressors,
                                      seed=args.seed, periods=args.periods, scenarios=args.scenarios,
                                      farms=args.farms)
    except fixtures.FixtureError as exc:
        msg = str(exc)
        if "failed after" in msg:
            print(f"error: {msg}", file=sys.stderr)
            return EXIT_FAIL
        raise UsageError(msg) from None
    out = _out_dir(args)
    stem = args.name or f"iegs_{args.buses}_{args.gas_nodes}_{args.compressors}_s{args.seed}"
    _write(out / f"{stem}.json", json.dumps(doc, indent=1) + "\n")
    _write(out / f"{stem}.csv", text)
    print(f"wrote {out / stem}.json and .csv")
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "compare": cmd_compare, "gen": cmd_gen}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, NetworkError, ScenarioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PipelineError, ev.EvaluationError, GasReductionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
