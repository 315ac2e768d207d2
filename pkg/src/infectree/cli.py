"""Command-line interface.

Subcommands map one-to-one onto the experiment runners plus a few direct
numeric queries.  Exit codes: 0 success, 2 configuration error, 3 capacity
error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import __version__
from .couplings import NodeCapError
from .freezetree import build_from_signs
from .harness import (CapacityError, ConfigError, ExperimentConfig, persist,
                      replica_rng, run_coupling_demo, run_dangling, run_fluid,
                      run_height, run_martingale_check, run_profile,
                      run_survival, run_urn)
from .lambertw import (BRANCH_POINT, DomainError, exp_decay_series_bounds,
                       lambert_w0, lower_bound_branch, lower_bound_lambda,
                       radical_lower_bound)
from .theory import constants_for, f_lambda, kappa, kappa_sup, lambda_c, m_lambda
from .walks import simulate_sir

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CAPACITY = 3


def _add_common(sub):
    sub.add_argument("--lambda", dest="lam", type=float, default=2.0)
    sub.add_argument("--n", type=int, default=10**5)
    sub.add_argument("--replicas", type=int, default=100)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--threads", type=int, default=1)
    sub.add_argument("--t", type=float, default=None)
    sub.add_argument("--delta", type=float, default=0.05)
    sub.add_argument("--out", type=str, default=".")
    sub.add_argument("--format", choices=("csv", "ndjson"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="infectree")
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    sc = subs.add_parser("constants", help="limit constants for one lambda or a sweep")
    sc.add_argument("--lambda", dest="lam", type=float, default=2.0)
    sc.add_argument("--sweep", type=str, default=None,
                    metavar="LO:HI:POINTS", help="emit a CSV sweep over lambda")
    sc.add_argument("--out", type=str, default=".")

    subs.add_parser("lambda-c", help="print the critical rate")

    subs.add_parser("verify-lambert", help="run the bound suites, print margins")

    for name in ("sim-height", "sim-profile", "sim-fluid", "sim-dangling",
                 "sim-survival", "martingale-check"):
        sp = subs.add_parser(name)
        _add_common(sp)
        if name == "sim-profile":
            sp.add_argument("--x-grid", type=str, default="0.2,0.4,0.6")
        if name == "martingale-check":
            sp.add_argument("--z", type=float, default=0.3)

    scd = subs.add_parser("coupling-demo")
    _add_common(scd)
    scd.add_argument("--roots", type=int, default=5)
    scd.add_argument("--p", type=float, default=0.6)
    scd.add_argument("--q", type=float, default=0.8)
    scd.add_argument("--r", type=float, default=0.7)

    su = subs.add_parser("urn")
    _add_common(su)
    su.add_argument("--preset", choices=("polya", "alternating", "from-tree"),
                    default="polya")
    su.add_argument("--k", type=int, default=None, help="number of urn steps")

    se = subs.add_parser("export-tree")
    _add_common(se)

    return parser


def _cmd_constants(args) -> int:
    if args.sweep:
        lo, hi, pts = args.sweep.split(":")
        grid = np.linspace(float(lo), float(hi), int(pts))
        import csv as _csv
        import hashlib
        import os
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "constants.csv")
        cols = ["lambda", "gamma", "z_lambda", "m_lambda", "t_lambda",
                "kappa", "kappa_sub_branch", "kappa_sup_branch", "regime"]
        with open(path, "w", newline="") as fh:
            w = _csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for lam in grid:
                c = constants_for(float(lam))
                m = c.m_lambda
                lm = -math.log(m)
                sub = c.gamma / m + f_lambda(c.lam, lm) / lm
                sup = c.gamma * math.exp(c.z_lambda)
                w.writerow([repr(float(v)) if isinstance(v, float) else v
                            for v in (c.lam, c.gamma, c.z_lambda, c.m_lambda,
                                      c.t_lambda, c.kappa, sub, sup,
                                      c.regime.value)])
        blob = open(path, "rb").read()
        sidecar = path.replace(".csv", ".config.json")
        with open(sidecar, "w") as fh:
            json.dump({"config": {"kind": "constants-sweep",
                                  "lo": float(lo), "hi": float(hi), "points": int(pts)},
                       "config_hash": hashlib.sha256(blob).hexdigest(),
                       "version": __version__, "lambda_c": lambda_c()},
                      fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(json.dumps({"written": path, "lambda_c": lambda_c()}))
        return EXIT_OK
    c = constants_for(args.lam)
    print(json.dumps(c.as_dict(), indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_verify_lambert() -> int:
    rng = np.random.default_rng(12345)
    xs = BRANCH_POINT + (1000.0 - BRANCH_POINT) * rng.random(10**4)
    resid = max(abs(lambert_w0(x) * math.exp(lambert_w0(x)) - x)
                / max(1.0, abs(x)) for x in xs)
    grid0 = np.linspace(BRANCH_POINT, 0.0, 10**4)
    margin_i = min(lambert_w0(x) - lower_bound_branch(x) for x in grid0)
    grid1 = np.linspace(1.0, 50.0, 10**4)
    margin_ii = min(lambert_w0(-l * math.exp(-l)) - lower_bound_lambda(l)
                    for l in grid1)
    hs = np.linspace(0.0, 10.0, 10**4)
    series_ok = True
    worst_series = math.inf
    for h in hs:
        lo, hi = exp_decay_series_bounds(float(h))
        v = math.exp(-h) * (1.0 + h)
        eps = 4e-16 * (1.0 + abs(v))
        worst_series = min(worst_series, v - lo, hi - v)
        series_ok = series_ok and lo <= v + eps and v <= hi + eps
    hr = np.linspace(0.0, 1.0, 10**4)
    worst_rad = min(math.sqrt(max(2.0 - 2.0 * math.exp(-h) * (1.0 + h), 0.0))
                    - radical_lower_bound(float(h)) for h in hr)
    report = {
        "max_fixed_point_residual": resid,
        "min_margin_branch_bound": margin_i,
        "min_margin_lambda_bound": margin_ii,
        "min_margin_series_bounds": worst_series,
        "min_margin_radical_bound": worst_rad,
        "all_hold": bool(resid <= 1e-12 and margin_i >= -1e-15
                         and margin_ii >= -1e-15 and series_ok
                         and worst_rad >= -1e-11),
    }
    print(json.dumps(report, indent=2))
    return EXIT_OK if report["all_hold"] else 1


def _make_config(args, kind: str) -> ExperimentConfig:
    kwargs = dict(kind=kind, lam=args.lam, n=args.n, replicas=args.replicas,
                  t=args.t, delta=args.delta, seed=args.seed,
                  threads=args.threads)
    if kind == "profile" and hasattr(args, "x_grid"):
        kwargs["x_grid"] = tuple(float(v) for v in args.x_grid.split(","))
    if kind == "martingale" and hasattr(args, "z"):
        kwargs["z"] = args.z
    if kind == "urn":
        kwargs["preset"] = args.preset
        if args.k is not None:
            kwargs["n"] = args.k
    return ExperimentConfig(**kwargs)


def _cmd_export_tree(args) -> int:
    import csv as _csv
    import os
    config = _make_config(args, "height")
    survive_k = math.floor(0.5 * constants_for(config.lam).t_lambda * config.n)
    trace, rng = None, None
    best, best_rng = None, None
    for i in range(max(config.replicas, 1)):
        rng = replica_rng(config.seed, i)
        cand = simulate_sir(config.n, config.lam / config.n, rng=rng)
        if best is None or cand.tau > best.tau:
            best, best_rng = cand, rng
        if cand.tau >= survive_k:
            trace = cand
            break
    if trace is None:
        trace, rng = best, best_rng
    tree = build_from_signs(trace.steps, rng=rng)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "tree.csv")
    with open(path, "w", newline="") as fh:
        w = _csv.writer(fh, lineterminator="\n")
        w.writerow(["node", "parent", "height", "birth_step", "state"])
        for row in tree.export_rows():
            w.writerow(row)
    sidecar = path.replace(".csv", ".config.json")
    with open(sidecar, "w") as fh:
        json.dump({"config": config.as_dict(),
                   "config_hash": config.config_hash(),
                   "version": __version__}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(json.dumps({"written": path, "nodes": tree.n_nodes,
                      "height": tree.tree_height()}))
    return EXIT_OK


_RUNNERS = {
    "sim-survival": ("survival", run_survival),
    "sim-fluid": ("fluid", run_fluid),
    "sim-height": ("height", run_height),
    "sim-profile": ("profile", run_profile),
    "sim-dangling": ("dangling", run_dangling),
    "martingale-check": ("martingale", run_martingale_check),
    "urn": ("urn", run_urn),
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "constants":
            return _cmd_constants(args)
        if args.command == "lambda-c":
            print(json.dumps({"lambda_c": lambda_c()}))
            return EXIT_OK
        if args.command == "verify-lambert":
            return _cmd_verify_lambert()
        if args.command == "export-tree":
            return _cmd_export_tree(args)
        if args.command == "coupling-demo":
            config = _make_config(args, "coupling")
            records, summary = run_coupling_demo(
                config, roots=args.roots, p=args.p, q=args.q, r_const=args.r)
            persist(records, config, args.out, fmt=args.format,
                    name="coupling-demo")
            print(json.dumps(summary, indent=2, default=str))
            return EXIT_OK
        kind, runner = _RUNNERS[args.command]
        config = _make_config(args, kind)
        records, summary = runner(config)
        persist(records, config, args.out, fmt=args.format,
                name=args.command.replace("-", "_"))
        print(json.dumps(summary, indent=2, default=str))
        return EXIT_OK
    except (ConfigError, DomainError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CapacityError, NodeCapError) as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY


if __name__ == "__main__":
    sys.exit(main())
