"""Command-line frontend: single estimates, scenario reproduction, sweeps.

Exit codes: 0 success, 2 parse/dimension/usage errors, 3 solver
non-convergence (result still written), 4 unknown scenario.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .errors import CovestError, InvalidDimension, SchemaMismatch, UnknownScenario
from .estimators import (
    SolverOptions,
    estimate_cmap,
    estimate_cmap_gd,
    estimate_dre,
    estimate_map,
    estimate_mvu,
    estimate_vmap,
)
from .distributions import RngStream
from .model import load_spec
from .montecarlo import run_experiment, save_experiment
from .plots import render_experiment
from .scenarios import ReferenceCheck, build_scenario, scenario_names

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NOT_CONVERGED = 3
EXIT_UNKNOWN_SCENARIO = 4


def _seed_from(args) -> int:
    env = os.environ.get("COVEST_SEED")
    if env is not None:
        return int(env)
    return args.seed


def _load_matrix(path, key):
    with open(path) as fh:
        doc = json.load(fh)
    if key not in doc:
        raise InvalidDimension(f"{path}: missing field {key!r}")
    return np.asarray(doc[key], dtype=float)


def _print_matrix(tag, x):
    print(f"{tag} =")
    for row in np.atleast_2d(x):
        print("  " + "  ".join(f"{v: .6g}" for v in row))


def cmd_estimate(args) -> int:
    try:
        spec = load_spec(args.spec)
        Y = _load_matrix(args.observations, "Y")
        if Y.ndim != 2 or Y.shape != (spec.m, spec.N):
            raise InvalidDimension(
                f"Y must be {spec.m}x{spec.N} to match the spec, got {Y.shape}"
            )
    except (OSError, json.JSONDecodeError, SchemaMismatch, InvalidDimension, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    opts = SolverOptions(
        epsilon=args.epsilon,
        max_iters=args.max_iters,
        weight_mode=args.weight_mode,
        step_size=args.step_size,
        random_starts=args.random_starts,
        start_mean=args.start_mean,
    )
    rng = RngStream(_seed_from(args)) if args.random_starts > 0 else None
    try:
        if args.estimator in ("cmap", "mmap"):
            if args.estimator == "mmap":
                opts.weight_mode = "mmap"
            res = estimate_cmap(spec, Y, opts, rng=rng)
        elif args.estimator == "cmap-gd":
            res = estimate_cmap_gd(spec, Y, opts)
        elif args.estimator == "vmap":
            res = estimate_vmap(spec, Y, opts)
        elif args.estimator == "mvu":
            x = estimate_mvu(spec, Y)
            _print_matrix("X_hat", x)
            _maybe_dump(args.out, {"X_hat": x.tolist(), "estimator": "mvu"})
            return EXIT_OK
        elif args.estimator == "map":
            x = estimate_map(spec, Y, spec.P0, spec.R0)
            _print_matrix("X_hat", x)
            _maybe_dump(args.out, {"X_hat": x.tolist(), "estimator": "map"})
            return EXIT_OK
        else:
            x = estimate_dre(spec, Y)
            _print_matrix("X_hat", x)
            _maybe_dump(args.out, {"X_hat": x.tolist(), "estimator": "dre"})
            return EXIT_OK
    except CovestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    _print_matrix("X_hat", res.X_hat)
    print(f"cost        = {res.final_cost:.12g}")
    print(f"iterations  = {res.iterations}")
    print(f"start_used  = {res.start_used}")
    print(f"converged   = {res.converged}")
    if res.two_minima:
        print("note: the two starts converged to distinct minima")
    _maybe_dump(args.out, {
        "X_hat": res.X_hat.tolist(),
        "P_hat": res.P_hat.tolist(),
        "R_hat": res.R_hat.tolist(),
        "cost": res.final_cost,
        "iterations": res.iterations,
        "start_used": res.start_used,
        "converged": res.converged,
        "estimator": args.estimator,
    })
    return EXIT_OK if res.converged else EXIT_NOT_CONVERGED


def _maybe_dump(path, doc):
    if path:
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2)


def _print_report(references, results):
    if not references:
        return
    print(f"{'reference quantity':52s} {'expected':>10s} {'obtained':>10s} {'delta':>8s}  within")
    for ref in references:
        try:
            got = ref.extract(results)
        except Exception as exc:  # noqa: BLE001 - report all rows
            print(f"{ref.description:52s} {ref.expected:10.3f} {'n/a':>10s}  ({exc})")
            continue
        delta = got - ref.expected
        ok = "yes" if abs(delta) <= ref.tolerance else "NO"
        print(f"{ref.description:52s} {ref.expected:10.3f} {got:10.3f} {delta:+8.3f}  {ok}")


def _run_scenario(scn, args, seed) -> int:
    os.makedirs(args.out, exist_ok=True)
    results = {}
    multi = len(scn.configs) > 1
    for label, cfg in scn.configs:
        if args.trials is not None:
            from dataclasses import replace

            cfg = replace(cfg, trials=args.trials)
        outdir = os.path.join(args.out, label) if multi else args.out
        print(f"[{scn.name}] running {label}: {cfg.trials} trials x {len(cfg.grid)} grid points")
        res = run_experiment(cfg, workers=args.workers)
        save_experiment(res, outdir)
        if args.plot:
            for path in render_experiment(res, outdir):
                print(f"  wrote {path}")
        results[label] = res
        for p in res.points:
            cells = ", ".join(f"{k}={v:.2f}" for k, v in sorted(p.nmse_db.items()))
            print(f"  grid={p.grid_value:g}: NMSE[dB] {cells}")
    if args.report:
        _print_report(scn.references, results)
    return EXIT_OK


def cmd_reproduce(args) -> int:
    try:
        scn = build_scenario(args.scenario, trials=args.trials, seed=_seed_from(args))
    except UnknownScenario as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNKNOWN_SCENARIO
    return _run_scenario(scn, args, _seed_from(args))


def cmd_convergence(args) -> int:
    if not args.eps:
        print("error: at least one --eps value is required", file=sys.stderr)
        return EXIT_USAGE
    from .montecarlo import ExperimentConfig

    cfg = ExperimentConfig(
        name="convergence",
        estimators=("cmap",),
        trials=args.trials or 10_000,
        base_seed=_seed_from(args),
        sweep="epsilon",
        grid=tuple(args.eps),
    )
    os.makedirs(args.out, exist_ok=True)
    print(f"[convergence] {cfg.trials} trials x eps grid {cfg.grid}")
    res = run_experiment(cfg, workers=args.workers)
    save_experiment(res, args.out)
    if args.plot:
        for path in render_experiment(res, args.out):
            print(f"  wrote {path}")
    for p in res.points:
        print(
            f"  eps={p.grid_value:g}: NMSE(cmap) {p.nmse_db['cmap']:.2f} dB, "
            f"mean N_iter {p.mean_iterations['cmap']:.1f}"
        )
    if args.report and {1e-1, 1e-3, 1e-6} <= set(cfg.grid):
        _print_report(build_scenario("fig11").references, {"fig11": res})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="covest",
        description="Estimation benchmarks for the linear model with uncertain covariances",
    )
    parser.add_argument("--version", action="version", version=f"covest {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="run one estimator on a spec + observation file")
    est.add_argument("spec", help="problem spec JSON (see README for the schema)")
    est.add_argument("observations", help="JSON file with field Y (m x N)")
    est.add_argument("--estimator", default="cmap",
                     choices=("mvu", "map", "cmap", "mmap", "cmap-gd", "vmap", "dre"))
    est.add_argument("--epsilon", type=float, default=1e-6)
    est.add_argument("--max-iters", type=int, default=1000)
    est.add_argument("--weight-mode", default="cmap", choices=("cmap", "mmap"))
    est.add_argument("--step-size", type=float, default=1e-4)
    est.add_argument("--random-starts", type=int, default=0,
                     help="replace the two canonical starts with k randomized ones")
    est.add_argument("--start-mean", default="mvu", choices=("mvu", "prior", "map", "dre"))
    est.add_argument("--seed", type=int, default=0)
    est.add_argument("--out", default=None, help="write the result as JSON here")
    est.set_defaults(func=cmd_estimate)

    rep = sub.add_parser("reproduce", help="run a named benchmark scenario")
    rep.add_argument("scenario", help=f"one of: {', '.join(scenario_names())}")
    rep.add_argument("--trials", "-T", type=int, default=None)
    rep.add_argument("--seed", type=int, default=20260808)
    rep.add_argument("--workers", "-w", type=int, default=1)
    rep.add_argument("--out", default="out")
    rep.add_argument("--plot", action=argparse.BooleanOptionalAction, default=True)
    rep.add_argument("--report", action=argparse.BooleanOptionalAction, default=True,
                     help="print published reference values next to obtained ones")
    rep.set_defaults(func=cmd_reproduce)

    conv = sub.add_parser("convergence", help="iteration statistics vs stopping tolerance")
    conv.add_argument("--eps", type=float, action="append", default=None)
    conv.add_argument("--trials", "-T", type=int, default=None)
    conv.add_argument("--seed", type=int, default=20260808)
    conv.add_argument("--workers", "-w", type=int, default=1)
    conv.add_argument("--out", default="out")
    conv.add_argument("--plot", action=argparse.BooleanOptionalAction, default=True)
    conv.add_argument("--report", action=argparse.BooleanOptionalAction, default=False)
    conv.set_defaults(func=cmd_convergence)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
