"""Command-line entry point: ``cdeinv {simulate,invert,experiment,compare}``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import experiment as ex
from .errors import InfeasibleSpec
from .metrics import read_error_curve_csv, uniformity_ratio
from .paths import read_observations_csv, read_path_csv


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("experiment")
    src = g.add_mutually_exclusive_group()
    src.add_argument("--config", type=Path, help="experiment JSON file")
    src.add_argument("--preset", help=f"bundled preset, one of {ex.preset_names()}")
    g.add_argument("--out", type=Path, default=Path("runs/out"), help="artifact directory")
    g.add_argument("--seed", type=int, help="override the control seed")
    g.add_argument("-v", "--verbose", action="store_true")
    i = p.add_argument_group("integrator")
    i.add_argument("--scheme", choices=["euler", "rk4"])
    i.add_argument("--substeps", type=int, help="integrator steps per interval")
    m = p.add_argument_group("methods")
    m.add_argument("--method", choices=["newton", "signature", "both"], help="inverter(s) to run")
    m.add_argument("--iterations", type=int, help="signature iterations (max)")
    m.add_argument("--quad-nodes", type=int, help="trapezoid nodes per segment integral")
    m.add_argument("--sig-tol", type=float, help="signature slope-change tolerance")
    m.add_argument("--sweeps", type=int, help="Newton iterations per interval")
    m.add_argument("--newton-tol", type=float, help="Newton residual tolerance")
    m.add_argument("--damping", type=float, help="Newton damping factor in (0, 1]")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(
        prog="cdeinv",
        description="Reconstruct piecewise-linear controls of dY = f(Y) dX from observations of Y.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="draw a seeded control and write observations")
    inv = sub.add_parser("invert", parents=[common], help="invert observations.csv with the chosen methods")
    inv.add_argument("--obs", type=Path, help="observations CSV (default: OUT/observations.csv)")
    inv.add_argument("--truth", type=Path, help="true control CSV for error curves (default: OUT/control_true.csv if present)")
    sub.add_parser("experiment", parents=[common], help="simulate + invert + write all artifacts")
    cmp_ = sub.add_parser("compare", help="tabulate an artifact directory and check summary.json")
    cmp_.add_argument("run_dir", type=Path)
    return parser


def resolve_spec(args) -> ex.ExperimentSpec:
    if args.config is not None:
        spec = ex.load_spec(args.config)
    else:
        spec = ex.load_preset(args.preset or "cir")
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.scheme or args.substeps:
        changes["integrator"] = dataclasses.replace(
            spec.integrator,
            **{k: v for k, v in (("scheme", args.scheme), ("substeps", args.substeps)) if v is not None},
        )
    if args.method:
        changes["methods"] = list(ex.METHODS) if args.method == "both" else [args.method]
    sig = {}
    if args.iterations is not None:
        sig["max_iterations"] = args.iterations
    if args.quad_nodes is not None:
        sig["quadrature_nodes"] = args.quad_nodes
    if args.sig_tol is not None:
        sig["slope_change_tolerance"] = args.sig_tol
    if sig:
        changes["signature"] = dataclasses.replace(spec.signature, **sig)
    nt = {}
    if args.newton_tol is not None:
        nt["residual_tolerance"] = args.newton_tol
    if args.damping is not None:
        nt["damping"] = args.damping
    if nt:
        changes["newton"] = dataclasses.replace(spec.newton, **nt)
    if args.sweeps is not None:
        changes["newton_sweeps"] = args.sweeps
    return spec.replace(**changes) if changes else spec


def _print_table(rows) -> None:
    print(f"{'method':<10} {'n':>5} {'sup_error':>12} {'uniformity':>11}")
    for method, n, sup, ur in rows:
        print(f"{method:<10} {n:>5} {sup:>12.4e} {ur:>11.3f}")


def cmd_simulate(args) -> int:
    spec = resolve_spec(args)
    try:
        sim = ex.simulate(spec)
    except InfeasibleSpec as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return ex.EXIT_INFEASIBLE
    ex.write_artifacts(args.out, spec, {}, sim=sim)
    print(f"wrote {args.out} (seed {sim.seed_used}, {sim.attempts} attempt(s))")
    return ex.EXIT_OK


def cmd_invert(args) -> int:
    spec = resolve_spec(args)
    obs = read_observations_csv(args.obs or args.out / "observations.csv")
    truth_path = args.truth or (args.out / "control_true.csv")
    truth = read_path_csv(truth_path) if truth_path.exists() else None
    spec = spec.replace(delta=obs.delta, n_intervals=obs.n_intervals, y0=obs.initial_value.tolist())
    results = ex.invert(spec, obs, truth)
    ex.write_artifacts(args.out, spec, results, observations=obs)
    _print_table(ex.snapshot_table(results))
    return ex.EXIT_METHOD_FAILURE if any(r.failed for r in results.values()) else ex.EXIT_OK


def cmd_experiment(args) -> int:
    spec = resolve_spec(args)
    code, out = ex.run_experiment(spec, args.out)
    if code == ex.EXIT_INFEASIBLE:
        print("infeasible experiment spec", file=sys.stderr)
        return code
    cmd_compare(argparse.Namespace(run_dir=out))
    return code


def compare_run(run_dir: Path) -> tuple[list, list[str]]:
    """Recompute per-snapshot errors from CSVs; return rows and mismatches with summary.json."""
    summary = json.loads((run_dir / "summary.json").read_text())
    rows, problems = [], []
    for method, msum in summary.get("methods", {}).items():
        for key, snap in msum.get("snapshots", {}).items():
            curve = run_dir / method / f"error_curve_n{key}.csv"
            if not curve.exists():
                continue
            rep = read_error_curve_csv(curve)
            ur = uniformity_ratio(rep)
            rows.append((method, int(key), rep.sup_error, ur))
            if rep.sup_error != snap.get("sup_error") or not (
                ur == snap.get("uniformity_ratio") or (np.isinf(ur) and np.isinf(snap.get("uniformity_ratio", 0)))
            ):
                problems.append(f"{method} n={key}: CSV and summary.json disagree")
    rows.sort()
    return rows, problems


def cmd_compare(args) -> int:
    rows, problems = compare_run(Path(args.run_dir))
    _print_table(rows)
    for p in problems:
        print(p, file=sys.stderr)
    return 1 if problems else 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING)
    handler = {
        "simulate": cmd_simulate,
        "invert": cmd_invert,
        "experiment": cmd_experiment,
        "compare": cmd_compare,
    }[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
