"""Command-line interface.

Subcommands: ``point``, ``cross-section``, ``grid``, ``special classify``,
``compare-mc-me``, ``adf``.  Exit codes: 0 success, 2 invalid
configuration, 3 completed with recorded per-point failures.  The
environment variable ``MQ_THREADS`` caps grid parallelism.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .core_maps import build_params, gc_state
from .indicators import chi2_distance
from .master_equation import build_markov, coarse_grain, power_iterate, uniform_distribution
from .special_cases import classify
from .sweep import (
    DEFAULT_THETA0,
    SweepConfig,
    run_cross_section,
    run_grid,
    run_point,
    special_line_distances,
    write_distribution_csv,
)
from .trajectory_mc import BURN_IN_ON_GC, TrajectoryConfig, simulate

EXIT_OK = 0
EXIT_BAD_CONFIG = 2
EXIT_PARTIAL_FAILURES = 3


def _add_common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--gamma", type=float, default=1.0)
    sp.add_argument("--cells", type=int, default=10_000, help="GC grid cells N")
    sp.add_argument("--steps", type=int, default=1_000_000, help="MC steps")
    sp.add_argument("--iters", type=int, default=10_000, help="ME iteration cap")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", type=str, default=None)
    sp.add_argument("--mode", choices=["me", "mc", "both"], default="me")
    sp.add_argument("--format", choices=["json", "csv"], default="json")


def _config_from(args, **overrides) -> SweepConfig:
    base = dict(
        gamma=args.gamma,
        cells=args.cells,
        mc_steps=args.steps,
        me_max_iters=args.iters,
        seed=args.seed,
        out=getattr(args, "out", None),
        mode=args.mode,
    )
    base.update(overrides)
    return SweepConfig(**base)


def _emit(payload: dict, args) -> None:
    text = json.dumps(payload)
    if args.out and args.format == "json":
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _cmd_point(args) -> int:
    cfg = _config_from(args)
    result = run_point(args.M, args.T, cfg)
    if args.distribution_out and result.distribution is not None:
        write_distribution_csv(result.distribution, args.distribution_out)
        result.distribution_file = args.distribution_out
    if args.trajectory_out:
        traj = TrajectoryConfig(
            n_steps=args.steps,
            seed=args.seed,
            initial_state=gc_state(DEFAULT_THETA0)
            if args.theta0 is None and args.phi0 is None
            else _initial_state(args),
            bins=max(2, min(args.cells, 1000)),
            bloch_samples=args.trajectory_samples,
        )
        res = simulate(traj, build_params(args.M, args.T, args.gamma))
        _write_trajectory_csv(res.bloch_series, args.trajectory_out)
    _emit(result.to_json(), args)
    return EXIT_OK if result.reason is None else EXIT_PARTIAL_FAILURES


def _initial_state(args):
    from .core_maps import state_from_angles

    theta0 = DEFAULT_THETA0 if args.theta0 is None else args.theta0
    if args.phi0 is None:
        return gc_state(theta0)
    return state_from_angles(theta0, args.phi0)


def _write_trajectory_csv(bloch, path: str) -> None:
    if bloch is None:
        raise ValueError("no trajectory samples recorded")
    with open(path, "w") as fh:
        fh.write("step,theta,phi\n")
        for k, (bx, by, bz) in enumerate(bloch):
            theta = float(np.arctan2(np.hypot(bx, by), bz))
            phi = float(np.arctan2(by, bx))
            fh.write(f"{k},{theta:.17g},{phi:.17g}\n")


def _cmd_cross_section(args) -> int:
    cfg = _config_from(args, cells=args.cells)
    t_values = np.linspace(args.t_min, args.t_max, args.t_count)
    failures = 0
    lines = []
    for result in run_cross_section(args.M, t_values, cfg):
        failures += 1 if result.reason else 0
        lines.append(json.dumps(result.to_json()))
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    else:
        for line in lines:
            print(line)
    return EXIT_PARTIAL_FAILURES if failures else EXIT_OK


def _cmd_grid(args) -> int:
    if not args.out:
        print("grid requires --out", file=sys.stderr)
        return EXIT_BAD_CONFIG
    cfg = SweepConfig(
        gamma=args.gamma,
        m_min=args.m_min,
        m_max=args.m_max,
        m_count=args.m_count,
        t_min=args.t_min,
        t_max=args.t_max,
        t_count=args.t_count,
        cells=args.cells,
        mc_steps=args.steps,
        me_max_iters=args.iters,
        seed=args.seed,
        out=args.out,
        mode=args.mode,
    )
    written, failures = run_grid(cfg, workers=args.workers)
    print(json.dumps({"written": written, "failures": failures, "out": args.out}))
    return EXIT_PARTIAL_FAILURES if failures else EXIT_OK


def _cmd_special_classify(args) -> int:
    p = build_params(args.M, args.T, args.gamma)
    tag = classify(p)
    payload = tag.to_json()
    payload["line_distances"] = special_line_distances(args.M, args.T, args.gamma)
    _emit(payload, args)
    return EXIT_OK


def _cmd_compare(args) -> int:
    p = build_params(args.M, args.T, args.gamma)
    bins = args.compare_bins
    if args.cells % bins != 0:
        print(f"--cells must be a multiple of --compare-bins", file=sys.stderr)
        return EXIT_BAD_CONFIG
    markov = build_markov(p, args.cells)
    me, report = power_iterate(markov, uniform_distribution(args.cells), max_iters=args.iters)
    me_coarse = coarse_grain(me, bins)
    traj = TrajectoryConfig(
        n_steps=args.steps,
        seed=args.seed,
        initial_state=gc_state(DEFAULT_THETA0),
        bins=bins,
        burn_in=min(BURN_IN_ON_GC, max(0, args.steps - 1)),
    )
    mc = simulate(traj, p).histogram
    payload = {
        "M": args.M,
        "T": args.T,
        "gamma": args.gamma,
        "chi2": chi2_distance(me_coarse, mc),
        "me_converged": report.converged,
        "me_iterations": report.iterations,
        "me_residual": report.residual,
    }
    _emit(payload, args)
    return EXIT_OK


def _cmd_adf(args) -> int:
    if not args.out:
        print("adf requires --out", file=sys.stderr)
        return EXIT_BAD_CONFIG
    cfg = _config_from(args, out=None)
    result = run_point(args.M, args.T, cfg)
    if result.distribution is None:
        print(f"no distribution: {result.reason}", file=sys.stderr)
        return EXIT_PARTIAL_FAILURES
    write_distribution_csv(result.distribution, args.out)
    print(json.dumps({"out": args.out, "cells": result.distribution.N}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="mqubit",
        description="Stationary state statistics of a stroboscopically monitored qubit",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("point", help="run the full pipeline at one (M, T)")
    sp.add_argument("--M", type=float, required=True)
    sp.add_argument("--T", type=float, required=True)
    _add_common(sp)
    sp.add_argument("--distribution-out", type=str, default=None)
    sp.add_argument("--trajectory-out", type=str, default=None,
                    help="CSV of sampled trajectory states (step,theta,phi)")
    sp.add_argument("--trajectory-samples", type=int, default=2000)
    sp.add_argument("--theta0", type=float, default=None)
    sp.add_argument("--phi0", type=float, default=None)
    sp.set_defaults(func=_cmd_point)

    sp = sub.add_parser("cross-section", help="T-sweep at fixed M")
    sp.add_argument("--M", type=float, required=True)
    sp.add_argument("--t-min", type=float, required=True)
    sp.add_argument("--t-max", type=float, required=True)
    sp.add_argument("--t-count", type=int, required=True)
    _add_common(sp)
    sp.set_defaults(func=_cmd_cross_section)

    sp = sub.add_parser("grid", help="2-d (M, T) sweep, resumable JSON-lines output")
    sp.add_argument("--m-min", type=float, default=1e-2)
    sp.add_argument("--m-max", type=float, default=5.0)
    sp.add_argument("--m-count", type=int, default=40)
    sp.add_argument("--t-min", type=float, default=1e-2)
    sp.add_argument("--t-max", type=float, default=5.0)
    sp.add_argument("--t-count", type=int, default=40)
    sp.add_argument("--workers", type=int, default=None)
    _add_common(sp)
    sp.set_defaults(func=_cmd_grid)

    sp_special = sub.add_parser("special", help="special-case utilities")
    sub_special = sp_special.add_subparsers(dest="special_command", required=True)
    sp = sub_special.add_parser("classify", help="tag a parameter point")
    sp.add_argument("--M", type=float, required=True)
    sp.add_argument("--T", type=float, required=True)
    _add_common(sp)
    sp.set_defaults(func=_cmd_special_classify)

    sp = sub.add_parser("compare-mc-me", help="chi-square distance between the two solvers")
    sp.add_argument("--M", type=float, required=True)
    sp.add_argument("--T", type=float, required=True)
    sp.add_argument("--compare-bins", type=int, default=1000)
    _add_common(sp)
    sp.set_defaults(func=_cmd_compare)

    sp = sub.add_parser("adf", help="dump a stationary distribution to CSV")
    sp.add_argument("--M", type=float, required=True)
    sp.add_argument("--T", type=float, required=True)
    _add_common(sp)
    sp.set_defaults(func=_cmd_adf)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG


if __name__ == "__main__":
    sys.exit(main())
