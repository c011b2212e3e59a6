"""Command-line entry point: ``segnash solve|pareto|eikonal``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .grid import InvalidArgument, sample_bilinear
from .nash import compute_equilibrium, compute_metrics, sample_pareto_front, worst_case_check
from .scenario import (
    ScenarioError,
    _dump_json,
    build_context,
    bundled_scenarios,
    load_bundled,
    load_scenario,
    write_field_csv,
    write_pareto_csv,
    write_report,
    write_trajectory_csv,
)
from .trajectory import InfeasibleScenario, TraceError

EXIT_OK, EXIT_INVALID, EXIT_NOT_CONVERGED = 0, 1, 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="segnash", description="Surveillance-evasion equilibria on a grid.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="compute an approximate Nash equilibrium")
    s.add_argument("scenario")
    s.add_argument("--out", required=True)
    s.add_argument("--grid-n", type=int)
    s.add_argument("--iters", type=int)
    s.add_argument("--metrics-refine", type=int, default=0, metavar="F",
                   help="refinement factor for the relative-error metric (0 skips it)")

    pa = sub.add_parser("pareto", help="scalarised Pareto-front sweep (two observer positions)")
    pa.add_argument("scenario")
    pa.add_argument("--samples", type=int)
    pa.add_argument("--out", required=True)
    pa.add_argument("--grid-n", type=int)

    e = sub.add_parser("eikonal", help="one weighted solve and trace")
    e.add_argument("scenario")
    e.add_argument("--lambda", dest="lam", required=True, help="comma-separated weights")
    e.add_argument("--out", required=True)
    e.add_argument("--grid-n", type=int)
    return p


def _load(args):
    # a bare name picks a scenario shipped with the package
    if not Path(args.scenario).exists() and args.scenario in bundled_scenarios():
        scn = load_bundled(args.scenario)
    else:
        scn = load_scenario(args.scenario)
    if getattr(args, "grid_n", None) is not None:
        if args.grid_n < 3:
            raise ScenarioError("--grid-n: need at least 3 nodes per axis")
        scn = scn.with_grid_n(args.grid_n)
    if getattr(args, "iters", None) is not None:
        if args.iters < 1:
            raise ScenarioError("--iters: must be >= 1")
        scn = scn.with_iterations(args.iters)
    return scn


def _solve(args) -> int:
    scn = _load(args)
    ctx = build_context(scn)
    report = compute_equilibrium(ctx, scn.tolerances)
    if args.metrics_refine:
        compute_metrics(report, ctx, args.metrics_refine, scn.tolerances)
    write_report(report, ctx, args.out, scenario=scn)
    lam = ", ".join(f"{x:.4f}" for x in report.lambda_star)
    print(f"lambda* = [{lam}]  G = {report.game_value:.6g}  k = {report.k}  "
          f"|R| = {report.residual_norm:.3g} (tol {report.tol_R:.3g})")
    if not report.converged:
        print("warning: residual above tolerance; report written anyway", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _pareto(args) -> int:
    scn = _load(args)
    m = args.samples or scn.pareto_samples or 101
    ctx = build_context(scn)
    front = sample_pareto_front(ctx, m)
    Path(args.out).mkdir(parents=True, exist_ok=True)
    write_pareto_csv(Path(args.out) / "pareto.csv", front)
    hit = worst_case_check(front)
    if hit is None:
        print(f"{len(front)} non-dominated samples; front does not cross the central ray")
    else:
        write_trajectory_csv(Path(args.out) / "worst_case.csv",
                             hit.trajectory if ctx.q == 1 else hit.trajectory[0])
        costs = ", ".join(f"{c:.6g}" for c in hit.costs)
        print(f"{len(front)} non-dominated samples; central ray crossed at J = [{costs}]")
    return EXIT_OK


def _eikonal(args) -> int:
    scn = _load(args)
    try:
        lam = np.array([float(x) for x in args.lam.split(",")])
    except ValueError:
        raise ScenarioError(f"--lambda: cannot parse {args.lam!r}") from None
    if lam.size != scn.observers.r:
        raise ScenarioError(f"--lambda: expected {scn.observers.r} weights, got {lam.size}")
    if (lam < 0).any() or abs(lam.sum() - 1.0) > 1e-9:
        raise ScenarioError("--lambda: weights must be non-negative and sum to 1")
    ctx = build_context(scn)
    ev = ctx.evaluate(lam)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fields_ = ctx.value_fields(lam)
    write_field_csv(out / "value.csv", fields_[0])
    for l, traj in enumerate(ev.trajectories):
        write_trajectory_csv(out / (f"traj_{l + 1}.csv"), traj)
    _dump_json(out / "eikonal.json", {
        "lambda": lam,
        "values": [sample_bilinear(ctx.grid, u, e.source) for u, e in zip(fields_, ctx.evaders)],
        "costs": ev.costs,
        "weighted_value": ev.value,
    })
    print(f"G(lambda) = {ev.value:.6g}")
    return EXIT_OK


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"solve": _solve, "pareto": _pareto, "eikonal": _eikonal}[args.command]
    try:
        return handler(args)
    except (ScenarioError, InvalidArgument, InfeasibleScenario, TraceError, OSError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
