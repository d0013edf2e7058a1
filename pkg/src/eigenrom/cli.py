"""Command line entry point.

Exit codes: 0 success, 1 configuration error, 2 nonconvergence.  The
EIGENROM_LOG environment variable (error|info|debug) controls diagnostics on
standard error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .continuation import ContinuationConfig
from .harness import ExperimentConfig, ExperimentError, emit_csv, run_experiment

log = logging.getLogger(__name__)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _configure_logging():
    level = os.environ.get("EIGENROM_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    if level not in levels:
        raise UsageError(f"EIGENROM_LOG must be error|info|debug, got {level!r}")
    logging.basicConfig(stream=sys.stderr, level=levels[level],
                        format="%(levelname)s %(name)s: %(message)s")


def _pod_eps(text: str):
    if text == "exact":
        return "exact"
    try:
        return float(text)
    except ValueError as exc:
        raise UsageError(f"--pod-eps expects a number or 'exact': {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="eigenrom",
                     description="First Laplace-Dirichlet eigenpair by "
                                 "time continuation with a POD reduced model")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment schedule")
    run.add_argument("--domain", required=True, choices=["square", "lshape"])
    run.add_argument("--mesh", required=True,
                     help="crisscross|right|left|mixed|file:<path>")
    run.add_argument("--fe", type=int, default=1, choices=[1, 2],
                     help="polynomial degree of the finite element space")
    run.add_argument("--n-start", type=int, default=16,
                     help="subintervals per side on the coarsest mesh")
    run.add_argument("--levels", type=int, default=1,
                     help="number of mesh levels (n doubles per level)")
    run.add_argument("--dt", type=float, default=0.1)
    run.add_argument("--stop-tol", type=float, default=1e-8)
    run.add_argument("--stride", type=int, default=4,
                     help="snapshot stride in time steps")
    run.add_argument("--strides", default=None,
                     help="comma separated strides, e.g. 2,4,8 (overrides --stride)")
    run.add_argument("--pod-eps", type=_pod_eps, default=None,
                     help="energy tolerance, or 'exact' on the square "
                          "(default: exact on the square, 1e-7 otherwise)")
    run.add_argument("--init", default="random", choices=["ones", "random"],
                     help="initial iterate of the continuation runs")
    run.add_argument("--adaptive", action="store_true",
                     help="adaptive bisection refinement instead of uniform levels")
    run.add_argument("--theta", type=float, default=0.5,
                     help="bulk marking fraction for adaptive runs")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--jobs", type=int, default=1,
                     help="worker threads for independent schedule rows")
    run.add_argument("--out", required=True, help="output CSV path")
    run.add_argument("--dump-singvals", default=None,
                     help="write the finest level's singular values here")
    run.add_argument("--dump-mesh", default=None,
                     help="write the finest mesh here (text format)")
    return parser


def _config_from_args(args) -> ExperimentConfig:
    mesh = args.mesh
    mesh_file = None
    if mesh.startswith("file:"):
        mesh_file = mesh[len("file:"):]
        mesh = "file"
    if args.strides:
        try:
            strides = tuple(int(s) for s in args.strides.split(","))
        except ValueError as exc:
            raise UsageError(f"bad --strides value {args.strides!r}") from exc
    else:
        strides = (args.stride,)
    cont = ContinuationConfig(dt=args.dt, stop_tol=args.stop_tol,
                              snapshot_stride=strides[0],
                              initial_guess=args.init, seed=args.seed)
    return ExperimentConfig(
        domain=args.domain, mesh=mesh, mesh_file=mesh_file,
        n_start=args.n_start, levels=args.levels, fe_degree=args.fe,
        adaptive=args.adaptive, theta=args.theta, continuation=cont,
        strides=strides, pod_eps=args.pod_eps, seed=args.seed, jobs=args.jobs,
        out_csv=args.out, singvals_path=args.dump_singvals,
        mesh_dump_path=args.dump_mesh)


def main(argv=None) -> int:
    try:
        _configure_logging()
        args = build_parser().parse_args(argv)
        cfg = _config_from_args(args)
        rows = run_experiment(cfg)
    except (UsageError, ValueError) as exc:
        print(f"eigenrom: error: {exc}", file=sys.stderr)
        return 1
    except ExperimentError as exc:
        if exc.rows:
            try:
                emit_csv(exc.rows, args.out)
                log.error("schedule aborted; partial table written to %s", args.out)
            except OSError:
                pass
        print(f"eigenrom: error: {exc}", file=sys.stderr)
        return 2 if exc.nonconvergence else 1
    emit_csv(rows, cfg.out_csv)
    for row in rows:
        log.info("%s n=%s dof=%d lambda_fom=%.12f lambda_rom=%.12f N=%d",
                 row.mesh, row.n, row.dof, row.lambda_fom, row.lambda_rom,
                 row.n_pod)
    return 0


if __name__ == "__main__":
    sys.exit(main())
