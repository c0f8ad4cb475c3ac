"""Batch command line front end.

Subcommands: ``run`` (simulate a config, writing snapshots and a diagnostics
time series), ``convergence`` (grid sequence with L1 errors and observed
orders), ``verify`` (built-in property checks) and ``exact`` (dump an exact
solution for plotting).  Exit codes: 0 ok, 1 solver abort, 2 configuration
error, 3 verification failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import verify as verify_mod
from .cases import case_mesh, convergence_study, dambreak_extrema, paraboloid_case
from .config import ConfigError, RunConfig, build_case, parse_config
from .diagnostics import compute_report
from .fields import ScalarField, project_scalar, project_velocity
from .mesh import MacMesh, build_mesh
from .operators import dual_heights
from .output import (
    DiagnosticsWriter,
    diagnostics_row,
    initial_diagnostics_row,
    write_snapshot,
)
from .scheme import (
    CflViolationError,
    NumericsError,
    SchemeParams,
    State,
    initialize,
    pressure_update,
    run,
)

OUTDIR_ENV = "MACSWE_OUTDIR"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="macswe",
        description="Staggered finite-volume shallow water solver",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate one configuration")
    p_run.add_argument("config", help="path to the run configuration file")
    p_run.add_argument("--grid", type=int, help="override grid resolution (n x n)")
    p_run.add_argument("--dt", type=float, help="override with a fixed time step")
    p_run.add_argument("--tend", type=float, help="override the end time")
    p_run.add_argument("--out", help="override the output directory")
    p_run.add_argument("--case", help="override the case name")

    p_conv = sub.add_parser("convergence", help="grid refinement study")
    p_conv.add_argument("config")
    p_conv.add_argument("--grids", type=int, nargs="+", help="override grid list")

    sub.add_parser("verify", help="run the built-in property checks")

    p_exact = sub.add_parser("exact", help="dump an exact solution snapshot")
    p_exact.add_argument("case", help="case with an exact solution (paraboloid)")
    p_exact.add_argument("t", type=float, help="evaluation time")
    p_exact.add_argument("--grid", type=int, default=100)
    p_exact.add_argument("--out", default="exact")
    return parser


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if getattr(args, "grid", None):
        cfg.nx = cfg.ny = args.grid
    if getattr(args, "dt", None):
        cfg.dt, cfg.dt_dx_ratio, cfg.cfl_factor = args.dt, None, None
    if getattr(args, "tend", None):
        cfg.t_end, cfg.revolutions = args.tend, None
    if getattr(args, "case", None):
        cfg.case_name = args.case
        cfg.case_options = {}
    out_env = os.environ.get(OUTDIR_ENV)
    if getattr(args, "out", None):
        cfg.out_dir = args.out
    elif out_env:
        cfg.out_dir = out_env
    return cfg


class _RunObservers:
    """Snapshot/diagnostics writers invoked between steps."""

    def __init__(self, cfg: RunConfig, mesh: MacMesh, params: SchemeParams):
        self.cfg = cfg
        self.mesh = mesh
        self.params = params
        os.makedirs(cfg.out_dir, exist_ok=True)
        self.diag = (
            DiagnosticsWriter(os.path.join(cfg.out_dir, "diagnostics.csv"))
            if cfg.diagnostics
            else None
        )

    def start(self, state: State):
        if self.diag:
            self.diag.write_row(initial_diagnostics_row(self.mesh, state, self.params))
        if self.cfg.snapshots:
            self.snapshot(state, 0)

    def snapshot(self, state: State, index: int):
        name = os.path.join(self.cfg.out_dir, f"snapshot_{index:06d}")
        write_snapshot(self.mesh, state, self.params.z.values, name,
                       staggered=self.cfg.staggered)

    def __call__(self, ctx):
        if self.diag:
            report = compute_report(ctx.mesh, ctx.state_old, ctx.state_new,
                                    ctx.fluxes, ctx.params, ctx.dt)
            self.diag.write_row(diagnostics_row(report))
        if self.cfg.snapshots and self.cfg.stride and ctx.step_index % self.cfg.stride == 0:
            self.snapshot(ctx.state_new, ctx.step_index)


def _cmd_run(args) -> int:
    cfg = _apply_overrides(parse_config(args.config), args)
    case = build_case(cfg)
    mesh = build_mesh(case.bounds, nx=cfg.nx, ny=cfg.ny, obstacles=case.obstacles)
    params = SchemeParams(
        z=ScalarField.from_function(mesh, case.z),
        g=case.g,
        dt=cfg.dt,
        dt_dx_ratio=cfg.dt_dx_ratio if cfg.dt is None and cfg.cfl_factor is None
        else None,
        cfl_factor=cfg.cfl_factor,
        t_end=case.t_end,
        eps_dry=cfg.eps_dry,
    )
    if params.dt is None and params.dt_dx_ratio is None and params.cfl_factor is None:
        params.dt_dx_ratio = case.dt_dx_ratio
    state0 = initialize(mesh, case.h0, case.u0, params)
    observers = _RunObservers(cfg, mesh, params)
    observers.start(state0)

    steps = 0

    def counter(ctx):
        nonlocal steps
        steps = ctx.step_index

    final = run(mesh, state0, params, observers=(observers, counter))
    if cfg.snapshots:
        observers.snapshot(final, steps)
    hmin, hmax = dambreak_extrema(mesh, final)
    mass = float((mesh.area * final.h.values)[mesh.active].sum())
    print(f"case={case.name} grid={cfg.nx}x{cfg.ny} steps={steps} "
          f"t={final.t:.6g} mass={mass:.12g} h_min={hmin:.6g} h_max={hmax:.6g}")
    print(f"outputs in {cfg.out_dir}")
    return 0


def _cmd_convergence(args) -> int:
    cfg = parse_config(args.config)
    grids = args.grids or cfg.convergence_grids or [100, 200]
    case = build_case(cfg)
    if case.exact is None:
        raise ConfigError(f"case {case.name!r} has no exact solution for a study")
    rows = convergence_study(grids, case)
    ref = case.reference.get("l1_errors", {})
    print(f"{'grid':>10} {'L1 error':>14} {'order':>8} {'reference':>12}")
    for row in rows:
        order = f"{row.order:8.3f}" if row.order is not None else " " * 8
        ref_txt = f"{ref[row.n]:12.3e}" if row.n in ref else " " * 12
        print(f"{row.n:>7}^2 {row.error:14.6e} {order} {ref_txt}")
    return 0


def _cmd_verify() -> int:
    results = verify_mod.run_all()
    failed = 0
    for res in results:
        mark = "PASS" if res.passed else "FAIL"
        failed += not res.passed
        print(f"[{mark}] {res.name}: {res.detail}")
    if failed:
        print(f"{failed} of {len(results)} checks failed")
        return 3
    print(f"all {len(results)} checks passed")
    return 0


def _cmd_exact(args) -> int:
    if args.case != "paraboloid":
        raise ConfigError(f"case {args.case!r} has no exact solution")
    case = paraboloid_case()
    mesh = case_mesh(case, args.grid)
    t = float(args.t)
    h = project_scalar(mesh, lambda x, y: case.exact(x, y, t)[0])
    u = project_velocity(mesh, lambda x, y: case.exact(x, y, t)[1:])
    state = State(t=t, h=h, u=u, p=pressure_update(h, case.g),
                  h_dual=dual_heights(mesh, h))
    z = ScalarField.from_function(mesh, case.z)
    for path in write_snapshot(mesh, state, z.values, args.out):
        print(path)
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "convergence":
            return _cmd_convergence(args)
        if args.command == "verify":
            return _cmd_verify()
        if args.command == "exact":
            return _cmd_exact(args)
        parser.error(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (CflViolationError, NumericsError) as exc:
        print(f"solver aborted: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
