"""Benchmark cases: a rotating drop on a parabolic support (with an exact
solution, used for convergence studies) and a partial dam break around an
obstacle wall, plus small helpers to build synthetic states for property
tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .fields import ScalarField, VelocityField, l1_error, project_scalar
from .mesh import MacMesh, build_mesh
from .scheme import SchemeParams, State, initialize, run

__all__ = [
    "CaseDefinition",
    "paraboloid_exact",
    "paraboloid_topography",
    "paraboloid_case",
    "dambreak_case",
    "run_case",
    "ConvergenceRow",
    "convergence_study",
    "dambreak_extrema",
    "lake_at_rest_data",
    "random_state",
    "BENCHMARK_DROP_L1_ERRORS",
    "BENCHMARK_DAMBREAK_EXTREMA",
]

# Reference results for the standard configurations of the two benchmarks
# (rotating drop: discrete L1 height error after one revolution with
# dt = dx/8; dam break: height extrema at t = 20 on the 1000x1000 grid
# with dt = dx/25).
BENCHMARK_DROP_L1_ERRORS = {100: 3.02e-3, 200: 1.54e-3, 400: 0.896e-3, 800: 0.511e-3}
BENCHMARK_DAMBREAK_EXTREMA = (2.149, 9.306)


@dataclass
class CaseDefinition:
    """A reusable experiment: domain, data, time horizon and references.

    Walls (zero normal velocity) are the only boundary condition the scheme
    supports, so no boundary field is needed.
    """

    name: str
    bounds: tuple
    z: Callable
    h0: Callable
    u0: Callable | None
    t_end: float
    dt_dx_ratio: float
    g: float = 9.81
    obstacles: tuple = ()
    exact: Callable | None = None  # (x, y, t) -> (h, u1, u2)
    reference: dict = field(default_factory=dict)


# -- rotating drop on a parabolic support ------------------------------


def paraboloid_topography(x, y, L: float = 4.0, depth: float = 0.1):
    return -depth * (1.0 - (x - L / 2) ** 2 - (y - L / 2) ** 2)


def paraboloid_exact(x, y, t, L: float = 4.0, depth: float = 0.1, g: float = 9.81):
    """Exact rotating-drop solution: planar free surface over a paraboloid.

    The free surface depth*((x-L/2) cos wt + (y-L/2) sin wt - 1/2) rotates
    rigidly with w = sqrt(2 g depth) while the velocity is spatially uniform,
    u = (w/2)(-sin wt, cos wt); the height is the surface elevation minus the
    support, floored at zero (dry zones).
    """
    w = math.sqrt(2.0 * g * depth)
    c, s = math.cos(w * t), math.sin(w * t)
    surface = depth * ((x - L / 2) * c + (y - L / 2) * s - 0.5)
    h = np.maximum(0.0, surface - paraboloid_topography(x, y, L, depth))
    u1 = np.full_like(np.asarray(h, dtype=float), -0.5 * w * s)
    u2 = np.full_like(np.asarray(h, dtype=float), 0.5 * w * c)
    return h, u1, u2


def paraboloid_case(
    *,
    L: float = 4.0,
    depth: float = 0.1,
    g: float = 9.81,
    revolutions: float = 1.0,
    dt_dx_ratio: float = 1.0 / 8.0,
) -> CaseDefinition:
    w = math.sqrt(2.0 * g * depth)
    return CaseDefinition(
        name="paraboloid",
        bounds=(0.0, L, 0.0, L),
        z=lambda x, y: paraboloid_topography(x, y, L, depth),
        h0=lambda x, y: paraboloid_exact(x, y, 0.0, L, depth, g)[0],
        u0=lambda x, y: paraboloid_exact(x, y, 0.0, L, depth, g)[1:],
        t_end=revolutions * 2.0 * math.pi / w,
        dt_dx_ratio=dt_dx_ratio,
        g=g,
        exact=lambda x, y, t: paraboloid_exact(x, y, t, L, depth, g),
        reference={"l1_errors": dict(BENCHMARK_DROP_L1_ERRORS)},
    )


# -- partial dam break --------------------------------------------------


def dambreak_case(
    *,
    g: float = 9.81,
    t_end: float = 20.0,
    dt_dx_ratio: float = 1.0 / 25.0,
    wall_x: tuple = (95.0, 105.0),
    breach_y: tuple = (95.0, 170.0),
    h_left: float = 10.0,
    h_right: float = 5.0,
) -> CaseDefinition:
    """Dam break through an asymmetric breach in an obstacle wall.

    The wall spans x in ``wall_x`` over the full y range except the breach
    interval ``breach_y``; the reservoir (x <= 100) starts at ``h_left``, the
    downstream side at ``h_right``, everything at rest, flat bottom.
    """
    side = 200.0
    obstacles = (
        (wall_x[0], wall_x[1], 0.0, breach_y[0]),
        (wall_x[0], wall_x[1], breach_y[1], side),
    )
    return CaseDefinition(
        name="dambreak",
        bounds=(0.0, side, 0.0, side),
        z=lambda x, y: np.zeros_like(np.asarray(x, dtype=float) + np.asarray(y)),
        h0=lambda x, y: np.where(np.asarray(x) <= 100.0, h_left, h_right)
        + np.zeros_like(np.asarray(y, dtype=float)),
        u0=None,
        t_end=t_end,
        dt_dx_ratio=dt_dx_ratio,
        g=g,
        obstacles=obstacles,
        reference={"extrema_1000": BENCHMARK_DAMBREAK_EXTREMA},
    )


# -- running ------------------------------------------------------------


def case_mesh(case: CaseDefinition, n: int, ny: int | None = None, snap: bool = True) -> MacMesh:
    return build_mesh(case.bounds, nx=n, ny=ny, obstacles=case.obstacles, snap=snap)


def case_params(case: CaseDefinition, mesh: MacMesh, **overrides) -> SchemeParams:
    kw = dict(
        z=ScalarField.from_function(mesh, case.z),
        g=case.g,
        dt_dx_ratio=case.dt_dx_ratio,
        t_end=case.t_end,
    )
    kw.update(overrides)
    return SchemeParams(**kw)


def run_case(case: CaseDefinition, n: int, observers=(), **param_overrides):
    """Build, initialize and run one case; returns (mesh, params, final state)."""
    mesh = case_mesh(case, n)
    params = case_params(case, mesh, **param_overrides)
    state0 = initialize(mesh, case.h0, case.u0, params)
    final = run(mesh, state0, params, observers=observers)
    return mesh, params, final


class ConvergenceRow(NamedTuple):
    n: int
    error: float
    order: float | None


def convergence_study(grids, case: CaseDefinition | None = None, observers=()) -> list[ConvergenceRow]:
    """Run a grid sequence and measure the discrete L1 height error.

    The numerical height is compared against the cell means of the exact
    height at the time actually reached (a whole number of steps).  Orders
    are slopes between consecutive grids.
    """
    if case is None:
        case = paraboloid_case()
    if case.exact is None:
        raise ValueError(f"case {case.name!r} has no exact solution")
    rows: list[ConvergenceRow] = []
    prev: ConvergenceRow | None = None
    for n in grids:
        mesh, params, final = run_case(case, int(n), observers=observers)
        exact_h = project_scalar(mesh, lambda x, y: case.exact(x, y, final.t)[0])
        err = l1_error(mesh, final.h, exact_h)
        order = None
        if prev is not None and err > 0 and prev.error > 0:
            order = math.log(prev.error / err) / math.log(n / prev.n)
        rows.append(ConvergenceRow(int(n), err, order))
        prev = rows[-1]
    return rows


def dambreak_extrema(mesh: MacMesh, state: State) -> tuple[float, float]:
    h = state.h.values[mesh.active]
    return float(h.min()), float(h.max())


# -- synthetic data for property tests ----------------------------------


def lake_at_rest_data(mesh: MacMesh, z: ScalarField, margin: float = 0.05):
    """Height field completing z to a flat free surface with min depth margin."""
    zmax = float(z.values[mesh.active].max())
    target = zmax + margin
    h = np.zeros_like(z.values)
    h[mesh.active] = target - z.values[mesh.active]
    return ScalarField(h), target


def random_state(mesh: MacMesh, rng: np.random.Generator, h_range=(0.0, 2.0),
                 u_max: float = 1.0, dry_fraction: float = 0.0):
    """Random nonnegative height and wall-respecting velocity (tests)."""
    lo, hi = h_range
    h = rng.uniform(lo, hi, size=(mesh.nx, mesh.ny))
    if dry_fraction > 0:
        h = np.where(rng.uniform(size=h.shape) < dry_fraction, 0.0, h)
    h[~mesh.active] = 0.0
    u = VelocityField(
        rng.uniform(-u_max, u_max, size=(mesh.nx + 1, mesh.ny)),
        rng.uniform(-u_max, u_max, size=(mesh.nx, mesh.ny + 1)),
    ).enforce_boundary(mesh)
    return ScalarField(h), u
