"""Snapshot and diagnostics output.

Snapshots are written twice: a legacy-VTK file for visualization (structured
points on uniform grids, rectilinear otherwise; inactive cells blanked with
nan) and a plain CSV that is the bit-stable format for tests: 17 significant
digits, LF line endings, fixed header, inactive cells omitted.  Cell-centered
velocities in both are display-only averages of the two opposite face
values; the staggered arrays themselves can be dumped with a flag.
"""

from __future__ import annotations

import io
import os

import numpy as np

from .diagnostics import BalanceReport, cell_kinetic_energy, monitor_estimates
from .mesh import MacMesh
from .scheme import SchemeParams, State

__all__ = [
    "write_snapshot",
    "read_snapshot_csv",
    "DIAGNOSTIC_COLUMNS",
    "diagnostics_row",
    "initial_diagnostics_row",
    "write_diagnostics_row",
    "DiagnosticsWriter",
]

_FMT = "%.17g"  # shortest-or-better decimal that round-trips float64

SNAPSHOT_HEADER = "i,j,x,y,h,u1c,u2c,z"


def _fmt(x: float) -> str:
    return _FMT % (x,)


def write_snapshot(mesh: MacMesh, state: State, z_values: np.ndarray, path: str,
                   staggered: bool = False) -> list[str]:
    """Write ``path``.vtk and ``path``.csv; returns the file names written."""
    base, ext = os.path.splitext(path)
    if ext not in ("", ".vtk", ".csv"):
        base = path
    written = [
        _write_vtk(mesh, state, z_values, base + ".vtk"),
        _write_csv(mesh, state, z_values, base + ".csv"),
    ]
    if staggered:
        written.append(_write_face_csv(base + ".u1.csv", state.u.u1))
        written.append(_write_face_csv(base + ".u2.csv", state.u.u2))
    return written


def _centered_velocity(state: State):
    u1c = 0.5 * (state.u.u1[:-1, :] + state.u.u1[1:, :])
    u2c = 0.5 * (state.u.u2[:, :-1] + state.u.u2[:, 1:])
    return u1c, u2c


def _write_csv(mesh: MacMesh, state: State, z_values: np.ndarray, path: str) -> str:
    u1c, u2c = _centered_velocity(state)
    ii, jj = np.meshgrid(np.arange(mesh.nx), np.arange(mesh.ny), indexing="ij")
    cols = [ii, jj,
            np.broadcast_to(mesh.xc[:, None], ii.shape),
            np.broadcast_to(mesh.yc[None, :], ii.shape),
            state.h.values, u1c, u2c, z_values]
    table = np.column_stack([np.asarray(c, dtype=float)[mesh.active] for c in cols])
    buf = io.StringIO()
    np.savetxt(buf, table, fmt=_FMT, delimiter=",", newline="\n",
               header=SNAPSHOT_HEADER, comments="")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(buf.getvalue())
    return path


def _write_face_csv(path: str, values: np.ndarray) -> str:
    ii, jj = np.meshgrid(np.arange(values.shape[0]), np.arange(values.shape[1]),
                         indexing="ij")
    table = np.column_stack([ii.ravel(), jj.ravel(), values.ravel()])
    buf = io.StringIO()
    np.savetxt(buf, table, fmt=_FMT, delimiter=",", newline="\n",
               header="i,j,u", comments="")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(buf.getvalue())
    return path


def read_snapshot_csv(path: str) -> dict[str, np.ndarray]:
    """Read a snapshot CSV back into named columns (floats are bit-exact)."""
    with open(path, encoding="ascii") as fh:
        names = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return {name: data[:, k] for k, name in enumerate(names)}


def _vtk_cell_scalars(fh, name: str, values: np.ndarray, mask: np.ndarray):
    out = np.where(mask, values, np.nan)
    fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
    # VTK cell order: x index fastest
    np.savetxt(fh, out.T.reshape(-1, 1), fmt=_FMT)


def _write_vtk(mesh: MacMesh, state: State, z_values: np.ndarray, path: str) -> str:
    u1c, u2c = _centered_velocity(state)
    h = state.h.values
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write("shallow water snapshot t=%s\n" % _fmt(state.t))
        fh.write("ASCII\n")
        if mesh.is_uniform():
            fh.write("DATASET STRUCTURED_POINTS\n")
            fh.write(f"DIMENSIONS {mesh.nx + 1} {mesh.ny + 1} 1\n")
            fh.write(f"ORIGIN {_fmt(mesh.x_faces[0])} {_fmt(mesh.y_faces[0])} 0\n")
            fh.write(f"SPACING {_fmt(mesh.dx[0])} {_fmt(mesh.dy[0])} 1\n")
        else:
            fh.write("DATASET RECTILINEAR_GRID\n")
            fh.write(f"DIMENSIONS {mesh.nx + 1} {mesh.ny + 1} 1\n")
            fh.write(f"X_COORDINATES {mesh.nx + 1} double\n")
            fh.write(" ".join(_fmt(v) for v in mesh.x_faces) + "\n")
            fh.write(f"Y_COORDINATES {mesh.ny + 1} double\n")
            fh.write(" ".join(_fmt(v) for v in mesh.y_faces) + "\n")
            fh.write("Z_COORDINATES 1 double\n0\n")
        fh.write(f"CELL_DATA {mesh.nx * mesh.ny}\n")
        _vtk_cell_scalars(fh, "h", h, mesh.active)
        _vtk_cell_scalars(fh, "z", z_values, mesh.active)
        _vtk_cell_scalars(fh, "surface", h + z_values, mesh.active)
        fh.write("SCALARS active int 1\nLOOKUP_TABLE default\n")
        np.savetxt(fh, mesh.active.T.reshape(-1, 1).astype(int), fmt="%d")
        fh.write("VECTORS velocity double\n")
        vel = np.zeros((mesh.nx * mesh.ny, 3))
        vel[:, 0] = np.where(mesh.active, u1c, np.nan).T.ravel()
        vel[:, 1] = np.where(mesh.active, u2c, np.nan).T.ravel()
        np.savetxt(fh, vel, fmt=_FMT)
    return path


# -- diagnostics time series ----------------------------------------------

DIAGNOSTIC_COLUMNS = [
    "t",
    "mass",
    "E_k_total",
    "E_p_total",
    "ghz_total",
    "entropy_total",
    "min_h",
    "max_h",
    "max_u",
    "min_kinetic_residual",
    "min_potential_gap",
    "cfl_mass_margin",
    "cfl_momentum_margin",
    "bv_increment",
]


def diagnostics_row(report: BalanceReport) -> list[float]:
    return [
        report.t,
        report.mass,
        report.ek_total,
        report.ep_total,
        report.ghz_total,
        report.entropy_total,
        report.h_min,
        report.estimates.h_max,
        report.estimates.u_max,
        report.min_kinetic_residual,
        report.min_potential_gap,
        report.cfl_mass_margin,
        report.cfl_momentum_margin,
        report.estimates.bv_increment,
    ]


def initial_diagnostics_row(mesh: MacMesh, state: State, params: SchemeParams) -> list[float]:
    """The t = 0 row: energies of the initial state, zero residual columns."""
    g = params.g
    act = mesh.active
    area = mesh.area
    h = state.h.values
    ek = cell_kinetic_energy(mesh, state)
    ep = 0.5 * g * h * h
    ghz = g * h * params.z.values
    est = monitor_estimates(mesh, state, None, params.eps_dry or 0.0)
    return [
        state.t,
        float((area * h)[act].sum()),
        float((area * ek)[act].sum()),
        float((area * ep)[act].sum()),
        float((area * ghz)[act].sum()),
        float((area * (ek + ep + ghz))[act].sum()),
        float(h[act].min()),
        est.h_max,
        est.u_max,
        0.0,
        0.0,
        np.inf,
        np.inf,
        0.0,
    ]


class DiagnosticsWriter:
    """Appends fixed-column CSV rows; writes the header exactly once."""

    def __init__(self, path: str):
        self.path = path

    def write_row(self, values: list[float]) -> None:
        if len(values) != len(DIAGNOSTIC_COLUMNS):
            raise ValueError(
                f"expected {len(DIAGNOSTIC_COLUMNS)} values, got {len(values)}"
            )
        need_header = not os.path.exists(self.path) or os.path.getsize(self.path) == 0
        with open(self.path, "a", encoding="ascii", newline="\n") as fh:
            if need_header:
                fh.write(",".join(DIAGNOSTIC_COLUMNS) + "\n")
            fh.write(",".join(_fmt(v) for v in values) + "\n")


def write_diagnostics_row(report: BalanceReport, path: str) -> None:
    """Append one report to the diagnostics CSV at ``path``."""
    DiagnosticsWriter(path).write_row(diagnostics_row(report))
