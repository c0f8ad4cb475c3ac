"""Staggered rectangular (MAC) mesh over a union-of-rectangles domain.

The mesh is stored as a structured (i, j) grid with a boolean ``active``
mask; obstacles are inactive cells.  Array-axis 0 is the x direction.
Conventions used throughout the package:

* cells:            shape (nx, ny); cell (i, j) spans
                    ``[x_faces[i], x_faces[i+1]] x [y_faces[j], y_faces[j+1]]``
* x-normal edges:   shape (nx+1, ny); edge (i, j) sits at ``x = x_faces[i]``
                    and carries the first velocity component
* y-normal edges:   shape (nx, ny+1); edge (i, j) sits at ``y = y_faces[j]``
                    and carries the second velocity component

An edge is *interior* when both adjacent cells exist and are active,
*exterior* when exactly one does (domain boundary or obstacle wall), and
absent otherwise.  Each edge owns a dual (momentum) control volume made of
the half cells on either side; for a rectangle each half volume is exactly
half the cell volume.

Edge ids are tuples ``(axis, i, j)`` with axis ``"x"`` or ``"y"``; dual-edge
ids are ``(axis, kind, i, j)`` with kind ``"n"`` (normal to the velocity
axis, contained in one primal cell) or ``"t"`` (tangent to it, made of two
primal half edges).  Ids are pure index arithmetic, so runs are
bit-reproducible.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "MacMesh",
    "DualEdge",
    "build_mesh",
    "dual_edges_of",
    "regularity_metrics",
]


@dataclass(frozen=True)
class DualEdge:
    """One face of a dual (momentum) control volume.

    ``orientation`` is +1 when the positive-axis direction points out of the
    dual cell the query was made from, -1 otherwise.  ``primal_edges`` are
    the one or two primal edges whose mass fluxes enter the dual flux:
    kind "n" averages the fluxes of the two edges bounding the host cell,
    kind "t" takes the halves of the two transverse edges.
    """

    id: tuple
    kind: str  # "n" | "t"
    orientation: int
    primal_edges: tuple


@dataclass
class MacMesh:
    """Geometry and connectivity of the staggered grid (immutable)."""

    x_faces: np.ndarray  # (nx+1,), strictly increasing
    y_faces: np.ndarray  # (ny+1,)
    active: np.ndarray  # (nx, ny) bool

    # derived geometry, filled by build_mesh
    dx: np.ndarray = field(init=False)  # (nx,)
    dy: np.ndarray = field(init=False)  # (ny,)
    xc: np.ndarray = field(init=False)  # (nx,) cell centers
    yc: np.ndarray = field(init=False)
    area: np.ndarray = field(init=False)  # (nx, ny) cell volumes |K|
    interior_x: np.ndarray = field(init=False)  # (nx+1, ny) bool
    exterior_x: np.ndarray = field(init=False)
    interior_y: np.ndarray = field(init=False)  # (nx, ny+1) bool
    exterior_y: np.ndarray = field(init=False)
    len_x: np.ndarray = field(init=False)  # (nx+1, ny) edge measures |sigma|
    len_y: np.ndarray = field(init=False)  # (nx, ny+1)
    dvol_x: np.ndarray = field(init=False)  # (nx+1, ny) dual volumes |D_sigma|
    dvol_y: np.ndarray = field(init=False)
    halfvol_lo_x: np.ndarray = field(init=False)  # |D_{K,sigma}| of the low-index cell
    halfvol_hi_x: np.ndarray = field(init=False)
    halfvol_lo_y: np.ndarray = field(init=False)
    halfvol_hi_y: np.ndarray = field(init=False)

    def __post_init__(self):
        x_faces = np.asarray(self.x_faces, dtype=float)
        y_faces = np.asarray(self.y_faces, dtype=float)
        if x_faces.ndim != 1 or y_faces.ndim != 1:
            raise ValueError("face coordinate arrays must be one-dimensional")
        if np.any(np.diff(x_faces) <= 0) or np.any(np.diff(y_faces) <= 0):
            raise ValueError("face coordinates must be strictly increasing")
        nx, ny = x_faces.size - 1, y_faces.size - 1
        active = np.asarray(self.active, dtype=bool)
        if active.shape != (nx, ny):
            raise ValueError(f"active mask must have shape {(nx, ny)}, got {active.shape}")
        if not active.any():
            raise ValueError("mesh has no active cells")
        self.x_faces, self.y_faces, self.active = x_faces, y_faces, active

        self.dx = np.diff(x_faces)
        self.dy = np.diff(y_faces)
        self.xc = 0.5 * (x_faces[:-1] + x_faces[1:])
        self.yc = 0.5 * (y_faces[:-1] + y_faces[1:])
        self.area = np.outer(self.dx, self.dy)

        # activity of the padded neighborhood: cells outside the bounding box
        # count as inactive, so obstacle walls and the outer boundary are
        # classified by one rule.
        act_px = np.pad(active, ((1, 1), (0, 0)))
        act_py = np.pad(active, ((0, 0), (1, 1)))
        self.interior_x = act_px[:-1, :] & act_px[1:, :]
        self.exterior_x = act_px[:-1, :] ^ act_px[1:, :]
        self.interior_y = act_py[:, :-1] & act_py[:, 1:]
        self.exterior_y = act_py[:, :-1] ^ act_py[:, 1:]

        self.len_x = np.broadcast_to(self.dy[None, :], (nx + 1, ny)).copy()
        self.len_y = np.broadcast_to(self.dx[:, None], (nx, ny + 1)).copy()

        dxp = np.pad(self.dx, 1)
        dyp = np.pad(self.dy, 1)
        self.halfvol_lo_x = 0.5 * dxp[:-1, None] * self.dy[None, :] * act_px[:-1, :]
        self.halfvol_hi_x = 0.5 * dxp[1:, None] * self.dy[None, :] * act_px[1:, :]
        self.dvol_x = self.halfvol_lo_x + self.halfvol_hi_x
        self.halfvol_lo_y = 0.5 * self.dx[:, None] * dyp[None, :-1] * act_py[:, :-1]
        self.halfvol_hi_y = 0.5 * self.dx[:, None] * dyp[None, 1:] * act_py[:, 1:]
        self.dvol_y = self.halfvol_lo_y + self.halfvol_hi_y

        for arr in (
            self.x_faces, self.y_faces, self.active, self.dx, self.dy, self.xc,
            self.yc, self.area, self.interior_x, self.exterior_x, self.interior_y,
            self.exterior_y, self.len_x, self.len_y, self.dvol_x, self.dvol_y,
            self.halfvol_lo_x, self.halfvol_hi_x, self.halfvol_lo_y, self.halfvol_hi_y,
        ):
            arr.setflags(write=False)

    # -- basic queries -------------------------------------------------

    @property
    def nx(self) -> int:
        return self.x_faces.size - 1

    @property
    def ny(self) -> int:
        return self.y_faces.size - 1

    @property
    def n_active(self) -> int:
        return int(self.active.sum())

    @property
    def active_volume(self) -> float:
        return float(self.area[self.active].sum())

    def is_uniform(self, rtol: float = 1e-12) -> bool:
        return (
            np.allclose(self.dx, self.dx[0], rtol=rtol)
            and np.allclose(self.dy, self.dy[0], rtol=rtol)
        )

    def edge_is_interior(self, edge: tuple) -> bool:
        axis, i, j = edge
        return bool(self.interior_x[i, j] if axis == "x" else self.interior_y[i, j])

    def edge_is_exterior(self, edge: tuple) -> bool:
        axis, i, j = edge
        return bool(self.exterior_x[i, j] if axis == "x" else self.exterior_y[i, j])

    def edges_of_cell(self, i: int, j: int) -> list:
        """The four edges of cell (i, j): left, right, bottom, top."""
        return [("x", i, j), ("x", i + 1, j), ("y", i, j), ("y", i, j + 1)]

    def outward_sign(self, cell: tuple, edge: tuple) -> int:
        """Sign s such that s * (positive-axis flux through edge) points out of cell.

        Equivalently ``n_{K,sigma} . e_axis``; opposite cells of one edge get
        opposite signs.
        """
        i, j = cell
        axis, ei, ej = edge
        if axis == "x":
            if (ei, ej) == (i, j):
                return -1
            if (ei, ej) == (i + 1, j):
                return 1
        else:
            if (ei, ej) == (i, j):
                return -1
            if (ei, ej) == (i, j + 1):
                return 1
        raise ValueError(f"edge {edge} is not a face of cell {cell}")


def build_mesh(
    bounds: tuple,
    nx: int | None = None,
    ny: int | None = None,
    x_faces=None,
    y_faces=None,
    obstacles=(),
    snap: bool = True,
) -> MacMesh:
    """Build a MAC mesh on ``bounds = (x0, x1, y0, y1)`` minus obstacle boxes.

    Resolution is either uniform cell counts ``nx`` (and optionally ``ny``,
    defaulting to ``nx``) or explicit strictly increasing face coordinate
    arrays.  Obstacles are axis-aligned boxes ``(ox0, ox1, oy0, oy1)`` whose
    cells become inactive; their sides must lie on grid faces.  With
    ``snap=True`` misaligned obstacle sides are moved to the nearest face
    (with a warning), otherwise they raise.
    """
    x0, x1, y0, y1 = map(float, bounds)
    if x_faces is None:
        if nx is None:
            raise ValueError("give either nx or x_faces")
        x_faces = np.linspace(x0, x1, int(nx) + 1)
    if y_faces is None:
        y_faces = np.linspace(y0, y1, int(ny) + 1 if ny is not None else int(nx) + 1)
    x_faces = np.asarray(x_faces, dtype=float)
    y_faces = np.asarray(y_faces, dtype=float)

    active = np.ones((x_faces.size - 1, y_faces.size - 1), dtype=bool)
    for box in obstacles:
        ox0, ox1, oy0, oy1 = map(float, box)
        i0 = _locate_face(x_faces, ox0, snap, "obstacle")
        i1 = _locate_face(x_faces, ox1, snap, "obstacle")
        j0 = _locate_face(y_faces, oy0, snap, "obstacle")
        j1 = _locate_face(y_faces, oy1, snap, "obstacle")
        if i1 <= i0 or j1 <= j0:
            raise ValueError(f"obstacle {box} collapses to zero cells on this grid")
        active[i0:i1, j0:j1] = False

    return MacMesh(x_faces=x_faces, y_faces=y_faces, active=active)


def _locate_face(faces: np.ndarray, coord: float, snap: bool, what: str) -> int:
    idx = int(np.argmin(np.abs(faces - coord)))
    gap = abs(float(faces[idx]) - coord)
    tol = 1e-9 * max(1.0, abs(float(faces[-1] - faces[0])))
    if gap > tol:
        if not snap:
            raise ValueError(
                f"{what} coordinate {coord} does not lie on a grid face (nearest: {faces[idx]})"
            )
        warnings.warn(
            f"{what} coordinate {coord} snapped to grid face {faces[idx]}",
            stacklevel=3,
        )
    return idx


def dual_edges_of(mesh: MacMesh, edge: tuple) -> list[DualEdge]:
    """The faces of the dual control volume of an interior edge.

    Away from boundaries there are exactly four: two of kind "n"
    (perpendicular to the velocity axis, each inside one of the two cells
    sharing the edge) and two of kind "t" (parallel to it, each made of two
    primal half edges).  Near a wall the "t" constituents may be exterior
    primal edges, which carry zero flux.
    """
    axis, i, j = edge
    if not mesh.edge_is_interior(edge):
        raise ValueError(f"edge {edge} is not interior; it has no momentum control volume")
    if axis == "x":
        return [
            DualEdge(("x", "n", i, j), "n", +1, (("x", i, j), ("x", i + 1, j))),
            DualEdge(("x", "n", i - 1, j), "n", -1, (("x", i - 1, j), ("x", i, j))),
            DualEdge(("x", "t", i, j + 1), "t", +1, (("y", i - 1, j + 1), ("y", i, j + 1))),
            DualEdge(("x", "t", i, j), "t", -1, (("y", i - 1, j), ("y", i, j))),
        ]
    return [
        DualEdge(("y", "n", i, j), "n", +1, (("y", i, j), ("y", i, j + 1))),
        DualEdge(("y", "n", i, j - 1), "n", -1, (("y", i, j - 1), ("y", i, j))),
        DualEdge(("y", "t", i + 1, j), "t", +1, (("x", i + 1, j - 1), ("x", i + 1, j))),
        DualEdge(("y", "t", i, j), "t", -1, (("x", i, j - 1), ("x", i, j))),
    ]


def regularity_metrics(mesh: MacMesh) -> tuple[float, float]:
    """(max active-cell diameter, max edge-length ratio across directions)."""
    diam = np.sqrt(mesh.dx[:, None] ** 2 + mesh.dy[None, :] ** 2)
    delta = float(diam[mesh.active].max())

    present_x = mesh.interior_x | mesh.exterior_x  # |sigma| = dy[j]
    present_y = mesh.interior_y | mesh.exterior_y  # |sigma| = dx[i]
    dy_used = mesh.len_x[present_x]
    dx_used = mesh.len_y[present_y]
    eta = max(dy_used.max() / dx_used.min(), dx_used.max() / dy_used.min())
    return delta, float(eta)
