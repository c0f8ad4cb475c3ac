"""Decoupled explicit time stepping: upwind mass step, algebraic pressure
law, momentum step on the dual cells, CFL bounds and the run loop.

One step advances (h, u, p) in this strict order: the mass balance uses the
old height and velocity; the pressure is rebuilt from the new height; the
momentum balance uses the old-time convection fluxes and velocities but the
new-time pressure gradient and the new-time centered height in front of the
topography gradient.  That ordering is what preserves the lake-at-rest
steady state and yields the discrete energy balances.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .fields import EdgeData, ScalarField, VelocityField, project_scalar, project_velocity
from .mesh import MacMesh
from .operators import (
    FluxSet,
    convection,
    dual_fluxes,
    dual_heights,
    gradient_edges,
    interp_centered,
    primal_mass_fluxes,
)

__all__ = [
    "SchemeParams",
    "State",
    "StepContext",
    "CflViolationError",
    "NumericsError",
    "initialize",
    "mass_step",
    "pressure_update",
    "momentum_step",
    "cfl_mass",
    "cfl_momentum",
    "step",
    "run",
]

# Tiny negative heights from round-off at draining cells are clipped to
# zero; anything below this relative threshold is a genuine CFL violation.
_NEG_H_REL_TOL = 1e-12


class CflViolationError(RuntimeError):
    """Mass step produced a genuinely negative height (time step too large)."""

    def __init__(self, cell: tuple, value: float, dt: float):
        self.cell = cell
        self.value = value
        super().__init__(
            f"water height {value:.6e} < 0 in cell {cell} after a mass step with "
            f"dt={dt:.6e}; the positivity CFL bound was violated"
        )


class NumericsError(RuntimeError):
    """Non-finite value detected in the state."""


@dataclass
class SchemeParams:
    """Physical and numerical parameters of a run.

    Exactly one of ``dt`` (fixed step), ``dt_dx_ratio`` (fixed step tied to
    the smallest cell side) or ``cfl_factor`` (adaptive step) drives the run
    loop.  ``eps_dry`` is the dual-cell height below which the velocity is
    zeroed instead of divided; ``None`` resolves to 1e-10 * max(h0) at
    initialization.
    """

    z: ScalarField
    g: float = 9.81
    dt: float | None = None
    dt_dx_ratio: float | None = None
    cfl_factor: float | None = None
    t_end: float = 0.0
    eps_dry: float | None = None

    def __post_init__(self):
        if self.g <= 0:
            raise ValueError("g must be positive")
        modes = [m is not None for m in (self.dt, self.dt_dx_ratio, self.cfl_factor)]
        if sum(modes) > 1:
            raise ValueError("give at most one of dt, dt_dx_ratio, cfl_factor")
        if self.dt is not None and self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.eps_dry is not None and self.eps_dry < 0:
            raise ValueError("eps_dry must be nonnegative")


@dataclass
class State:
    """(t, h, u, p) plus the cached dual-cell heights of h."""

    t: float
    h: ScalarField
    u: VelocityField
    p: ScalarField
    h_dual: EdgeData


@dataclass
class StepContext:
    """Read-only snapshot handed to observers after every accepted step."""

    step_index: int
    dt: float
    mesh: MacMesh
    params: SchemeParams
    state_old: State
    state_new: State
    fluxes: FluxSet


def pressure_update(h: ScalarField, g: float) -> ScalarField:
    """p = g h^2 / 2, elementwise."""
    return ScalarField(0.5 * g * h.values * h.values)


def initialize(mesh: MacMesh, h0, u0, params: SchemeParams) -> State:
    """Project the initial data and build the starting state.

    ``h0`` is a callable (projected to cell means) or a ready ScalarField;
    ``u0`` likewise (dual-cell means / VelocityField), or None for rest.
    """
    h = h0.copy() if isinstance(h0, ScalarField) else project_scalar(mesh, h0)
    h.values[~mesh.active] = 0.0
    if np.any(h.values < 0):
        cell = np.unravel_index(np.argmin(h.values), h.values.shape)
        raise ValueError(f"initial height is negative in cell {tuple(cell)}")
    if u0 is None:
        u = VelocityField.zeros(mesh)
    elif isinstance(u0, VelocityField):
        u = u0.copy().enforce_boundary(mesh)
    else:
        u = project_velocity(mesh, u0)
    if params.eps_dry is None:
        params.eps_dry = 1e-10 * float(h.values.max())
    p = pressure_update(h, params.g)
    return State(t=0.0, h=h, u=u, p=p, h_dual=dual_heights(mesh, h))


def mass_step(mesh: MacMesh, state: State, params: SchemeParams, dt: float):
    """One upwind mass balance step; returns (h_new, fluxes).

    The returned FluxSet carries the dual momentum fluxes as well, for reuse
    by the momentum step and the diagnostics.
    """
    flux = dual_fluxes(mesh, primal_mass_fluxes(mesh, state.h, state.u), state.u)
    net = flux.f1[1:, :] - flux.f1[:-1, :] + flux.f2[:, 1:] - flux.f2[:, :-1]
    h_new = state.h.values - dt * net / mesh.area
    h_new[~mesh.active] = 0.0

    floor = -_NEG_H_REL_TOL * max(float(state.h.values.max()), 1e-300)
    hmin = float(h_new.min())
    if hmin < floor:
        cell = np.unravel_index(np.argmin(h_new), h_new.shape)
        raise CflViolationError(tuple(int(c) for c in cell), hmin, dt)
    np.clip(h_new, 0.0, None, out=h_new)
    if not np.isfinite(h_new).all():
        cell = np.unravel_index(int(np.argmax(~np.isfinite(h_new))), h_new.shape)
        raise NumericsError(f"non-finite height in cell {tuple(cell)}")
    return ScalarField(h_new), flux


def momentum_step(
    mesh: MacMesh,
    state: State,
    h_new: ScalarField,
    p_new: ScalarField,
    flux: FluxSet,
    params: SchemeParams,
    dt: float,
    hd_new: EdgeData | None = None,
    grad_z: EdgeData | None = None,
) -> VelocityField:
    """Explicit momentum balance on the dual cells.

    h_D^{n+1} u^{n+1} = h_D^n u^n - dt [ C(h^n u^n) u^n + grad p^{n+1}
    + g I(h^{n+1}) grad z ]; dual cells drier than eps_dry get zero velocity.
    """
    if hd_new is None:
        hd_new = dual_heights(mesh, h_new)
    if grad_z is None:
        grad_z = gradient_edges(mesh, params.z)
    conv = convection(mesh, flux, state.u)
    grad_p = gradient_edges(mesh, p_new)
    hc = interp_centered(mesh, h_new)
    g = params.g
    eps = params.eps_dry if params.eps_dry is not None else 0.0

    out = VelocityField.zeros(mesh)
    for old, new, hd_o, hd_n, c, gp, h_c, gz, wet_mask in (
        (state.u.u1, out.u1, state.h_dual.x, hd_new.x, conv.x, grad_p.x, hc.x,
         grad_z.x, mesh.interior_x),
        (state.u.u2, out.u2, state.h_dual.y, hd_new.y, conv.y, grad_p.y, hc.y,
         grad_z.y, mesh.interior_y),
    ):
        rhs = hd_o * old - dt * (c + gp + g * h_c * gz)
        wet = wet_mask & (hd_n > eps)
        np.divide(rhs, hd_n, out=new, where=wet)
        new[~wet] = 0.0
        if not np.isfinite(new).all():
            idx = np.unravel_index(int(np.argmax(~np.isfinite(new))), new.shape)
            raise NumericsError(f"non-finite velocity on edge {tuple(idx)}")
    return out


def cfl_mass(mesh: MacMesh, state: State) -> float:
    """Largest dt keeping the mass step positivity, min_K |K| / sum |sigma||u|."""
    u1a, u2a = np.abs(state.u.u1), np.abs(state.u.u2)
    denom = (
        mesh.len_x[:-1, :] * u1a[:-1, :] + mesh.len_x[1:, :] * u1a[1:, :]
        + mesh.len_y[:, :-1] * u2a[:, :-1] + mesh.len_y[:, 1:] * u2a[:, 1:]
    )
    sel = mesh.active & (denom > 0)
    if not sel.any():
        return np.inf
    return float((mesh.area[sel] / denom[sel]).min())


def cfl_momentum(mesh: MacMesh, state_new: State, flux: FluxSet) -> float:
    """Largest dt keeping the kinetic residual sign,
    min_sigma |D_sigma| h_D^{n+1} / sum (F_{sigma,eps})^-."""
    g1np = np.pad(flux.g1n, ((1, 1), (0, 0)))
    g2np = np.pad(flux.g2n, ((0, 0), (1, 1)))
    neg = lambda a: np.maximum(-a, 0.0)
    inflow_x = (neg(g1np[1:, :]) + neg(-g1np[:-1, :])
                + neg(flux.g1t[:, 1:]) + neg(-flux.g1t[:, :-1]))
    inflow_y = (neg(g2np[:, 1:]) + neg(-g2np[:, :-1])
                + neg(flux.g2t[1:, :]) + neg(-flux.g2t[:-1, :]))
    best = np.inf
    for hd, vol, inflow, mask in (
        (state_new.h_dual.x, mesh.dvol_x, inflow_x, mesh.interior_x),
        (state_new.h_dual.y, mesh.dvol_y, inflow_y, mesh.interior_y),
    ):
        sel = mask & (inflow > 0)
        if sel.any():
            best = min(best, float((vol[sel] * hd[sel] / inflow[sel]).min()))
    return best


def step(
    mesh: MacMesh,
    state: State,
    params: SchemeParams,
    dt: float,
    grad_z: EdgeData | None = None,
):
    """Advance one time level; returns (state_new, fluxes)."""
    h_new, flux = mass_step(mesh, state, params, dt)
    p_new = pressure_update(h_new, params.g)
    hd_new = dual_heights(mesh, h_new)
    u_new = momentum_step(mesh, state, h_new, p_new, flux, params, dt,
                          hd_new=hd_new, grad_z=grad_z)
    new = State(t=state.t + dt, h=h_new, u=u_new, p=p_new, h_dual=hd_new)
    return new, flux


def resolve_dt(mesh: MacMesh, params: SchemeParams) -> float | None:
    """The fixed time step implied by params, or None in adaptive mode."""
    if params.dt is not None:
        return params.dt
    if params.dt_dx_ratio is not None:
        return params.dt_dx_ratio * min(float(mesh.dx.min()), float(mesh.dy.min()))
    return None


def run(
    mesh: MacMesh,
    state0: State,
    params: SchemeParams,
    observers: Iterable[Callable[[StepContext], None]] = (),
) -> State:
    """Iterate steps until t_end.

    With a fixed step the residual fraction of a step at t_end is dropped;
    in adaptive mode dt = cfl_factor * min(mass bound, momentum bound of the
    previous step) and the last step lands on t_end exactly.
    """
    observers = tuple(observers)
    fixed_dt = resolve_dt(mesh, params)
    grad_z = gradient_edges(mesh, params.z)
    state = state0
    n = 0
    cfl_mom_prev = np.inf
    while True:
        remaining = params.t_end - state.t
        if fixed_dt is not None:
            if remaining < fixed_dt * (1.0 - 1e-9):
                break
            dt = fixed_dt
        else:
            if remaining <= params.t_end * 1e-12:
                break
            bound = min(cfl_mass(mesh, state), cfl_mom_prev)
            dt = (params.cfl_factor or 0.9) * bound
            if not np.isfinite(dt):
                dt = remaining
            dt = min(dt, remaining)
            if dt <= 0:
                raise NumericsError("adaptive time step collapsed to zero")
        state_new, flux = step(mesh, state, params, dt, grad_z=grad_z)
        if fixed_dt is None:
            cfl_mom_prev = cfl_momentum(mesh, state_new, flux)
        n += 1
        for obs in observers:
            obs(StepContext(step_index=n, dt=dt, mesh=mesh, params=params,
                            state_old=state, state_new=state_new, fluxes=flux))
        state = state_new
    return state
