"""Discrete kinetic, potential and entropy balances, evaluated as residuals
of the identities the scheme satisfies, plus the runtime estimates that the
consistency theory assumes (monitored, never enforced).

Sign convention: every residual is minus the left-hand side of its balance
identity, so the lemmas read "residual >= 0" (kinetic, under the momentum
CFL bound) or "residual >= lower bound" (potential).  The entropy residual
of the full balance has no sign at finite resolution and is only reported.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .fields import EdgeData, ScalarField
from .mesh import MacMesh
from .operators import FluxSet, gradient_edges, interp_centered
from .scheme import SchemeParams, State, cfl_mass, cfl_momentum

__all__ = [
    "BalanceReport",
    "EntropyBalance",
    "kinetic_balance_residual",
    "potential_balance_residual",
    "cell_kinetic_energy",
    "kinetic_flux",
    "sum_kinetic_fluxes",
    "entropy_balance_residual",
    "monitor_estimates",
    "compute_report",
]


def _pad_x(a):
    return np.pad(a, ((1, 1), (0, 0)))


def _pad_y(a):
    return np.pad(a, ((0, 0), (1, 1)))


def kinetic_balance_residual(
    mesh: MacMesh,
    state_old: State,
    state_new: State,
    flux: FluxSet,
    params: SchemeParams,
    dt: float,
) -> EdgeData:
    """Residual of the kinetic energy balance per dual cell.

    Minus [ time increment of h_D u^2 / 2, upwind kinetic flux, new-time
    pressure work, new-time topography work ].  Nonnegative on every dual
    cell whose update divided by the water height, provided dt satisfies the
    momentum CFL bound.
    """
    grad_p = gradient_edges(mesh, state_new.p)
    grad_z = gradient_edges(mesh, params.z)
    hc = interp_centered(mesh, state_new.h)
    g = params.g

    k1p = _pad_x(flux.g1n * flux.u1n**2)
    k2p = _pad_y(flux.g2n * flux.u2n**2)
    k1t = flux.g1t * flux.u1t**2
    k2t = flux.g2t * flux.u2t**2
    net_x = k1p[1:, :] - k1p[:-1, :] + k1t[:, 1:] - k1t[:, :-1]
    net_y = k2p[:, 1:] - k2p[:, :-1] + k2t[1:, :] - k2t[:-1, :]

    out = []
    for uo, un, hdo, hdn, net, vol, gp, gz, h_c in (
        (state_old.u.u1, state_new.u.u1, state_old.h_dual.x, state_new.h_dual.x,
         net_x, mesh.dvol_x, grad_p.x, grad_z.x, hc.x),
        (state_old.u.u2, state_new.u.u2, state_old.h_dual.y, state_new.h_dual.y,
         net_y, mesh.dvol_y, grad_p.y, grad_z.y, hc.y),
    ):
        r = np.zeros_like(net)
        present = vol > 0
        time_term = (hdn * un**2 - hdo * uo**2) / (2.0 * dt)
        np.divide(net, 2.0 * vol, out=r, where=present)
        r += time_term + un * gp + g * h_c * un * gz
        r *= -1.0
        r[~present] = 0.0
        out.append(r)
    return EdgeData(*out)


def potential_balance_residual(
    mesh: MacMesh,
    state_old: State,
    state_new: State,
    flux: FluxSet,
    params: SchemeParams,
    dt: float,
):
    """Residual and lower bound of the elastic potential balance per cell.

    The face potential energy is upwinded consistently with the mass flux,
    (E_p)_sigma = g h_sigma^2 / 2, which closes the bookkeeping exactly; the
    bound (g/|K|) sum F_{K,sigma} (h^{n+1}-h^n) may be negative.
    """
    g = params.g
    ho, hn = state_old.h.values, state_new.h.values
    ep_o = 0.5 * g * ho * ho
    ep_n = 0.5 * g * hn * hn

    ef1 = 0.5 * g * flux.h1up * flux.f1
    ef2 = 0.5 * g * flux.h2up * flux.f2
    div_ep = (ef1[1:, :] - ef1[:-1, :] + ef2[:, 1:] - ef2[:, :-1]) / mesh.area

    u1, u2 = state_old.u.u1, state_old.u.u2
    div_u = (
        mesh.len_x[1:, :] * u1[1:, :] - mesh.len_x[:-1, :] * u1[:-1, :]
        + mesh.len_y[:, 1:] * u2[:, 1:] - mesh.len_y[:, :-1] * u2[:, :-1]
    ) / mesh.area

    res = -((ep_n - ep_o) / dt + div_ep + state_old.p.values * div_u)
    net = flux.f1[1:, :] - flux.f1[:-1, :] + flux.f2[:, 1:] - flux.f2[:, :-1]
    bound = g * (hn - ho) * net / mesh.area
    res[~mesh.active] = 0.0
    bound[~mesh.active] = 0.0
    return res, bound


def cell_kinetic_energy(mesh: MacMesh, state: State) -> np.ndarray:
    """Kinetic energy density per cell: quarter-weighted dual-cell energies."""
    c1 = mesh.dvol_x * state.h_dual.x * state.u.u1**2
    c2 = mesh.dvol_y * state.h_dual.y * state.u.u2**2
    ek = (c1[:-1, :] + c1[1:, :] + c2[:, :-1] + c2[:, 1:]) / (4.0 * mesh.area)
    ek[~mesh.active] = 0.0
    return ek


def _kinetic_flux_arrays(flux: FluxSet):
    k1n = flux.g1n * flux.u1n**2
    k1t = flux.g1t * flux.u1t**2
    k2n = flux.g2n * flux.u2n**2
    k2t = flux.g2t * flux.u2t**2
    return k1n, k1t, k2n, k2t


def kinetic_flux(mesh: MacMesh, flux: FluxSet, cell: tuple, edge: tuple) -> float:
    """Kinetic energy flux G_{K,sigma} through one face of one cell.

    Averages the upwind kinetic dual fluxes of the four dual edges attached
    to the face: the two parallel to it inside the adjacent cells, and the
    two transverse ones whose halves compose it.  Conservative across the
    face by construction.
    """
    a, b = cell
    axis, i, j = edge
    sign = mesh.outward_sign(cell, edge)  # validates adjacency
    k1n, k1t, k2n, k2t = _kinetic_flux_arrays(flux)
    k1n_p, k2n_p = _pad_x(k1n), _pad_y(k2n)
    if axis == "x":
        # face at x_faces[i]; its flanking "n" dual edges live in cells i-1, i
        val = (k1n_p[i, j] + k1n_p[i + 1, j] + k2t[i, j] + k2t[i, j + 1])
    else:
        val = (k2n_p[i, j] + k2n_p[i, j + 1] + k1t[i, j] + k1t[i + 1, j])
    return sign * 0.25 * float(val)


def sum_kinetic_fluxes(mesh: MacMesh, flux: FluxSet) -> np.ndarray:
    """sum_{sigma in E(K)} G_{K,sigma} per cell, vectorized regrouping."""
    k1n, k1t, k2n, k2t = _kinetic_flux_arrays(flux)
    k1n_p, k2n_p = _pad_x(k1n), _pad_y(k2n)
    return 0.25 * (
        k1n_p[2:, :] - k1n_p[:-2, :]
        + k1t[:-1, 1:] + k1t[1:, 1:] - k1t[:-1, :-1] - k1t[1:, :-1]
        + k2n_p[:, 2:] - k2n_p[:, :-2]
        + k2t[1:, :-1] + k2t[1:, 1:] - k2t[:-1, :-1] - k2t[:-1, 1:]
    )


class EntropyBalance(NamedTuple):
    """Entropy residual per cell plus two reassemblies of it.

    ``comparison`` rebuilds the residual from the kinetic and potential
    residuals and the exact topography/pressure rearrangement; it matches
    ``residual`` to round-off and is the internal consistency check.
    ``comparison_half_pressure`` is the variant with the pressure
    rearrangement halved (the form the balance is usually quoted in as a
    lower bound); both are reported, neither sign is asserted.
    """

    residual: np.ndarray
    comparison: np.ndarray
    comparison_half_pressure: np.ndarray


def entropy_balance_residual(
    mesh: MacMesh,
    state_old: State,
    state_new: State,
    flux: FluxSet,
    params: SchemeParams,
    dt: float,
) -> EntropyBalance:
    """Residual of the discrete entropy balance per cell (extensive form).

    Minus [ time increment of |K| (E_k + E_p + g h z), kinetic energy fluxes,
    upwind potential-energy fluxes, topography fluxes g F (z_K + z_L)/2, and
    the centered new-time pressure work ].  The comparison entry assembles
    the same residual from the kinetic and potential residuals plus the
    topography/pressure rearrangement terms.
    """
    g = params.g
    z = params.z.values
    area = mesh.area
    ho, hn = state_old.h.values, state_new.h.values

    ek_o = cell_kinetic_energy(mesh, state_old)
    ek_n = cell_kinetic_energy(mesh, state_new)
    etot_o = ek_o + 0.5 * g * ho * ho + g * ho * z
    etot_n = ek_n + 0.5 * g * hn * hn + g * hn * z
    time_term = area * (etot_n - etot_o) / dt

    sum_g = sum_kinetic_fluxes(mesh, flux)

    ef1 = 0.5 * g * flux.h1up * flux.f1
    ef2 = 0.5 * g * flux.h2up * flux.f2
    ep_net = ef1[1:, :] - ef1[:-1, :] + ef2[:, 1:] - ef2[:, :-1]

    zpx, zpy = _pad_x(z), _pad_y(z)
    zf1 = 0.5 * g * flux.f1 * (zpx[:-1, :] + zpx[1:, :])
    zf2 = 0.5 * g * flux.f2 * (zpy[:, :-1] + zpy[:, 1:])
    z_net = zf1[1:, :] - zf1[:-1, :] + zf2[:, 1:] - zf2[:, :-1]

    pn = state_new.p.values
    ppx, ppy = _pad_x(pn), _pad_y(pn)
    u1n, u2n = state_new.u.u1, state_new.u.u2
    pw1 = mesh.len_x * 0.5 * (ppx[:-1, :] + ppx[1:, :]) * u1n
    pw2 = mesh.len_y * 0.5 * (ppy[:, :-1] + ppy[:, 1:]) * u2n
    pw_net = pw1[1:, :] - pw1[:-1, :] + pw2[:, 1:] - pw2[:, :-1]

    residual = -(time_term + sum_g + ep_net + z_net + pw_net)
    residual[~mesh.active] = 0.0

    # comparison: residual collection T_K plus the rearrangement corrections
    kin = kinetic_balance_residual(mesh, state_old, state_new, flux, params, dt)
    pot_res, _ = potential_balance_residual(mesh, state_old, state_new, flux, params, dt)
    rk1 = mesh.dvol_x * kin.x
    rk2 = mesh.dvol_y * kin.y
    t_coll = 0.5 * (rk1[:-1, :] + rk1[1:, :] + rk2[:, :-1] + rk2[:, 1:]) + area * pot_res

    hpx, hpy = _pad_x(hn), _pad_y(hn)
    zd1 = zpx[1:, :] - zpx[:-1, :]
    zd2 = zpy[:, 1:] - zpy[:, :-1]
    w1 = (0.5 * flux.f1 - 0.25 * mesh.len_x * (hpx[:-1, :] + hpx[1:, :]) * u1n) * zd1
    w2 = (0.5 * flux.f2 - 0.25 * mesh.len_y * (hpy[:, :-1] + hpy[:, 1:]) * u2n) * zd2
    topo_corr = g * (w1[:-1, :] + w1[1:, :] + w2[:, :-1] + w2[:, 1:])

    u1o, u2o = state_old.u.u1, state_old.u.u2
    div_scaled_n = (
        mesh.len_x[1:, :] * u1n[1:, :] - mesh.len_x[:-1, :] * u1n[:-1, :]
        + mesh.len_y[:, 1:] * u2n[:, 1:] - mesh.len_y[:, :-1] * u2n[:, :-1]
    )
    div_scaled_o = (
        mesh.len_x[1:, :] * u1o[1:, :] - mesh.len_x[:-1, :] * u1o[:-1, :]
        + mesh.len_y[:, 1:] * u2o[:, 1:] - mesh.len_y[:, :-1] * u2o[:, :-1]
    )
    press_corr = pn * div_scaled_n - state_old.p.values * div_scaled_o

    comparison = t_coll - topo_corr - press_corr
    comparison_half = t_coll + topo_corr + 0.5 * press_corr
    comparison[~mesh.active] = 0.0
    comparison_half[~mesh.active] = 0.0
    return EntropyBalance(residual=residual, comparison=comparison,
                          comparison_half_pressure=comparison_half)


class MonitoredEstimates(NamedTuple):
    h_max: float
    inv_h_max: float  # over wet cells only
    u_max: float
    bv_increment: float  # sum_K |K| |h^{n+1}_K - h^n_K|


def monitor_estimates(
    mesh: MacMesh,
    state_new: State,
    state_old: State | None = None,
    eps_dry: float = 0.0,
) -> MonitoredEstimates:
    """The uniform bounds the consistency analysis assumes, as observed values."""
    h = state_new.h.values[mesh.active]
    h_max = float(h.max()) if h.size else 0.0
    wet = h > eps_dry
    inv_h_max = float((1.0 / h[wet]).max()) if wet.any() else 0.0
    u_max = state_new.u.max_abs()
    if state_old is None:
        bv = 0.0
    else:
        diff = np.abs(state_new.h.values - state_old.h.values)
        bv = float((mesh.area * diff)[mesh.active].sum())
    return MonitoredEstimates(h_max, inv_h_max, u_max, bv)


@dataclass
class BalanceReport:
    """All per-step diagnostics of one accepted step."""

    t: float
    dt: float
    kinetic_res: EdgeData
    potential_res: np.ndarray
    potential_bound: np.ndarray
    entropy_res: np.ndarray
    entropy_comparison: np.ndarray
    ek: np.ndarray
    ep: np.ndarray
    ghz: np.ndarray
    h_min: float
    mass: float
    ek_total: float
    ep_total: float
    ghz_total: float
    entropy_total: float
    min_kinetic_residual: float
    min_potential_gap: float
    estimates: MonitoredEstimates
    cfl_mass_limit: float
    cfl_momentum_limit: float

    @property
    def cfl_mass_margin(self) -> float:
        return self.cfl_mass_limit / self.dt

    @property
    def cfl_momentum_margin(self) -> float:
        return self.cfl_momentum_limit / self.dt


def compute_report(
    mesh: MacMesh,
    state_old: State,
    state_new: State,
    flux: FluxSet,
    params: SchemeParams,
    dt: float,
) -> BalanceReport:
    """Assemble every diagnostic of one step into a report."""
    g = params.g
    kin = kinetic_balance_residual(mesh, state_old, state_new, flux, params, dt)
    pot_res, pot_bound = potential_balance_residual(
        mesh, state_old, state_new, flux, params, dt
    )
    ent = entropy_balance_residual(mesh, state_old, state_new, flux, params, dt)
    ek = cell_kinetic_energy(mesh, state_new)
    hn = state_new.h.values
    ep = 0.5 * g * hn * hn
    ghz = g * hn * params.z.values
    ep[~mesh.active] = 0.0
    ghz[~mesh.active] = 0.0

    act = mesh.active
    area = mesh.area
    present = np.concatenate(
        [kin.x[mesh.dvol_x > 0].ravel(), kin.y[mesh.dvol_y > 0].ravel()]
    )
    gap = (pot_res - pot_bound)[act]
    return BalanceReport(
        t=state_new.t,
        dt=dt,
        kinetic_res=kin,
        potential_res=pot_res,
        potential_bound=pot_bound,
        entropy_res=ent.residual,
        entropy_comparison=ent.comparison,
        ek=ek,
        ep=ep,
        ghz=ghz,
        h_min=float(hn[act].min()),
        mass=float((area * hn)[act].sum()),
        ek_total=float((area * ek)[act].sum()),
        ep_total=float((area * ep)[act].sum()),
        ghz_total=float((area * ghz)[act].sum()),
        entropy_total=float((area * (ek + ep + ghz))[act].sum()),
        min_kinetic_residual=float(present.min()) if present.size else 0.0,
        min_potential_gap=float(gap.min()) if gap.size else 0.0,
        estimates=monitor_estimates(mesh, state_new, state_old,
                                    params.eps_dry or 0.0),
        cfl_mass_limit=cfl_mass(mesh, state_old),
        cfl_momentum_limit=cfl_momentum(mesh, state_new, flux),
    )
