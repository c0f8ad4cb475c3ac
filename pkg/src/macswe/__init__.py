"""Explicit staggered (MAC) finite-volume solver for the 2D shallow water
equations with topography.

Scalars (water height, pressure, topography) live on cell centers of a
structured rectangular grid; each velocity component lives on the faces
normal to its axis.  The update is fully explicit and decoupled: upwind
mass step, algebraic pressure law, then a momentum step built on dual
(face-centered) control volumes whose mass fluxes are chosen so that a
discrete mass balance holds on the dual mesh as well.  That choice is what
makes the discrete kinetic/potential/entropy balances in
:mod:`macswe.diagnostics` close to round-off.
"""

from .mesh import MacMesh, build_mesh, dual_edges_of, regularity_metrics
from .fields import (
    ScalarField,
    VelocityField,
    EdgeData,
    project_scalar,
    project_velocity,
    l1_scalar_norm,
    l1_error,
)
from .operators import (
    FluxSet,
    primal_mass_fluxes,
    divergence_primal,
    gradient_edges,
    dual_heights,
    dual_fluxes,
    check_dual_mass_balance,
    convection,
    interp_centered,
)
from .scheme import (
    SchemeParams,
    State,
    CflViolationError,
    initialize,
    mass_step,
    pressure_update,
    momentum_step,
    cfl_mass,
    cfl_momentum,
    step,
    run,
)
from .diagnostics import (
    BalanceReport,
    kinetic_balance_residual,
    potential_balance_residual,
    cell_kinetic_energy,
    kinetic_flux,
    entropy_balance_residual,
    monitor_estimates,
    compute_report,
)
from . import cases, config, output, verify

__all__ = [
    "MacMesh",
    "build_mesh",
    "dual_edges_of",
    "regularity_metrics",
    "ScalarField",
    "VelocityField",
    "EdgeData",
    "project_scalar",
    "project_velocity",
    "l1_scalar_norm",
    "l1_error",
    "FluxSet",
    "primal_mass_fluxes",
    "divergence_primal",
    "gradient_edges",
    "dual_heights",
    "dual_fluxes",
    "check_dual_mass_balance",
    "convection",
    "interp_centered",
    "SchemeParams",
    "State",
    "CflViolationError",
    "initialize",
    "mass_step",
    "pressure_update",
    "momentum_step",
    "cfl_mass",
    "cfl_momentum",
    "step",
    "run",
    "BalanceReport",
    "kinetic_balance_residual",
    "potential_balance_residual",
    "cell_kinetic_energy",
    "kinetic_flux",
    "entropy_balance_residual",
    "monitor_estimates",
    "compute_report",
    "cases",
    "config",
    "output",
    "verify",
]

__version__ = "0.1.0"
