import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from macswe.cases import random_state
from macswe.fields import ScalarField, VelocityField
from macswe.mesh import build_mesh, dual_edges_of
from macswe.operators import (
    check_dual_mass_balance,
    convection,
    divergence_primal,
    dual_divergence,
    dual_fluxes,
    dual_heights,
    gradient_edges,
    interp_centered,
    primal_mass_fluxes,
)
from macswe.scheme import SchemeParams, State, cfl_mass, mass_step, pressure_update


def two_cell_mesh():
    return build_mesh((0.0, 2.0, 0.0, 1.0), x_faces=[0.0, 1.0, 2.0], y_faces=[0.0, 1.0])


def make_fluxes(mesh, h, u):
    return dual_fluxes(mesh, primal_mass_fluxes(mesh, h, u), u)


# -- primal fluxes -------------------------------------------------------


def test_upwind_flux_direct():
    m = two_cell_mesh()
    h = ScalarField(np.array([[2.0], [1.0]]))
    u = VelocityField.zeros(m)
    u.u1[1, 0] = 0.5
    fx = primal_mass_fluxes(m, h, u)
    assert fx.h1up[1, 0] == 2.0 and fx.f1[1, 0] == 1.0


def test_upwind_flux_reversed():
    m = two_cell_mesh()
    h = ScalarField(np.array([[2.0], [1.0]]))
    u = VelocityField.zeros(m)
    u.u1[1, 0] = -0.5
    fx = primal_mass_fluxes(m, h, u)
    assert fx.h1up[1, 0] == 1.0 and fx.f1[1, 0] == -0.5


def test_zero_velocity_zero_flux(graded_mesh, rng):
    h, _ = random_state(graded_mesh, rng)
    fx = primal_mass_fluxes(graded_mesh, h, VelocityField.zeros(graded_mesh))
    assert np.all(fx.f1 == 0.0) and np.all(fx.f2 == 0.0)


def test_negative_height_rejected(unit_mesh8):
    h = ScalarField.full(unit_mesh8, -1.0)
    with pytest.raises(ValueError, match="negative water height"):
        primal_mass_fluxes(unit_mesh8, h, VelocityField.zeros(unit_mesh8))


def test_upwind_monotone_choice(graded_mesh, rng):
    # face heights always come from one of the two adjacent cells
    h, u = random_state(graded_mesh, rng, h_range=(0.1, 3.0))
    fx = primal_mass_fluxes(graded_mesh, h, u)
    hp = np.pad(h.values, ((1, 1), (0, 0)))
    m = graded_mesh.interior_x
    assert np.all(
        (fx.h1up[m] == hp[:-1, :][m]) | (fx.h1up[m] == hp[1:, :][m])
    )


def test_flux_antisymmetry_exact(graded_mesh, rng):
    h, u = random_state(graded_mesh, rng, h_range=(0.1, 2.0))
    fx = make_fluxes(graded_mesh, h, u)
    m = graded_mesh
    for i, j in zip(*np.nonzero(m.interior_x)):
        e = ("x", int(i), int(j))
        assert fx.primal_flux(m, (i - 1, j), e) == -fx.primal_flux(m, (i, j), e)
    for i, j in zip(*np.nonzero(m.interior_y)):
        e = ("y", int(i), int(j))
        assert fx.primal_flux(m, (i, j - 1), e) == -fx.primal_flux(m, (i, j), e)


# -- divergence -----------------------------------------------------------


def test_divergence_two_cell():
    m = two_cell_mesh()
    h = ScalarField(np.array([[2.0], [1.0]]))
    u = VelocityField.zeros(m)
    u.u1[1, 0] = 1.0
    div = divergence_primal(m, primal_mass_fluxes(m, h, u))
    assert div.values[0, 0] == 2.0 and div.values[1, 0] == -2.0


def test_divergence_total_is_zero(graded_mesh, rng):
    # walls carry no flux, so the volume-weighted divergence telescopes away
    h, u = random_state(graded_mesh, rng, h_range=(0.0, 2.0))
    div = divergence_primal(graded_mesh, primal_mass_fluxes(graded_mesh, h, u))
    total = (graded_mesh.area * div.values).sum()
    scale = np.abs(graded_mesh.area * div.values).sum() or 1.0
    assert abs(total) <= 1e-13 * scale


def test_divergence_uniform_flow_interior():
    m = build_mesh((0.0, 1.0, 0.0, 1.0), nx=6)
    h = ScalarField.full(m, 1.0)
    u = VelocityField.zeros(m)
    u.u1[m.interior_x] = 0.7
    div = divergence_primal(m, primal_mass_fluxes(m, h, u))
    assert np.allclose(div.values[2:-2, :], 0.0, atol=1e-14)


# -- gradient and duality ---------------------------------------------------


def test_gradient_constant_zero(graded_mesh):
    g = gradient_edges(graded_mesh, ScalarField.full(graded_mesh, 4.2))
    assert np.all(g.x == 0.0) and np.all(g.y == 0.0)


def test_gradient_unit_example():
    m = two_cell_mesh()
    q = ScalarField(np.array([[0.0], [2.0]]))
    g = gradient_edges(m, q)
    assert g.x[1, 0] == 2.0
    assert np.count_nonzero(g.x) == 1 and np.all(g.y == 0.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_div_grad_duality(seed):
    r = np.random.default_rng(seed)
    m = build_mesh((0.0, 1.0, 0.0, 1.0), nx=8)
    q = ScalarField(r.standard_normal((8, 8)))
    _, u = random_state(m, r)
    div = divergence_primal(m, primal_mass_fluxes(m, ScalarField.full(m, 1.0), u))
    grad = gradient_edges(m, q)
    a = float((m.area * q.values * div.values).sum())
    b = float((m.dvol_x * grad.x * u.u1).sum() + (m.dvol_y * grad.y * u.u2).sum())
    scale = (
        np.abs(m.area * q.values * div.values).sum()
        + np.abs(m.dvol_x * grad.x * u.u1).sum()
        + np.abs(m.dvol_y * grad.y * u.u2).sum()
    ) or 1.0
    assert abs(a + b) <= 1e-13 * scale


def test_div_grad_duality_with_obstacle(graded_mesh, rng):
    m = graded_mesh
    for _ in range(20):
        q = ScalarField(rng.standard_normal((m.nx, m.ny)) * m.active)
        _, u = random_state(m, rng)
        div = divergence_primal(m, primal_mass_fluxes(m, ScalarField.full(m, 1.0), u))
        grad = gradient_edges(m, q)
        a = float((m.area * q.values * div.values).sum())
        b = float((m.dvol_x * grad.x * u.u1).sum() + (m.dvol_y * grad.y * u.u2).sum())
        scale = (
            np.abs(m.area * q.values * div.values).sum()
            + np.abs(m.dvol_x * grad.x * u.u1).sum()
            + np.abs(m.dvol_y * grad.y * u.u2).sum()
        ) or 1.0
        assert abs(a + b) <= 1e-13 * scale


# -- dual heights ------------------------------------------------------------


def test_dual_heights_uniform_average():
    m = two_cell_mesh()
    hd = dual_heights(m, ScalarField(np.array([[2.0], [1.0]])))
    assert hd.x[1, 0] == 1.5


def test_dual_heights_constant(graded_mesh):
    hd = dual_heights(graded_mesh, ScalarField.full(graded_mesh, 0.7))
    m = graded_mesh
    assert np.allclose(hd.x[m.interior_x | m.exterior_x], 0.7)
    assert np.allclose(hd.y[m.interior_y | m.exterior_y], 0.7)


def test_dual_heights_weighted():
    # |D_K| = 1, |D_L| = 3 with h = (4, 0) averages to 1
    m = build_mesh((0.0, 8.0, 0.0, 1.0), x_faces=[0.0, 2.0, 8.0], y_faces=[0.0, 1.0])
    hd = dual_heights(m, ScalarField(np.array([[4.0], [0.0]])))
    assert m.halfvol_lo_x[1, 0] == 1.0 and m.halfvol_hi_x[1, 0] == 3.0
    assert hd.x[1, 0] == 1.0


# -- dual fluxes -------------------------------------------------------------


def test_dual_flux_first_case_value():
    # |eps|=1, h u = (2*1) and (1*-1): flux = (2 - 1)/2 = 0.5
    m = build_mesh((0.0, 3.0, 0.0, 1.0), nx=3, ny=1)
    h = ScalarField(np.array([[2.0], [1.0], [1.0]]))
    u = VelocityField.zeros(m)
    u.u1[1, 0] = 1.0
    u.u1[2, 0] = -1.0
    fx = make_fluxes(m, h, u)
    assert fx.g1n[1, 0] == 0.5


def test_dual_flux_antisymmetry_bitwise(graded_mesh, rng):
    m = graded_mesh
    h, u = random_state(m, rng, h_range=(0.1, 2.0))
    fx = make_fluxes(m, h, u)
    for axis, interior in (("x", m.interior_x), ("y", m.interior_y)):
        for i, j in zip(*np.nonzero(interior)):
            edge = (axis, int(i), int(j))
            for de in dual_edges_of(m, edge):
                neighbor = _other_owner(m, de.id, edge)
                if neighbor is not None and m.edge_is_interior(neighbor):
                    mine = fx.dual_flux(edge, de)
                    theirs = [
                        fx.dual_flux(neighbor, d)
                        for d in dual_edges_of(m, neighbor)
                        if d.id == de.id
                    ]
                    assert len(theirs) == 1 and theirs[0] == -mine


def _other_owner(mesh, dual_id, edge):
    axis, kind, i, j = dual_id
    if axis == "x":
        pair = [("x", i, j), ("x", i + 1, j)] if kind == "n" else [("x", i, j - 1), ("x", i, j)]
        hi = (mesh.nx + 1, mesh.ny)
    else:
        pair = [("y", i, j), ("y", i, j + 1)] if kind == "n" else [("y", i - 1, j), ("y", i, j)]
        hi = (mesh.nx, mesh.ny + 1)
    others = [e for e in pair if e != edge and 0 <= e[1] < hi[0] and 0 <= e[2] < hi[1]]
    return others[0] if others else None


def test_dual_mass_balance_random_step(unit_mesh8, rng):
    m = unit_mesh8
    params = SchemeParams(z=ScalarField.zeros(m), dt=1.0, t_end=1.0, eps_dry=0.0)
    for _ in range(10):
        h, u = random_state(m, rng, h_range=(0.2, 2.0))
        st_ = State(0.0, h, u, pressure_update(h, 9.81), dual_heights(m, h))
        dt = 0.5 * cfl_mass(m, st_)
        h_new, fx = mass_step(m, st_, params, dt)
        res = check_dual_mass_balance(m, st_.h_dual, dual_heights(m, h_new), fx, dt)
        scale = max(float((m.dvol_x * h.values.max() / dt).max()),
                    float((m.dvol_y * h.values.max() / dt).max()))
        assert np.abs(res.x).max() <= 1e-11 * scale
        assert np.abs(res.y).max() <= 1e-11 * scale


def test_dual_mass_balance_oracle_two_cells_sum(graded_mesh, rng):
    # independent oracle: the dual-cell net outflow must equal half the sum
    # of the two adjacent primal net outflows
    m = graded_mesh
    h, u = random_state(m, rng, h_range=(0.2, 2.0))
    fx = make_fluxes(m, h, u)
    dd = dual_divergence(fx)
    primal_net = (
        fx.f1[1:, :] - fx.f1[:-1, :] + fx.f2[:, 1:] - fx.f2[:, :-1]
    )
    netp = np.pad(primal_net, ((1, 1), (0, 0)))
    expect = 0.5 * (netp[:-1, :] + netp[1:, :])
    sel = m.interior_x | m.exterior_x
    assert np.allclose(dd.x[sel], expect[sel], atol=1e-12 * max(1.0, np.abs(expect).max()))


def test_dual_mass_balance_zero_velocity(unit_mesh8):
    m = unit_mesh8
    h = ScalarField.full(m, 1.3)
    u = VelocityField.zeros(m)
    fx = make_fluxes(m, h, u)
    hd = dual_heights(m, h)
    res = check_dual_mass_balance(m, hd, hd, fx, 0.1)
    assert np.all(res.x == 0.0) and np.all(res.y == 0.0)


# -- convection ---------------------------------------------------------------


def test_convection_constant_everything(unit_mesh8):
    h = ScalarField.full(unit_mesh8, 1.0)
    u = VelocityField.zeros(unit_mesh8)
    c = convection(unit_mesh8, make_fluxes(unit_mesh8, h, u), u)
    assert np.all(c.x == 0.0) and np.all(c.y == 0.0)


def test_convection_single_dual_flux_upwind():
    # craft a flux set with exactly one nonzero dual flux and check the
    # upwind donor on both signs
    m = build_mesh((0.0, 3.0, 0.0, 1.0), nx=3, ny=1)
    h = ScalarField.full(m, 1.0)
    u = VelocityField.zeros(m)
    u.u1[1, 0] = 3.0
    fx = make_fluxes(m, h, u)
    fx.g1n[:] = 0.0
    fx.g1t[:] = 0.0
    fx.g1n[1, 0] = 1.0  # outflow from dual cell of edge (1,0) toward (2,0)
    fx.u1n[1, 0] = u.u1[1, 0]  # upwind donor: edge (1,0)
    c = convection(m, fx, u)
    assert c.x[1, 0] == pytest.approx(3.0 / m.dvol_x[1, 0])
    assert c.x[2, 0] == pytest.approx(-3.0 / m.dvol_x[2, 0])

    fx.g1n[1, 0] = -1.0  # inflow into dual cell (1,0): donor is edge (2,0)
    u.u1[2, 0] = 5.0
    u.u1[1, 0] = 0.0
    fx.u1n[1, 0] = u.u1[2, 0]
    c = convection(m, fx, u)
    assert c.x[1, 0] == pytest.approx(-5.0 / m.dvol_x[1, 0])


def test_convection_matches_loop_oracle(graded_mesh, rng):
    # independent slow reimplementation with explicit loops and dual_edges_of
    m = graded_mesh
    h, u = random_state(m, rng, h_range=(0.1, 2.0))
    fx = make_fluxes(m, h, u)
    c = convection(m, fx, u)

    def uval(edge):
        axis, i, j = edge
        arr = u.u1 if axis == "x" else u.u2
        if 0 <= i < arr.shape[0] and 0 <= j < arr.shape[1]:
            return arr[i, j]
        return 0.0

    for axis, interior in (("x", m.interior_x), ("y", m.interior_y)):
        for i, j in zip(*np.nonzero(interior)):
            edge = (axis, int(i), int(j))
            total = 0.0
            for de in dual_edges_of(m, edge):
                f = fx.dual_flux(edge, de)
                neighbor = _other_owner(m, de.id, edge)
                donor = edge if f >= 0.0 else neighbor
                total += f * (uval(donor) if donor is not None else 0.0)
            vol = m.dvol_x[i, j] if axis == "x" else m.dvol_y[i, j]
            got = c.x[i, j] if axis == "x" else c.y[i, j]
            assert got == pytest.approx(total / vol, rel=1e-12, abs=1e-13)


# -- centered interpolation ---------------------------------------------------


def test_interp_centered_values():
    m = two_cell_mesh()
    hc = interp_centered(m, ScalarField(np.array([[2.0], [1.0]])))
    assert hc.x[1, 0] == 1.5
    assert hc.x[0, 0] == 2.0 and hc.x[2, 0] == 1.0  # exterior edges: own cell


def test_interp_centered_constant(graded_mesh):
    hc = interp_centered(graded_mesh, ScalarField.full(graded_mesh, 7.0))
    m = graded_mesh
    assert np.allclose(hc.x[m.interior_x | m.exterior_x], 7.0)
    assert np.allclose(hc.y[m.interior_y | m.exterior_y], 7.0)


def test_interp_centered_obstacle_wall():
    m = build_mesh((0.0, 4.0, 0.0, 4.0), nx=4, obstacles=((1.0, 2.0, 1.0, 2.0),))
    h = ScalarField.full(m, 7.0)
    hc = interp_centered(m, h)
    # edge between active (0,1) and obstacle (1,1): exterior, takes h of (0,1)
    assert m.exterior_x[1, 1]
    assert hc.x[1, 1] == 7.0
