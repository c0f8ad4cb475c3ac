import numpy as np
import pytest

from macswe.cases import lake_at_rest_data, paraboloid_topography, random_state
from macswe.fields import ScalarField, VelocityField
from macswe.mesh import build_mesh
from macswe.operators import dual_heights
from macswe.scheme import (
    CflViolationError,
    SchemeParams,
    State,
    cfl_mass,
    cfl_momentum,
    initialize,
    mass_step,
    momentum_step,
    pressure_update,
    run,
    step,
)


def flat_params(mesh, **kw):
    kw.setdefault("z", ScalarField.zeros(mesh))
    kw.setdefault("eps_dry", 0.0)
    kw.setdefault("dt", 1.0)
    kw.setdefault("t_end", 1.0)
    return SchemeParams(**kw)


def make_state(mesh, h, u, g=9.81):
    return State(0.0, h, u, pressure_update(h, g), dual_heights(mesh, h))


# -- initialization -------------------------------------------------------


def test_initialize_constant(unit_mesh8):
    params = flat_params(unit_mesh8, g=9.81)
    s = initialize(unit_mesh8, lambda x, y: 1.0 + 0.0 * x, None, params)
    assert np.allclose(s.h.values[unit_mesh8.active], 1.0)
    assert np.allclose(s.p.values[unit_mesh8.active], 0.5 * 9.81)
    assert s.u.max_abs() == 0.0
    assert np.allclose(s.h_dual.x[unit_mesh8.interior_x], 1.0)


def test_initialize_negative_rejected(unit_mesh8):
    with pytest.raises(ValueError, match="negative"):
        initialize(unit_mesh8, lambda x, y: -1.0 + 0.0 * x, None, flat_params(unit_mesh8))


def test_initialize_resolves_eps_dry(unit_mesh8):
    params = flat_params(unit_mesh8, eps_dry=None)
    initialize(unit_mesh8, lambda x, y: 2.0 + 0.0 * x, None, params)
    assert params.eps_dry == pytest.approx(2e-10)


def test_params_validation(unit_mesh8):
    with pytest.raises(ValueError, match="at most one"):
        SchemeParams(z=ScalarField.zeros(unit_mesh8), dt=0.1, cfl_factor=0.5)
    with pytest.raises(ValueError, match="positive"):
        SchemeParams(z=ScalarField.zeros(unit_mesh8), dt=-0.1)


# -- mass step --------------------------------------------------------------


def test_mass_step_rest_is_identity(unit_mesh8, rng):
    h, _ = random_state(unit_mesh8, rng)
    s = make_state(unit_mesh8, h, VelocityField.zeros(unit_mesh8))
    h_new, _ = mass_step(unit_mesh8, s, flat_params(unit_mesh8), 0.25)
    assert np.array_equal(h_new.values, h.values)


def test_mass_step_two_cell_hand_value():
    m = build_mesh((0.0, 2.0, 0.0, 1.0), x_faces=[0.0, 1.0, 2.0], y_faces=[0.0, 1.0])
    h = ScalarField(np.array([[2.0], [1.0]]))
    u = VelocityField.zeros(m)
    u.u1[1, 0] = 1.0
    h_new, _ = mass_step(m, make_state(m, h, u), flat_params(m), 0.1)
    assert h_new.values[0, 0] == pytest.approx(1.8)
    assert h_new.values[1, 0] == pytest.approx(1.2)
    assert (m.area * h_new.values).sum() == pytest.approx(3.0, abs=1e-15)


def test_mass_step_cfl_violation_names_cell():
    m = build_mesh((0.0, 2.0, 0.0, 1.0), x_faces=[0.0, 1.0, 2.0], y_faces=[0.0, 1.0])
    h = ScalarField(np.array([[2.0], [1.0]]))
    u = VelocityField.zeros(m)
    u.u1[1, 0] = 1.0
    with pytest.raises(CflViolationError) as err:
        mass_step(m, make_state(m, h, u), flat_params(m), 1.5)
    assert err.value.cell == (0, 0)
    assert "CFL" in str(err.value)


# -- pressure ---------------------------------------------------------------


@pytest.mark.parametrize("h,g,expect", [(0.0, 9.81, 0.0), (1.0, 2.0, 1.0), (10.0, 9.81, 490.5)])
def test_pressure_values(h, g, expect):
    f = pressure_update(ScalarField(np.array([[h]])), g)
    assert f.values[0, 0] == pytest.approx(expect)


# -- momentum step ------------------------------------------------------------


def test_momentum_rest_flat_stays_rest(unit_mesh8):
    params = flat_params(unit_mesh8)
    h = ScalarField.full(unit_mesh8, 1.0)
    s = make_state(unit_mesh8, h, VelocityField.zeros(unit_mesh8))
    h_new, flux = mass_step(unit_mesh8, s, params, 0.1)
    u_new = momentum_step(unit_mesh8, s, h_new, pressure_update(h_new, params.g),
                          flux, params, 0.1)
    assert u_new.max_abs() == 0.0


def test_momentum_single_edge_kick():
    # constant h=1, flat bottom, imposed pressure difference of 2 across one
    # edge of a unit grid: u = -dt * grad p / h = -0.2
    m = build_mesh((0.0, 2.0, 0.0, 1.0), x_faces=[0.0, 1.0, 2.0], y_faces=[0.0, 1.0])
    params = flat_params(m, g=9.81)
    h = ScalarField.full(m, 1.0)
    s = make_state(m, h, VelocityField.zeros(m))
    h_new, flux = mass_step(m, s, params, 0.1)
    p_new = ScalarField(np.array([[0.0], [2.0]]))
    u_new = momentum_step(m, s, h_new, p_new, flux, params, 0.1)
    assert u_new.u1[1, 0] == pytest.approx(-0.2)
    assert np.count_nonzero(u_new.u1) == 1 and np.all(u_new.u2 == 0.0)


def test_momentum_dry_cutoff():
    m = build_mesh((0.0, 2.0, 0.0, 1.0), x_faces=[0.0, 1.0, 2.0], y_faces=[0.0, 1.0])
    params = flat_params(m, eps_dry=1e-8)
    h = ScalarField(np.array([[0.0], [0.0]]))
    s = make_state(m, h, VelocityField.zeros(m))
    h_new, flux = mass_step(m, s, params, 0.1)
    p_new = ScalarField(np.array([[5.0], [0.0]]))  # huge imposed gradient
    u_new = momentum_step(m, s, h_new, p_new, flux, params, 0.1)
    assert u_new.max_abs() == 0.0  # dry dual cell: velocity zeroed, no division


def test_lake_at_rest_single_step_dyadic_exact():
    # dyadic data make every float operation exact: u stays exactly zero
    m = build_mesh((0.0, 2.0, 0.0, 1.0), x_faces=[0.0, 1.0, 2.0], y_faces=[0.0, 1.0])
    z = ScalarField(np.array([[0.25], [0.5]]))
    h = ScalarField(np.array([[0.75], [0.5]]))  # h + z = 1
    params = flat_params(m, g=2.0, z=z)
    s = make_state(m, h, VelocityField.zeros(m), g=2.0)
    new, _ = step(m, s, params, 0.125)
    assert np.array_equal(new.h.values, h.values)
    assert new.u.max_abs() == 0.0


def test_step_rest_nonconstant_h_flat_bottom(unit_mesh8):
    # no flux at rest: h frozen; velocity picks up the pressure push
    m = unit_mesh8
    params = flat_params(m)
    h = ScalarField(1.0 + 0.5 * np.cos(np.pi * m.xc)[:, None] * np.ones(m.ny)[None, :])
    s = make_state(m, h, VelocityField.zeros(m))
    new, _ = step(m, s, params, 0.01)
    assert np.array_equal(new.h.values, h.values)
    assert new.u.max_abs() > 0.0
    grad_sign = np.sign(h.values[1:, :] - h.values[:-1, :])[m.interior_x[1:-1, :]]
    pushed = np.sign(new.u.u1[1:-1, :])[m.interior_x[1:-1, :]]
    assert np.all((pushed == -grad_sign)[grad_sign != 0])


# -- CFL bounds ----------------------------------------------------------------


def test_cfl_mass_rest_is_infinite(unit_mesh8):
    s = make_state(unit_mesh8, ScalarField.full(unit_mesh8, 1.0),
                   VelocityField.zeros(unit_mesh8))
    assert cfl_mass(unit_mesh8, s) == np.inf


def test_cfl_mass_unit_cell_quarter():
    # middle cell of a 3x3 unit grid with |u| = 1 on its four edges
    m = build_mesh((0.0, 3.0, 0.0, 3.0), nx=3)
    u = VelocityField.zeros(m)
    u.u1[1, 1] = -1.0
    u.u1[2, 1] = 1.0
    u.u2[1, 1] = -1.0
    u.u2[1, 2] = 1.0
    s = make_state(m, ScalarField.full(m, 1.0), u)
    assert cfl_mass(m, s) == pytest.approx(0.25)


def test_cfl_momentum_rest_is_infinite(unit_mesh8):
    h = ScalarField.full(unit_mesh8, 1.0)
    s = make_state(unit_mesh8, h, VelocityField.zeros(unit_mesh8))
    h_new, flux = mass_step(unit_mesh8, s, flat_params(unit_mesh8), 0.1)
    assert cfl_momentum(unit_mesh8, s, flux) == np.inf


# -- positivity and conservation ------------------------------------------------


def test_positivity_under_cfl(unit_mesh8, rng):
    params = flat_params(unit_mesh8)
    for _ in range(50):
        h, u = random_state(unit_mesh8, rng, h_range=(0.0, 2.0), dry_fraction=0.25)
        s = make_state(unit_mesh8, h, u)
        dt = 0.99 * cfl_mass(unit_mesh8, s)
        if not np.isfinite(dt):
            continue
        h_new, _ = mass_step(unit_mesh8, s, params, dt)
        assert h_new.values.min() >= 0.0


def test_exact_mass_conservation_over_run(graded_mesh, rng):
    m = graded_mesh
    params = SchemeParams(z=ScalarField.zeros(m), cfl_factor=0.4, t_end=1.0, eps_dry=0.0)
    h, u = random_state(m, rng, h_range=(0.5, 2.0), u_max=0.5)
    s0 = initialize(m, h, u, params)
    m0 = (m.area * s0.h.values)[m.active].sum()
    final = run(m, s0, params)
    m1 = (m.area * final.h.values)[m.active].sum()
    assert abs(m1 - m0) <= 1e-12 * m0
    assert final.t == pytest.approx(1.0, abs=1e-12)


def test_well_balanced_100_steps():
    m = build_mesh((0.0, 4.0, 0.0, 4.0), nx=32)
    z = ScalarField.from_function(m, lambda x, y: 0.3 * np.sin(x) * np.cos(0.5 * y))
    h0, target = lake_at_rest_data(m, z, margin=0.2)
    params = SchemeParams(z=z, dt=0.005, t_end=0.5, eps_dry=0.0)
    s0 = initialize(m, h0, None, params)
    final = run(m, s0, params)
    assert final.u.max_abs() <= 1e-12
    drift = np.abs(final.h.values + z.values - target)[m.active].max()
    assert drift <= 1e-12 * target


# -- run loop ---------------------------------------------------------------------


def test_run_fixed_dt_drops_fraction(unit_mesh8):
    params = flat_params(unit_mesh8, dt=0.4, t_end=1.0)
    s0 = initialize(unit_mesh8, lambda x, y: 1.0 + 0.0 * x, None, params)
    calls = []
    final = run(unit_mesh8, s0, params, observers=[lambda ctx: calls.append(ctx.step_index)])
    assert calls == [1, 2]
    assert final.t == pytest.approx(0.8)


def test_run_dt_dx_ratio(unit_mesh8):
    params = SchemeParams(z=ScalarField.zeros(unit_mesh8), dt_dx_ratio=0.8,
                          t_end=0.3, eps_dry=0.0)
    s0 = initialize(unit_mesh8, lambda x, y: 1.0 + 0.0 * x, None, params)
    run(unit_mesh8, s0, params)  # dt = 0.8 * 1/8 = 0.1


def test_run_adaptive_lands_on_t_end(unit_mesh8, rng):
    params = SchemeParams(z=ScalarField.zeros(unit_mesh8), cfl_factor=0.5,
                          t_end=0.25, eps_dry=0.0)
    h, u = random_state(unit_mesh8, rng, h_range=(0.5, 1.5), u_max=0.5)
    s0 = initialize(unit_mesh8, h, u, params)
    final = run(unit_mesh8, s0, params)
    assert final.t == pytest.approx(0.25, rel=1e-12)


# -- axis relabeling symmetry -------------------------------------------------------


def transpose_state(mesh_t, s):
    h_t = ScalarField(s.h.values.T.copy())
    u_t = VelocityField(s.u.u2.T.copy(), s.u.u1.T.copy())
    return State(s.t, h_t, u_t, ScalarField(s.p.values.T.copy()),
                 dual_heights(mesh_t, h_t))


def test_step_axis_swap_symmetry(rng):
    m = build_mesh((0.0, 2.0, 0.0, 1.0), nx=6, ny=4)
    m_t = build_mesh((0.0, 1.0, 0.0, 2.0), nx=4, ny=6)
    z = ScalarField(rng.standard_normal((6, 4)) * 0.1)
    h, u = random_state(m, rng, h_range=(0.5, 2.0), u_max=0.5)
    s = make_state(m, h, u)
    params = flat_params(m, z=z)
    params_t = flat_params(m_t, z=ScalarField(z.values.T.copy()))
    s_t = transpose_state(m_t, s)
    dt = 0.25 * cfl_mass(m, s)
    new, _ = step(m, s, params, dt)
    new_t, _ = step(m_t, s_t, params_t, dt)
    assert np.array_equal(new.h.values, new_t.h.values.T)
    assert np.array_equal(new.u.u1, new_t.u.u2.T)
    assert np.array_equal(new.u.u2, new_t.u.u1.T)
