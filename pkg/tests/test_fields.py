import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from macswe.fields import (
    ScalarField,
    VelocityField,
    l1_error,
    l1_scalar_norm,
    project_scalar,
    project_velocity,
)
from macswe.mesh import build_mesh


def test_project_constant(graded_mesh):
    f = project_scalar(graded_mesh, lambda x, y: 3.0 + 0.0 * x)
    assert np.allclose(f.values[graded_mesh.active], 3.0)
    assert np.all(f.values[~graded_mesh.active] == 0.0)


def test_project_affine_exact():
    m = build_mesh((0.0, 1.0, 0.0, 1.0), nx=1)
    f = project_scalar(m, lambda x, y: x)
    assert f.values[0, 0] == pytest.approx(0.5, abs=1e-15)


def test_project_polynomial_degree_five_exact(graded_mesh):
    # the 3x3 tensor rule integrates bi-quintics exactly
    fn = lambda x, y: (x**5) * (y**3) + 2.0 * x * y - 7.0
    f = project_scalar(graded_mesh, fn)
    m = graded_mesh
    xf, yf = m.x_faces, m.y_faces
    ix = (xf[1:] ** 6 - xf[:-1] ** 6) / 6.0
    iy = (yf[1:] ** 4 - yf[:-1] ** 4) / 4.0
    mx = (xf[1:] ** 2 - xf[:-1] ** 2) / 2.0
    my = (yf[1:] ** 2 - yf[:-1] ** 2) / 2.0
    expect = (np.outer(ix, iy) + 2.0 * np.outer(mx, my) - 7.0 * m.area) / m.area
    assert np.allclose(f.values[m.active], expect[m.active], rtol=1e-13)


def test_project_scalar_linearity(graded_mesh, rng):
    f = lambda x, y: np.sin(x) * y
    g = lambda x, y: np.cos(y) + x**2
    a, b = 2.5, -1.25
    combo = project_scalar(graded_mesh, lambda x, y: a * f(x, y) + b * g(x, y))
    parts = a * project_scalar(graded_mesh, f).values + b * project_scalar(graded_mesh, g).values
    assert np.allclose(combo.values, parts, atol=1e-13)


def test_project_velocity_constant(graded_mesh):
    v = project_velocity(graded_mesh, lambda x, y: (1.0 + 0.0 * x, 0.0 * x))
    m = graded_mesh
    assert np.allclose(v.u1[m.interior_x], 1.0)
    assert np.all(v.u1[~m.interior_x] == 0.0)
    assert np.all(v.u2 == 0.0)


def test_project_velocity_zero(graded_mesh):
    v = project_velocity(graded_mesh, lambda x, y: (0.0 * x, 0.0 * y))
    assert np.all(v.u1 == 0.0) and np.all(v.u2 == 0.0)


def test_project_velocity_rotation_start():
    # uniform rotation field at t=0: u = (0, w/2)
    import math

    g, depth = 9.81, 0.1
    w = math.sqrt(2 * g * depth)
    m = build_mesh((0.0, 4.0, 0.0, 4.0), nx=10)
    v = project_velocity(m, lambda x, y: (0.0 * x, 0.5 * w + 0.0 * y))
    assert np.allclose(v.u2[m.interior_y], 0.5 * w)
    assert np.all(v.u1[m.interior_x] == 0.0)


def test_l1_norm_trivial(unit_mesh8):
    one = ScalarField.full(unit_mesh8, 1.0)
    zero = ScalarField.zeros(unit_mesh8)
    assert l1_scalar_norm(unit_mesh8, one) == pytest.approx(1.0)
    assert l1_error(unit_mesh8, one, one) == 0.0
    assert l1_error(unit_mesh8, one, zero) == pytest.approx(1.0)


def test_l1_mismatched_mesh_rejected(unit_mesh8, graded_mesh):
    a = ScalarField.zeros(unit_mesh8)
    b = ScalarField.zeros(graded_mesh)
    with pytest.raises(ValueError, match="does not match"):
        l1_error(graded_mesh, a, b)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_l1_triangle_inequality(seed):
    m = build_mesh((0.0, 1.0, 0.0, 1.0), nx=5)
    r = np.random.default_rng(seed)
    a = ScalarField(r.standard_normal((5, 5)))
    b = ScalarField(r.standard_normal((5, 5)))
    c = ScalarField(r.standard_normal((5, 5)))
    ab = l1_error(m, a, b)
    assert ab <= l1_error(m, a, c) + l1_error(m, c, b) + 1e-12
    assert ab == l1_error(m, b, a)


def test_velocity_enforce_boundary(graded_mesh, rng):
    v = VelocityField(
        rng.standard_normal((graded_mesh.nx + 1, graded_mesh.ny)),
        rng.standard_normal((graded_mesh.nx, graded_mesh.ny + 1)),
    ).enforce_boundary(graded_mesh)
    assert np.all(v.u1[~graded_mesh.interior_x] == 0.0)
    assert np.all(v.u2[~graded_mesh.interior_y] == 0.0)
