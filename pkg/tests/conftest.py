import numpy as np
import pytest

from macswe.mesh import build_mesh


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture
def unit_mesh8():
    """Uniform 8x8 mesh on the unit square."""
    return build_mesh((0.0, 1.0, 0.0, 1.0), nx=8)


@pytest.fixture
def graded_mesh():
    """Non-uniform spacings plus an interior obstacle: the least symmetric
    small mesh, used to exercise every boundary branch."""
    xf = np.array([0.0, 0.5, 1.0, 1.75, 2.5, 3.5, 4.0, 5.0, 6.0])
    yf = np.array([0.0, 1.0, 1.5, 2.0, 3.0, 4.5, 5.0, 6.0])
    return build_mesh(
        (0.0, 6.0, 0.0, 6.0),
        x_faces=xf,
        y_faces=yf,
        obstacles=((1.0, 2.5, 1.5, 3.0),),
    )
