import math

import numpy as np
import pytest

from baroclinic.dispersion import DomainError
from baroclinic.grid import Grid, chebyshev_lobatto


def test_nodes_ascending_with_endpoints():
    z, D = chebyshev_lobatto(9)
    assert z[0] == 0.0 and z[-1] == 1.0
    assert np.all(np.diff(z) > 0)
    assert np.allclose(z, z[::-1][::-1])
    assert np.allclose(z + z[::-1], 1.0, atol=1e-15)


def test_differentiation_exact_on_polynomials():
    g = Grid(4, 4, 12)
    z = g.z
    for k in range(1, 12):
        assert np.max(np.abs(g.Dz @ z**k - k * z ** (k - 1))) < 1e-10 * k
    assert np.max(np.abs(g.D2z @ z**5 - 20 * z**3)) < 1e-9


def test_quadratures():
    g = Grid(4, 4, 17)
    assert abs(g.weights @ np.cos(g.z) - math.sin(1.0)) < 1e-14
    for k in range(0, 15):
        assert abs(g.interior_weights @ g.z[1:-1] ** k - 1 / (k + 1)) < 1e-13
    f = np.cos(3 * g.z)
    assert np.max(np.abs(g.cumint @ f - np.sin(3 * g.z) / 3)) < 1e-11


def test_spectral_operators():
    g = Grid(16, 8, 8, Lx=4 * math.pi, Ly=2 * math.pi)
    x, y = g.mesh()
    f = np.sin(0.5 * x) * np.cos(2 * y)
    assert np.max(np.abs(g.ddx(f) - 0.5 * np.cos(0.5 * x) * np.cos(2 * y))) < 1e-13
    assert np.max(np.abs(g.ddy(f) + 2 * np.sin(0.5 * x) * np.sin(2 * y))) < 1e-13
    assert np.max(np.abs(g.lap_h(f) + 4.25 * f)) < 1e-12
    assert np.max(np.abs(g.ifft(g.fft(f)) - f)) < 1e-15


def test_mask_two_thirds():
    g = Grid(16, 16, 8)
    m, n = g.mode_index
    assert g.mask.sum() == 66  # |m| <= 5 (6 columns) x |n| <= 5 (11 rows)
    assert np.all(g.mask[np.abs(n[:, 0]) >= 16 / 3] == 0)


def test_integrate_constant():
    g = Grid(8, 8, 9, Lx=2.0, Ly=3.0)
    assert abs(g.integrate(np.ones(g.shape)) - 6.0) < 1e-13
    assert abs(g.integrate(np.ones(g.hshape)) - 6.0) < 1e-13


@pytest.mark.parametrize("args", [(12, 16, 8), (16, 2, 8), (16, 16, 7), (16, 16, 8, -1.0)])
def test_grid_validation(args):
    with pytest.raises(DomainError):
        Grid(*args)


def test_shape_check():
    g = Grid(8, 8, 8)
    with pytest.raises(DomainError):
        g.jac(np.zeros((8, 8)), np.zeros((4, 8)))
