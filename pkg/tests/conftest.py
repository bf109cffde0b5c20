import mpmath
import numpy as np
import pytest

from baroclinic.dispersion import Params
from baroclinic.grid import Grid
from baroclinic.qg_core import QGModel

mpmath.mp.dps = 40


def mp_coth(x):
    return mpmath.coth(mpmath.mpf(x))


def mp_discriminant(q):
    q = mpmath.mpf(q)
    return q * q + 1 - 2 * q * mpmath.coth(2 * q)


@pytest.fixture(scope="session")
def mp_qc():
    """High-precision root of q^2 + 1 - 2q coth 2q."""
    return mpmath.findroot(mp_discriminant, mpmath.mpf("1.2"))


@pytest.fixture(scope="session")
def small_grid():
    return Grid(16, 16, 16)


@pytest.fixture(scope="session")
def model_b1():
    return QGModel(Grid(32, 32, 24), Params(1.0))


def rel(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


@pytest.fixture(scope="session")
def expansion():
    """Noise-seeded base flow co-stepped with its first-order correction to t = 0.5."""
    from baroclinic.asymptotics import expand
    from baroclinic.qg_core import noise_state

    model = QGModel(Grid(32, 32, 24), Params(1.0))
    base = noise_state(model.grid, 0.1, k0=1.5, seed=3)
    res = expand(model, base, [0.5], Ro=0.1, dt=0.05)
    return model, res
