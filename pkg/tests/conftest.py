import numpy as np
import pytest

from vortex_spectra.constants import preset
from vortex_spectra.geometry import ClosedCurve


@pytest.fixture
def unit():
    return preset("unit")


@pytest.fixture
def helium():
    return preset("helium-like")


def limacon(delta, scale=100.0):
    """Limacon-type curve with a single flex at u = pi when ``delta == 0``."""
    b = 2.0 + delta
    A = np.zeros((3, 3))
    B = np.zeros((3, 3))
    A[0, 0], A[1, 0], A[2, 0] = 0.5 * scale, b * scale, 0.5 * scale
    B[1, 1], B[2, 1] = b * scale, 0.5 * scale
    return ClosedCurve(A, B)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
