import pytest

from dynsys import Point3
from params import PHI_CONJ, Params


@pytest.fixture
def params_221():
    """q=2, d=1 with a super-critical alpha = 0.9."""
    return Params(2, 1, 0.9)


@pytest.fixture
def params_subcritical():
    """q=2, d=1 with alpha = 0.3, below the critical modulus 1/phi."""
    return Params(2, 1, 0.3)


@pytest.fixture
def params_unimodular():
    return Params(2, 1, 1.0)


@pytest.fixture
def omega_point():
    return Point3.from_complex(10, 5, 1)


@pytest.fixture
def stable_line_point():
    c = 0.7
    return Point3.from_complex(PHI_CONJ * c, c, 0)