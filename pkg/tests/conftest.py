import numpy as np
import pytest

from app.models.lattice import Domain
from app.services.algebra import su


@pytest.fixture
def su2():
    return su(2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def torus():
    """4^4 periodic lattice with unit spacing"""
    return Domain.torus(4.0, 1.0)


@pytest.fixture(scope="session")
def ball():
    return Domain.ball(1.0, 0.25)
