import numpy as np
import pytest

from mortarcontact.geometry import make_block


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running benchmark solve")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def unit_tet_vertices():
    return np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])


@pytest.fixture
def cube():
    return make_block((1.0, 1.0, 1.0), (1, 1, 1))
