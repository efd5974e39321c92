import math

import numpy as np
import pytest

from pathframes.scenarios import GEOMETRIES


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def sphere():
    return GEOMETRIES["sphere2"].connection()


@pytest.fixture(scope="session")
def polar():
    return GEOMETRIES["polar-flat"].connection()


@pytest.fixture(scope="session")
def flat():
    return GEOMETRIES["flat"].connection()


@pytest.fixture(scope="session")
def torsion_const():
    return GEOMETRIES["torsion-const"].connection()


def sphere_latitude_matrix(theta0):
    """Tangent coefficient matrix along the latitude ``theta = theta0``, by hand."""
    return np.array([[0.0, -math.sin(theta0) * math.cos(theta0)],
                     [math.cos(theta0) / math.sin(theta0), 0.0]])


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for result in sorted(RESULTS, key=lambda r: r.id):
            terminalreporter.write_line(result.line())
