"""Shared fixtures.  Ground states on the canonical grid are solved once per session."""

import numpy as np
import pytest

from twowave.functionals import PhysParams
from twowave.groundstate import solve_shooting, solve_variational
from twowave.radial import make_grid

CANONICAL_N_POINTS = 2000
CANONICAL_R_MAX = 20.0


@pytest.fixture(scope="session")
def params():
    return PhysParams.canonical()


@pytest.fixture(scope="session")
def grid():
    return make_grid(CANONICAL_N_POINTS, CANONICAL_R_MAX, 5.0)


@pytest.fixture(scope="session")
def gs_var(params, grid):
    return solve_variational(params, grid)


@pytest.fixture(scope="session")
def gs_shoot(params, grid):
    return solve_shooting(params, grid, (30.0, 40.0))


@pytest.fixture(scope="session")
def small_grid():
    return make_grid(600, 12.0, 5.0)


@pytest.fixture(scope="session")
def gs_small(params, small_grid):
    return solve_variational(params, small_grid)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
