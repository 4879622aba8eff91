import numpy as np
import pytest

from optmeas.design_solver import SolverConfig, solve_optimal
from optmeas.measures import constant_weight
from optmeas.poly_basis import PointSet, graded_basis, interval_grid


@pytest.fixture(scope="session")
def grid201():
    return interval_grid(-1.0, 1.0, 201)


@pytest.fixture(scope="session")
def interval_designs(grid201):
    """Optimal constant-weight designs on the 201-point interval grid, keyed by degree."""
    weight = constant_weight(grid201)
    out = {}
    for n in (0, 1, 2, 3, 4, 6):
        out[n] = solve_optimal(grid201, weight, graded_basis(1, n), SolverConfig())
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_points(rng, size, d, complex_=True):
    re = rng.uniform(-1, 1, (size, d))
    im = rng.uniform(-1, 1, (size, d)) if complex_ else 0.0
    return PointSet(re + 1j * im)


def random_probability(rng, size):
    w = rng.random(size) + 0.05
    return w / w.sum()
