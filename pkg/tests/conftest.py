import numpy as np
import pytest

from levymalliavin import (DiscreteMeasure, Kernel, LevyPath, LevyTriplet,
                           SizeSet, WeightK)


def bshape(t, x):
    return np.broadcast(np.asarray(t), np.asarray(x)).shape


def ones_tx(t, x):
    return np.ones(bshape(t, x))


def zeros_tx(t, x):
    return np.zeros(bshape(t, x))


@pytest.fixture
def unit_weight():
    return WeightK(ones_tx, zeros_tx, sup_bound=1.0, name="unit")


@pytest.fixture
def kernel_t():
    """h(t, x) = t."""
    return Kernel(lambda t, x: np.asarray(t, dtype=float) * ones_tx(t, x),
                  ones_tx, name="t")


@pytest.fixture
def kernel_one():
    return Kernel(ones_tx, zeros_tx, name="1")


@pytest.fixture
def poisson_triplet():
    """sigma = 0, nu = delta_1 (unit-rate Poisson jumps), T = 1."""
    return LevyTriplet(0.0, 0.0, DiscreteMeasure(((1.0, 1.0),)), 1.0)


@pytest.fixture
def reals():
    return SizeSet.reals()


def manual_path(triplet, jumps, grid_size=4, brownian=None, seed=0):
    """A hand-built path with the given (time, size) jump list."""
    grid = np.linspace(0.0, triplet.T, grid_size + 1)
    w = np.zeros(grid.shape) if brownian is None else np.asarray(brownian)
    jumps = sorted(jumps)
    jt = np.array([t for t, _ in jumps], dtype=float)
    jx = np.array([x for _, x in jumps], dtype=float)
    return LevyPath(triplet, grid, w, jt, jx, seed)
