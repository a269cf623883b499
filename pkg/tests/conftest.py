import pytest

from src.flow import compute_ground_state, reference_ground_state
from src.grid import Grid


@pytest.fixture(scope="session")
def reference_grid():
    return Grid(0.1, 400)


@pytest.fixture(scope="session")
def ground_state(reference_grid):
    """eta_{h,K} at h = 0.1, K = 400 to residual 1e-13."""
    return reference_ground_state(reference_grid)


@pytest.fixture(scope="session")
def small_grid():
    return Grid(0.2, 100)


@pytest.fixture(scope="session")
def small_ground_state(small_grid):
    return compute_ground_state(small_grid, tol=1e-13)
