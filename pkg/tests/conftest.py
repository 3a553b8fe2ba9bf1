import numpy as np
import pytest

from lfpca import (
    BlockPartition,
    CovMatrix,
    design_a,
    design_b,
    make_uniform_grid,
    population_covariance,
)


def make_block_diag(rng, p=60, max_blocks=6):
    """Random exactly-block-diagonal PSD matrix with contiguous blocks.

    Off-block entries are exact zeros; each block is a dense random Gram
    matrix, so its nonzero pattern is connected with probability one.
    """
    k = int(rng.integers(1, max_blocks + 1))
    cuts = sorted(rng.choice(np.arange(1, p), size=k - 1, replace=False)) if k > 1 else []
    bounds = [0, *cuts, p]
    blocks = tuple((bounds[i], bounds[i + 1] - 1) for i in range(k))
    entries = np.zeros((p, p))
    for lo, hi in blocks:
        size = hi - lo + 1
        m = rng.standard_normal((size, size + 2))
        entries[lo : hi + 1, lo : hi + 1] = m @ m.T
    grid = make_uniform_grid(p, 0.0, 1.0)
    return CovMatrix(grid, entries), BlockPartition(blocks)


@pytest.fixture(scope="session")
def unit_grid_1001():
    return make_uniform_grid(1001, 0.0, 1.0)


@pytest.fixture(scope="session")
def pop_cov_a_full(unit_grid_1001):
    return CovMatrix(unit_grid_1001, population_covariance(design_a(), unit_grid_1001))


@pytest.fixture(scope="session")
def pop_cov_a_trunc(unit_grid_1001):
    entries = population_covariance(design_a(), unit_grid_1001, n_components=3)
    return CovMatrix(unit_grid_1001, entries)


@pytest.fixture(scope="session")
def pop_cov_b_full(unit_grid_1001):
    return CovMatrix(unit_grid_1001, population_covariance(design_b(), unit_grid_1001))
