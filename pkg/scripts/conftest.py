"""Shared fixtures: reference measures with known entropy behavior."""

import math

import numpy as np
import pytest

from measure_core import DyadicMeasure1D

CANTOR_DIMENSION = math.log(2) / math.log(3)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-size randomized suites and Monte-Carlo runs")


def cantor_oracle(level: int) -> DyadicMeasure1D:
    """Cantor measure binned at `level` from the exact triadic endpoints sum 2 d_i 3^-i.

    Each of the 2^k construction intervals carries mass 2^-k; k is large
    enough that an interval is far shorter than a level cell.
    """
    depth = math.ceil(level / math.log2(3)) + 3
    numerators = np.zeros(1, dtype=np.int64)
    for k in range(1, depth + 1):
        numerators = np.concatenate([numerators, numerators + 2 * 3 ** (depth - k)])
    cells = (numerators * 2**level) // 3**depth
    return DyadicMeasure1D.from_arrays(level, cells, np.full(numerators.size, 2.0**-depth))


def bernoulli_measure(p: float, level: int) -> DyadicMeasure1D:
    """Binary digits i.i.d. with P(0) = p: cell k has mass p^zeros (1-p)^ones."""
    cells = np.arange(2**level, dtype=np.int64)
    ones = np.array([bin(int(k)).count("1") for k in cells])
    masses = p ** (level - ones) * (1 - p) ** ones
    return DyadicMeasure1D.from_arrays(level, cells, masses)


@pytest.fixture(scope="session")
def cantor():
    return cantor_oracle(20)


@pytest.fixture(scope="session")
def cantor_at():
    return cantor_oracle


@pytest.fixture(scope="session")
def bernoulli():
    return bernoulli_measure


@pytest.fixture(scope="session")
def random_measures():
    """Five sparse measures at level 14 with a fixed seed."""
    rng = np.random.default_rng(20240611)
    measures = []
    for size in (1, 7, 60, 500, 3000):
        cells = rng.choice(2**14, size=size, replace=False)
        measures.append(DyadicMeasure1D.from_arrays(14, cells, rng.random(size) + 0.01))
    return measures


def random_sparse_measures(count: int, level: int = 14, seed: int = 20240611, max_cells: int = 400):
    """`count` sparse measures at `level`, each on 1..max_cells random cells."""
    rng = np.random.default_rng(seed)
    measures = []
    for size in rng.integers(1, max_cells + 1, size=count):
        cells = rng.choice(2**level, size=int(size), replace=False)
        measures.append(DyadicMeasure1D.from_arrays(level, cells, rng.random(int(size)) + 0.01))
    return measures
