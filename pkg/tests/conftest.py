"""Shared grids, partitions and random band-limited fields."""

import numpy as np
import pytest

from swlab.spectral import Grid2D, SpectralField2D, VectorField2D, make_partition

PERIOD = 16.0 * np.pi


def band_limited(grid, partition, rng, amplitude=1.0, lo=None, hi=None):
    """Random real field whose spectrum lies in ``[lo, hi]`` (default: coverage annulus)."""
    clo, chi_ = partition.coverage
    lo = clo if lo is None else lo
    hi = chi_ if hi is None else hi
    r = grid.radius
    support = (r >= lo) & (r <= hi)
    c = (rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)) * support
    f = SpectralField2D.from_coefficients(grid, c, mean=0.0)
    scale = amplitude / np.max(np.abs(f.values()))
    return f * scale


def band_limited_vector(grid, partition, rng, amplitude=1.0, lo=None, hi=None):
    return VectorField2D(band_limited(grid, partition, rng, amplitude, lo, hi),
                         band_limited(grid, partition, rng, amplitude, lo, hi))


def cos_mode(grid, m1, m2, amplitude=1.0, mean=0.0):
    """Samples of ``amplitude cos(xi . x) + mean`` for integer modes ``(m1, m2)``."""
    from swlab.spectral import forward_transform
    x1, x2 = grid.coordinates()
    s = grid.spacing
    return forward_transform(amplitude * np.cos(s * (m1 * x1 + m2 * x2)) + mean, grid)


@pytest.fixture(scope="session")
def grid():
    return Grid2D(128, PERIOD)


@pytest.fixture(scope="session")
def partition(grid):
    return make_partition(grid, -4, 1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
