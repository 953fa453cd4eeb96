"""Seeded random corpora of band-limited fields and trajectories.

Samples live on the wavenumber lattice ``(2 pi / L) m`` of the torus, not on
the grid: the same ``(seed, index)`` gives the same field on any grid with the
same period that resolves the support, which makes resolution-doubling
comparisons exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict, replace

import numpy as np

from ..besov import Trajectory
from ..errors import ConfigurationError
from ..spectral import DyadicPartition, Grid2D, SpectralField2D, VectorField2D, make_partition

__all__ = [
    "CorpusSpec",
    "Corpus",
    "random_field",
    "random_vector",
    "random_trajectory",
    "random_vector_trajectory",
    "lattice_amplitudes",
]


@dataclass(frozen=True)
class CorpusSpec:
    """Seeded corpus description.

    Parameters
    ----------
    seed : int
    count : int
        Number of samples.
    decay : float
        Block ``k`` carries ``L^2`` mass proportional to ``2^{-k decay}``;
        ``inf`` keeps only the lowest block.
    k_lo, k_hi : int
        Support is the union of the dyadic annuli ``2^k <= |xi| < 2^{k+1}``,
        ``k_lo <= k <= k_hi``.
    amplitude : float
        Root-mean-square value of each field.
    n_times : int
        Samples per trajectory on ``[0, T]``.
    T : float
    rate, rate_jitter : float
        Trajectory bin ``j`` decays at ``4^j rate (1 + rate_jitter (2U - 1))``
        with ``U`` uniform on ``[0, 1]``.
    """

    seed: int = 0
    count: int = 16
    decay: float = 0.5
    k_lo: int = 0
    k_hi: int = 1
    amplitude: float = 0.1
    n_times: int = 5
    T: float = 1.0
    rate: float = 0.5
    rate_jitter: float = 0.0

    def __post_init__(self):
        if self.count < 1:
            raise ConfigurationError("count must be at least 1")
        if self.k_hi < self.k_lo:
            raise ConfigurationError("k_hi must be >= k_lo")
        if not (self.amplitude > 0 and self.T > 0 and self.n_times >= 2):
            raise ConfigurationError("amplitude and T must be positive, n_times >= 2")
        if not (self.rate > 0 and 0 <= self.rate_jitter < 1):
            raise ConfigurationError("rate must be positive and rate_jitter in [0, 1)")
        if not (self.decay >= 0 or math.isinf(self.decay)):
            raise ConfigurationError("decay must be nonnegative")

    def to_dict(self) -> dict:
        d = asdict(self)
        if math.isinf(self.decay):
            d["decay"] = "inf"
        return d


@dataclass(frozen=True)
class Corpus:
    """A corpus description bound to a partition."""

    spec: CorpusSpec
    partition: DyadicPartition

    def __post_init__(self):
        grid = self.partition.grid
        top = 2.0 ** (self.spec.k_hi + 1)
        # Products of two samples must be resolved exactly by the 2/3 rule.
        cut = (grid.n_points // 3) * 2 * np.pi / grid.period
        if 2 * top > cut:
            raise ConfigurationError(f"support radius {top:g} is too large for {grid.n_points} points")

    @classmethod
    def default(cls, spec: CorpusSpec | None = None, n_points: int = 512,
                period: float = 16 * np.pi, k_min: int = -1, k_max: int = 3) -> "Corpus":
        return cls(spec or CorpusSpec(), make_partition(Grid2D(n_points, period), k_min, k_max))

    @property
    def grid(self) -> Grid2D:
        return self.partition.grid

    def doubled(self) -> "Corpus":
        return Corpus(replace(self.spec, count=2 * self.spec.count), self.partition)

    def refined(self) -> "Corpus":
        g = self.grid
        p = self.partition
        return Corpus(self.spec, make_partition(Grid2D(2 * g.n_points, g.period), p.k_min, p.k_max))


def _lattice(spec: CorpusSpec, period: float):
    """Integer modes of the support, their radii and bin indices."""
    dk = 2 * np.pi / period
    top = 2.0 ** (spec.k_hi + 1)
    M = int(math.ceil(top / dk))
    m1, m2 = np.meshgrid(np.arange(-M, M + 1), np.arange(-M, M + 1), indexing="ij")
    r = dk * np.hypot(m1, m2)
    with np.errstate(divide="ignore"):
        bins = np.floor(np.log2(np.where(r > 0, r, 1e-300)))
    hi = spec.k_lo if math.isinf(spec.decay) else spec.k_hi
    keep = (r > 0) & (bins >= spec.k_lo) & (bins <= hi)
    return m1, m2, r, bins.astype(int), keep


def lattice_amplitudes(spec: CorpusSpec, period: float) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Integer modes ``(m1, m2)``, their radii and the coefficient moduli.

    Moduli are ``|xi|^{-(decay + 1)}`` scaled to unit root-mean-square; phases
    do not affect them, so block ``L^2`` norms of every sample are fixed by
    this table.
    """
    m1, m2, r, bins, keep = _lattice(spec, period)
    d = 0.0 if math.isinf(spec.decay) else spec.decay
    a = np.where(keep, np.where(r > 0, r, 1.0) ** (-(d + 1.0)), 0.0)
    a *= spec.amplitude / math.sqrt(float(np.sum(a * a)))
    return m1[keep], m2[keep], r[keep], a[keep]


def _rng(spec: CorpusSpec, index: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([spec.seed, index, stream])


def _place(grid: Grid2D, m1: np.ndarray, m2: np.ndarray, c: np.ndarray) -> np.ndarray:
    n = grid.n_points
    out = np.zeros(grid.shape, dtype=complex)
    out[m1 % n, m2 % n] = c
    return out


def _phased(spec: CorpusSpec, grid: Grid2D, index: int, stream: int):
    """Hermitian coefficients with fixed moduli and uniform phases, split by bin."""
    m1, m2, r, a = lattice_amplitudes(spec, grid.period)
    rng = _rng(spec, index, stream)
    theta = rng.uniform(0.0, 2 * np.pi, size=m1.size)
    # One phase per conjugate pair: the upper half plane decides.
    upper = (m2 > 0) | ((m2 == 0) & (m1 > 0))
    key = {(int(x), int(y)): t for x, y, t, u in zip(m1, m2, theta, upper) if u}
    phase = np.array([key[(x, y)] if u else -key[(-x, -y)]
                      for x, y, u in zip(m1.tolist(), m2.tolist(), upper)])
    return m1, m2, r, a * np.exp(1j * phase), rng


def random_field(spec: CorpusSpec, grid: Grid2D, index: int, stream: int = 0) -> SpectralField2D:
    """Mean-free real field number ``index`` of the corpus.

    Deterministic in ``(seed, index, stream)`` and independent of the grid size.
    """
    m1, m2, _, c, _ = _phased(spec, grid, index, stream)
    return SpectralField2D(grid, _place(grid, m1, m2, c), 0.0)


def random_vector(spec: CorpusSpec, grid: Grid2D, index: int, stream: int = 0) -> VectorField2D:
    return VectorField2D(random_field(spec, grid, index, 2 * stream + 100),
                         random_field(spec, grid, index, 2 * stream + 101))


def _trajectory_series(spec: CorpusSpec, grid: Grid2D, index: int, stream: int) -> tuple[np.ndarray, list]:
    """``f(t) = sum_j exp(-lambda_j t) g_j`` with ``g_j`` the bin ``j`` part of a
    random field and ``lambda_j`` the per-bin decay rate of the corpus description."""
    m1, m2, r, c, rng = _phased(spec, grid, index, stream)
    bins = np.floor(np.log2(r)).astype(int)
    ks = np.arange(spec.k_lo, spec.k_hi + 1)
    rates = 4.0 ** ks * spec.rate * (1.0 + spec.rate_jitter * (2.0 * rng.uniform(0.0, 1.0, size=ks.size) - 1.0))
    times = np.linspace(0.0, spec.T, spec.n_times)
    lam = rates[np.clip(bins - spec.k_lo, 0, ks.size - 1)]
    series = [SpectralField2D(grid, _place(grid, m1, m2, c * np.exp(-lam * t)), 0.0) for t in times]
    return times, series


def random_trajectory(spec: CorpusSpec, partition: DyadicPartition, index: int, stream: int = 0,
                      name: str = "h") -> Trajectory:
    """Scalar trajectory with block-dependent exponential decay rates."""
    times, series = _trajectory_series(spec, partition.grid, index, stream)
    return Trajectory.from_series(partition, times, {name: series})


def random_vector_trajectory(spec: CorpusSpec, partition: DyadicPartition, index: int,
                             stream: int = 0, name: str = "u") -> Trajectory:
    grid = partition.grid
    times, a = _trajectory_series(spec, grid, index, 2 * stream + 100)
    _, b = _trajectory_series(spec, grid, index, 2 * stream + 101)
    return Trajectory.from_series(partition, times, {name: [VectorField2D(x, y) for x, y in zip(a, b)]})
