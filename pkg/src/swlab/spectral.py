"""Torus grid, Fourier transforms, dyadic projections and multipliers.

Fields are stored as full ``n x n`` arrays of normalized Fourier coefficients
in numpy FFT ordering: entry ``[i1, i2]`` multiplies
``exp(i (xi1 * x1 + xi2 * x2))`` with ``xi_a = (2 pi / L) * m_a`` and ``m_a`` the
signed integer wave number of index ``i_a``. With this normalization
``cos(2 pi x1 / L)`` has coefficient ``1/2`` at ``(+-1, 0)``. The zero mode is
kept out of the array and carried in ``mean``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.fft as sfft

from .errors import BandLimitError, GridMismatchError, PartitionRangeError

__all__ = [
    "CHI_INNER",
    "CHI_OUTER",
    "Grid2D",
    "SpectralField2D",
    "VectorField2D",
    "DyadicPartition",
    "MultiplierSymbol",
    "chi",
    "phi",
    "forward_transform",
    "inverse_transform",
    "make_partition",
    "dyadic_block",
    "low_pass",
    "apply_multiplier",
    "derivative",
    "gradient",
    "divergence",
    "laplacian",
    "lame",
    "deformation",
    "multiply",
    "from_physical_product",
    "lp_norm",
    "l2_norm",
    "inner",
    "evaluate_at",
    "bernstein_ratio",
    "bernstein_reverse_ratio",
]

CHI_INNER = 5.0 / 3.0
CHI_OUTER = 12.0 / 5.0
# Radii bounding the support of phi.
PHI_LOWER = CHI_INNER / 2.0
PHI_UPPER = CHI_OUTER


# --------------------------------------------------------------------------
# Grid
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Grid2D:
    """Uniform periodic grid on the square torus ``[0, L)^2``.

    Parameters
    ----------
    n_points : int
        Points per axis; a power of two, at least 64.
    period : float
        Side length ``L`` of the torus.
    """

    n_points: int = 512
    period: float = 16.0 * np.pi

    def __post_init__(self):
        n = int(self.n_points)
        if n != self.n_points or n < 64 or n & (n - 1):
            raise ValueError(f"n_points must be a power of two >= 64, got {self.n_points}")
        if not (np.isfinite(self.period) and self.period > 0):
            raise ValueError(f"period must be positive, got {self.period}")

    @property
    def spacing(self) -> float:
        """Mode spacing ``2 pi / L``."""
        return 2.0 * np.pi / self.period

    @property
    def dx(self) -> float:
        return self.period / self.n_points

    @property
    def nyquist(self) -> float:
        return 0.5 * self.n_points * self.spacing

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_points, self.n_points)

    @cached_property
    def integer_modes(self) -> np.ndarray:
        """Signed integer wave numbers along one axis in FFT order."""
        return np.fft.fftfreq(self.n_points, d=1.0 / self.n_points).astype(np.int64)

    @cached_property
    def wavevectors(self) -> tuple[np.ndarray, np.ndarray]:
        """Physical wave vector components ``(xi1, xi2)`` on the full array."""
        m = self.integer_modes * self.spacing
        xi1, xi2 = np.meshgrid(m, m, indexing="ij")
        xi1.setflags(write=False)
        xi2.setflags(write=False)
        return xi1, xi2

    @cached_property
    def radius(self) -> np.ndarray:
        xi1, xi2 = self.wavevectors
        r = np.hypot(xi1, xi2)
        r.setflags(write=False)
        return r

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """Boolean mask of modes kept by the 2/3 rule: ``|m_a| <= n // 3``."""
        keep = np.abs(self.integer_modes) <= self.n_points // 3
        mask = keep[:, None] & keep[None, :]
        mask.setflags(write=False)
        return mask

    @cached_property
    def nyquist_free(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-axis masks that vanish on the Nyquist line of that axis."""
        half = self.n_points // 2
        keep = (np.abs(self.integer_modes) != half).astype(float)
        a1 = np.broadcast_to(keep[:, None], self.shape)
        a2 = np.broadcast_to(keep[None, :], self.shape)
        return a1, a2

    @cached_property
    def reflection(self) -> np.ndarray:
        """Index array mapping each FFT position ``i`` to the position of ``-i``."""
        return (-np.arange(self.n_points)) % self.n_points

    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        """Physical sample coordinates ``(x1, x2)`` on the grid."""
        x = np.arange(self.n_points) * self.dx
        return np.meshgrid(x, x, indexing="ij")

    def zero(self) -> "SpectralField2D":
        return SpectralField2D(self, np.zeros(self.shape, dtype=complex), 0.0)


def _reflect(c: np.ndarray) -> np.ndarray:
    """Return the array ``c(-m)`` in FFT ordering."""
    return np.roll(c[::-1, ::-1], 1, axis=(0, 1))


def _hermitian_part(c: np.ndarray) -> np.ndarray:
    return 0.5 * (c + np.conj(_reflect(c)))


# --------------------------------------------------------------------------
# Fields
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SpectralField2D:
    """Real scalar field on the torus stored by its Fourier coefficients.

    Parameters
    ----------
    grid : Grid2D
    coefficients : ndarray of complex, shape (n, n)
        Normalized coefficients in FFT order with the zero entry equal to 0.
    mean : float
        Spatial mean (the zero Fourier mode).
    """

    grid: Grid2D
    coefficients: np.ndarray
    mean: float = 0.0

    def __post_init__(self):
        c = self.coefficients
        if c.shape != self.grid.shape:
            raise ValueError(f"coefficient shape {c.shape} does not match grid {self.grid.shape}")
        if c[0, 0] != 0:
            raise ValueError("the zero-mode entry must be 0; store the mean separately")

    @classmethod
    def from_coefficients(cls, grid: Grid2D, coefficients, mean: float | None = None,
                          symmetrize: bool = True) -> "SpectralField2D":
        """Build a validated field from a full coefficient table.

        If ``mean`` is None the zero entry of ``coefficients`` is taken as the mean.
        """
        c = np.array(coefficients, dtype=complex, copy=True)
        if c.shape != grid.shape:
            raise ValueError(f"coefficient shape {c.shape} does not match grid {grid.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        if mean is None:
            mean = float(c[0, 0].real)
        c[0, 0] = 0.0
        if symmetrize:
            c = _hermitian_part(c)
            c[0, 0] = 0.0
        if not np.isfinite(mean):
            raise ValueError("mean must be finite")
        return cls(grid, c, float(mean))

    # arithmetic -----------------------------------------------------------
    def _check(self, other: "SpectralField2D"):
        if other.grid != self.grid:
            raise GridMismatchError(f"grid mismatch: {self.grid} vs {other.grid}")

    def __add__(self, other):
        if isinstance(other, SpectralField2D):
            self._check(other)
            return SpectralField2D(self.grid, self.coefficients + other.coefficients,
                                   self.mean + other.mean)
        if np.isscalar(other):
            return SpectralField2D(self.grid, self.coefficients, self.mean + float(other))
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, SpectralField2D):
            self._check(other)
            return SpectralField2D(self.grid, self.coefficients - other.coefficients,
                                   self.mean - other.mean)
        if np.isscalar(other):
            return SpectralField2D(self.grid, self.coefficients, self.mean - float(other))
        return NotImplemented

    def __neg__(self):
        return SpectralField2D(self.grid, -self.coefficients, -self.mean)

    def __mul__(self, scalar):
        if not np.isscalar(scalar) or np.iscomplexobj(scalar):
            return NotImplemented
        s = float(scalar)
        return SpectralField2D(self.grid, self.coefficients * s, self.mean * s)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self * (1.0 / float(scalar))

    # views ------------------------------------------------------------------
    def values(self) -> np.ndarray:
        """Physical samples on the grid, mean included."""
        return inverse_transform(self)

    def without_mean(self) -> "SpectralField2D":
        return SpectralField2D(self.grid, self.coefficients, 0.0)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.coefficients)) and np.isfinite(self.mean))

    def hermitian_defect(self) -> float:
        c = self.coefficients
        return float(np.max(np.abs(c - np.conj(_reflect(c))))) if c.size else 0.0

    def same_as(self, other: "SpectralField2D") -> bool:
        """Bitwise equality of grid, mean and coefficient table."""
        return (self.grid == other.grid and self.mean == other.mean
                and np.array_equal(self.coefficients, other.coefficients))


@dataclass(frozen=True, eq=False)
class VectorField2D:
    """Pair of scalar fields ``(u1, u2)`` on one grid."""

    u1: SpectralField2D
    u2: SpectralField2D

    def __post_init__(self):
        if self.u1.grid != self.u2.grid:
            raise GridMismatchError("vector components live on different grids")

    @property
    def grid(self) -> Grid2D:
        return self.u1.grid

    @property
    def components(self) -> tuple[SpectralField2D, SpectralField2D]:
        return (self.u1, self.u2)

    @classmethod
    def zero(cls, grid: Grid2D) -> "VectorField2D":
        return cls(grid.zero(), grid.zero())

    def __add__(self, other):
        if not isinstance(other, VectorField2D):
            return NotImplemented
        return VectorField2D(self.u1 + other.u1, self.u2 + other.u2)

    def __sub__(self, other):
        if not isinstance(other, VectorField2D):
            return NotImplemented
        return VectorField2D(self.u1 - other.u1, self.u2 - other.u2)

    def __neg__(self):
        return VectorField2D(-self.u1, -self.u2)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return VectorField2D(self.u1 * scalar, self.u2 * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return VectorField2D(self.u1 / scalar, self.u2 / scalar)

    def map(self, fn: Callable[[SpectralField2D], SpectralField2D]) -> "VectorField2D":
        return VectorField2D(fn(self.u1), fn(self.u2))

    def is_finite(self) -> bool:
        return self.u1.is_finite() and self.u2.is_finite()

    def same_as(self, other: "VectorField2D") -> bool:
        return self.u1.same_as(other.u1) and self.u2.same_as(other.u2)


# --------------------------------------------------------------------------
# Transforms
# --------------------------------------------------------------------------


def _complete_half(half: np.ndarray, n: int) -> np.ndarray:
    """Rebuild the full coefficient table from the ``rfft2`` half plane."""
    h = n // 2 + 1
    full = np.empty((n, n), dtype=complex)
    full[:, :h] = half
    rows = (-np.arange(n)) % n
    cols = n - np.arange(h, n)
    full[:, h:] = np.conj(half[rows][:, cols])
    return full


def _forward_coefficients(values: np.ndarray) -> np.ndarray:
    n = values.shape[0]
    return _complete_half(sfft.rfft2(values, norm="forward"), n)


def _to_values(coefficients: np.ndarray, mean: float) -> np.ndarray:
    n = coefficients.shape[0]
    vals = sfft.irfft2(coefficients[:, : n // 2 + 1], s=(n, n), norm="forward")
    if mean:
        vals += mean
    return vals


def forward_transform(values, grid: Grid2D) -> SpectralField2D:
    """Fourier coefficients of real grid samples.

    Parameters
    ----------
    values : array_like, shape (n, n)
        Real samples ``f(x1_i, x2_j)``.
    grid : Grid2D

    Returns
    -------
    SpectralField2D
    """
    arr = np.asarray(values, dtype=float)
    if arr.shape != grid.shape:
        raise ValueError(f"sample shape {arr.shape} does not match grid {grid.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("samples must be finite")
    c = _forward_coefficients(arr)
    mean = float(c[0, 0].real)
    c[0, 0] = 0.0
    return SpectralField2D(grid, c, mean)


def inverse_transform(f: SpectralField2D) -> np.ndarray:
    """Real grid samples of ``f`` including its mean."""
    return _to_values(f.coefficients, f.mean)


def from_physical_product(values: np.ndarray, grid: Grid2D, dealias: bool = True) -> SpectralField2D:
    """Transform physical samples of a nonlinear expression, applying the 2/3 rule."""
    c = _forward_coefficients(values)
    mean = float(c[0, 0].real)
    c[0, 0] = 0.0
    if dealias:
        c *= grid.dealias_mask
    return SpectralField2D(grid, c, mean)


def multiply(f: SpectralField2D, g: SpectralField2D) -> SpectralField2D:
    """Dealiased pointwise product ``f g`` (means included)."""
    f._check(g)
    return from_physical_product(f.values() * g.values(), f.grid)


# --------------------------------------------------------------------------
# Littlewood-Paley partition
# --------------------------------------------------------------------------


def _smooth_step(t: np.ndarray) -> np.ndarray:
    """``g(t) / (g(t) + g(1 - t))`` with ``g(t) = exp(-1/t)`` for ``t > 0``."""
    t = np.asarray(t, dtype=float)
    a = np.where(t > 0, t, 1.0)
    b = np.where(1 - t > 0, 1 - t, 1.0)
    ga = np.where(t > 0, np.exp(-1.0 / a), 0.0)
    gb = np.where(1 - t > 0, np.exp(-1.0 / b), 0.0)
    return ga / (ga + gb)


def chi(r) -> np.ndarray:
    """Radial cutoff: 1 for ``r <= 5/3``, 0 for ``r >= 12/5``, smooth between."""
    r = np.asarray(r, dtype=float)
    return _smooth_step((CHI_OUTER - r) / (CHI_OUTER - CHI_INNER))


def phi(r) -> np.ndarray:
    """Annular bump ``chi(r) - chi(2 r)`` supported in ``[5/6, 12/5]``."""
    r = np.asarray(r, dtype=float)
    return chi(r) - chi(2.0 * r)


@dataclass(frozen=True, eq=False)
class DyadicPartition:
    """Dyadic blocks ``phi(2^-k xi)`` for ``k_min <= k <= k_max`` on a grid.

    The telescoping sum of the blocks equals 1 exactly on the coverage annulus
    ``[(6/5) 2^k_min, (5/3) 2^k_max]``; fields supported there are called
    band-limited.
    """

    grid: Grid2D
    k_min: int
    k_max: int
    chi_inner: float = CHI_INNER
    chi_outer: float = CHI_OUTER
    masks: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.k_min > self.k_max:
            raise PartitionRangeError(f"k_min={self.k_min} exceeds k_max={self.k_max}")
        if CHI_OUTER * 2.0 ** self.k_max >= self.grid.nyquist:
            raise PartitionRangeError(
                f"(12/5)2^{self.k_max} = {CHI_OUTER * 2.0 ** self.k_max:g} does not stay below "
                f"the Nyquist frequency {self.grid.nyquist:g}")
        if self.masks is None:
            r = self.grid.radius
            m = np.stack([phi(r * 2.0 ** (-k)) for k in self.block_indices])
            m.setflags(write=False)
            object.__setattr__(self, "masks", m)

    @property
    def block_indices(self) -> range:
        return range(self.k_min, self.k_max + 1)

    @property
    def n_blocks(self) -> int:
        return self.k_max - self.k_min + 1

    @property
    def coverage(self) -> tuple[float, float]:
        """Radii on which the blocks sum to exactly one."""
        return (0.5 * CHI_OUTER * 2.0 ** self.k_min, CHI_INNER * 2.0 ** self.k_max)

    def index(self, k: int) -> int:
        if not (self.k_min <= k <= self.k_max):
            raise PartitionRangeError(f"block {k} outside [{self.k_min}, {self.k_max}]")
        return k - self.k_min

    def mask(self, k: int) -> np.ndarray:
        return self.masks[self.index(k)]

    @cached_property
    def _low_masks(self) -> np.ndarray:
        n = self.grid.n_points
        low = np.zeros((self.n_blocks + 1, n, n))
        np.cumsum(self.masks, axis=0, out=low[1:])
        low.setflags(write=False)
        return low

    def low_mask(self, k: int) -> np.ndarray:
        """Symbol of ``S_k`` = sum of blocks ``k_min .. k-1``."""
        if k > self.k_max + 1:
            raise PartitionRangeError(f"S_{k} needs k <= k_max + 1 = {self.k_max + 1}")
        j = max(k - self.k_min, 0)
        return self._low_masks[j]

    @cached_property
    def total_mask(self) -> np.ndarray:
        return self._low_masks[-1]

    @cached_property
    def coverage_mask(self) -> np.ndarray:
        lo, hi = self.coverage
        r = self.grid.radius
        return (r >= lo) & (r <= hi)

    def band_defect(self, f: SpectralField2D) -> float:
        """Relative L2 size of the part of ``f`` outside the coverage annulus."""
        c = f.coefficients
        total = np.sqrt(np.sum(np.abs(c) ** 2))
        if total == 0:
            return 0.0
        return float(np.sqrt(np.sum(np.abs(c[~self.coverage_mask]) ** 2)) / total)

    def is_band_limited(self, f: SpectralField2D, tol: float = 1e-12) -> bool:
        return self.band_defect(f) <= tol


def make_partition(grid: Grid2D, k_min: int = -4, k_max: int = 3) -> DyadicPartition:
    """Build the dyadic partition for blocks ``k_min .. k_max`` on ``grid``."""
    return DyadicPartition(grid, int(k_min), int(k_max))


def _check_partition(f: SpectralField2D, p: DyadicPartition):
    if f.grid != p.grid:
        raise GridMismatchError("field and partition live on different grids")


def dyadic_block(f: SpectralField2D, k: int, p: DyadicPartition) -> SpectralField2D:
    """``Delta_k f``: coefficients multiplied by ``phi(2^-k xi)``; zero mean."""
    _check_partition(f, p)
    return SpectralField2D(f.grid, f.coefficients * p.mask(k), 0.0)


def low_pass(f: SpectralField2D, k: int, p: DyadicPartition) -> SpectralField2D:
    """``S_k f = sum_{k_min <= j <= k-1} Delta_j f`` (the mean is excluded)."""
    _check_partition(f, p)
    return SpectralField2D(f.grid, f.coefficients * p.low_mask(k), 0.0)


# --------------------------------------------------------------------------
# Multipliers and derivatives
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MultiplierSymbol:
    """Homogeneous Fourier multiplier ``A(xi)`` of degree ``m``.

    Parameters
    ----------
    degree : float
    evaluator : callable
        ``evaluator(xi1, xi2)`` returns ``A`` on arrays of nonzero wave vectors.
    name : str
    at_zero : float
        Factor applied to the mean; 0 unless ``A`` extends continuously to 0.
    """

    degree: float
    evaluator: Callable[[np.ndarray, np.ndarray], np.ndarray]
    name: str = "A"
    at_zero: float = 0.0

    def __call__(self, xi1, xi2) -> np.ndarray:
        return np.asarray(self.evaluator(np.asarray(xi1, float), np.asarray(xi2, float)))

    def table(self, grid: Grid2D) -> np.ndarray:
        xi1, xi2 = grid.wavevectors
        a = np.array(np.broadcast_to(self(xi1[1:, :], xi2[1:, :]), xi1[1:, :].shape), dtype=complex)
        row0 = np.array(np.broadcast_to(self(xi1[0, 1:], xi2[0, 1:]), xi1[0, 1:].shape), dtype=complex)
        out = np.empty(grid.shape, dtype=complex)
        out[1:, :] = a
        out[0, 1:] = row0
        out[0, 0] = 0.0
        if not np.all(np.isfinite(out)):
            raise ValueError(f"symbol {self.name} is not finite on every nonzero grid mode")
        return out

    def homogeneity_defect(self, rays: np.ndarray, scales: Sequence[float]) -> float:
        """Max relative defect of ``A(lam xi) = lam^m A(xi)`` on sample rays."""
        rays = np.atleast_2d(np.asarray(rays, float))
        base = self(rays[:, 0], rays[:, 1])
        worst = 0.0
        for lam in scales:
            scaled = self(lam * rays[:, 0], lam * rays[:, 1])
            ref = lam ** self.degree * base
            denom = np.maximum(np.abs(ref), np.finfo(float).tiny)
            worst = max(worst, float(np.max(np.abs(scaled - ref) / denom)))
        return worst

    @classmethod
    def identity(cls) -> "MultiplierSymbol":
        return cls(0.0, lambda a, b: np.ones_like(a), "1", at_zero=1.0)

    @classmethod
    def modulus(cls) -> "MultiplierSymbol":
        return cls(1.0, lambda a, b: np.hypot(a, b), "|xi|")

    @classmethod
    def partial(cls, j: int) -> "MultiplierSymbol":
        if j not in (1, 2):
            raise ValueError("j must be 1 or 2")
        if j == 1:
            return cls(1.0, lambda a, b: 1j * a, "i xi_1")
        return cls(1.0, lambda a, b: 1j * b, "i xi_2")

    @classmethod
    def power(cls, s: float) -> "MultiplierSymbol":
        return cls(float(s), lambda a, b: np.hypot(a, b) ** s, f"|xi|^{s:g}")


def apply_multiplier(f: SpectralField2D, A: MultiplierSymbol) -> SpectralField2D:
    """``A(D) f``; the mean is multiplied by ``A.at_zero``."""
    return SpectralField2D(f.grid, f.coefficients * A.table(f.grid), A.at_zero * f.mean)


def _derivative_coefficients(f: SpectralField2D, a1: int, a2: int) -> np.ndarray:
    grid = f.grid
    xi1, xi2 = grid.wavevectors
    c = f.coefficients
    if a1:
        c = c * (1j * xi1) ** a1
        if a1 % 2:
            c = c * grid.nyquist_free[0]
    if a2:
        c = c * (1j * xi2) ** a2
        if a2 % 2:
            c = c * grid.nyquist_free[1]
    return c


def derivative(f: SpectralField2D, multi_index: Sequence[int]) -> SpectralField2D:
    """Spectral partial derivative ``d^a f`` with ``a = (a1, a2)``.

    Odd-order derivatives vanish on the Nyquist line of that axis so the
    result stays the transform of a real field.
    """
    a1, a2 = (int(a) for a in multi_index)
    if a1 < 0 or a2 < 0:
        raise ValueError("multi-index entries must be nonnegative")
    if a1 == a2 == 0:
        return f
    return SpectralField2D(f.grid, _derivative_coefficients(f, a1, a2), 0.0)


def gradient(f: SpectralField2D) -> VectorField2D:
    return VectorField2D(derivative(f, (1, 0)), derivative(f, (0, 1)))


def divergence(v: VectorField2D) -> SpectralField2D:
    return derivative(v.u1, (1, 0)) + derivative(v.u2, (0, 1))


def laplacian(f: SpectralField2D) -> SpectralField2D:
    r2 = f.grid.radius ** 2
    return SpectralField2D(f.grid, -r2 * f.coefficients, 0.0)


def deformation(v: VectorField2D) -> tuple[tuple[SpectralField2D, SpectralField2D],
                                           tuple[SpectralField2D, SpectralField2D]]:
    """Symmetric gradient ``D(v)_ij = (d_j v_i + d_i v_j) / 2``.

    The off-diagonal entry is one shared object, so symmetry is exact.
    """
    d11 = derivative(v.u1, (1, 0))
    d22 = derivative(v.u2, (0, 1))
    off = (derivative(v.u1, (0, 1)) + derivative(v.u2, (1, 0))) * 0.5
    return ((d11, off), (off, d22))


def lame(v: VectorField2D) -> VectorField2D:
    """Lame-type operator ``div D(v) + grad div v``."""
    d = deformation(v)
    dv = divergence(v)
    row1 = derivative(d[0][0], (1, 0)) + derivative(d[0][1], (0, 1)) + derivative(dv, (1, 0))
    row2 = derivative(d[1][0], (1, 0)) + derivative(d[1][1], (0, 1)) + derivative(dv, (0, 1))
    return VectorField2D(row1, row2)


# --------------------------------------------------------------------------
# Norms and point evaluation
# --------------------------------------------------------------------------


def lp_norm(f: SpectralField2D, p: float) -> float:
    """Rectangle-rule ``L^p`` norm of the physical field (mean included)."""
    vals = f.values()
    if np.isinf(p):
        return float(np.max(np.abs(vals)))
    if p <= 0:
        raise ValueError("p must be positive")
    cell = f.grid.dx ** 2
    if p == 2:
        return float(np.sqrt(cell * np.sum(vals * vals)))
    return float((cell * np.sum(np.abs(vals) ** p)) ** (1.0 / p))


def l2_norm(f: SpectralField2D | VectorField2D) -> float:
    """``L^2`` norm by Parseval; for vectors the Euclidean combination."""
    if isinstance(f, VectorField2D):
        return float(np.hypot(l2_norm(f.u1), l2_norm(f.u2)))
    c = f.coefficients
    area = f.grid.period ** 2
    s = np.sum(c.real * c.real + c.imag * c.imag) + f.mean * f.mean
    return float(np.sqrt(area * s))


def inner(f, g) -> float:
    """Real ``L^2`` pairing ``int f g dx`` for scalar or vector fields."""
    if isinstance(f, VectorField2D):
        return inner(f.u1, g.u1) + inner(f.u2, g.u2)
    f._check(g)
    area = f.grid.period ** 2
    a, b = f.coefficients, g.coefficients
    return float(area * (np.sum(a.real * b.real + a.imag * b.imag) + f.mean * g.mean))


def evaluate_at(f: SpectralField2D, points) -> np.ndarray:
    """Evaluate ``f`` at arbitrary points by direct Fourier summation.

    Parameters
    ----------
    points : array_like, shape (m, 2)
    """
    pts = np.atleast_2d(np.asarray(points, float))
    c = f.coefficients
    idx = np.nonzero(c)
    if idx[0].size == 0:
        return np.full(pts.shape[0], f.mean)
    xi1, xi2 = f.grid.wavevectors
    k1 = xi1[idx]
    k2 = xi2[idx]
    phase = np.exp(1j * (np.outer(pts[:, 0], k1) + np.outer(pts[:, 1], k2)))
    return f.mean + (phase @ c[idx]).real


# --------------------------------------------------------------------------
# Bernstein probes
# --------------------------------------------------------------------------


def _block_support_check(f: SpectralField2D, j: int):
    c = f.coefficients
    total = np.sqrt(np.sum(np.abs(c) ** 2))
    if total == 0:
        raise ValueError("field is zero; the Bernstein ratio is undefined")
    r = f.grid.radius
    outside = (r < PHI_LOWER * 2.0 ** j) | (r > PHI_UPPER * 2.0 ** j)
    leak = np.sqrt(np.sum(np.abs(c[outside]) ** 2)) / total
    if leak > 1e-12:
        raise BandLimitError(f"field is not supported in the block-{j} annulus (leak {leak:.2e})")


def _multi_indices(order: int) -> Iterable[tuple[int, int]]:
    return ((a, order - a) for a in range(order + 1))


def bernstein_ratio(f: SpectralField2D, j: int, p_in: float, q_out: float, order: int) -> float:
    """Normalized Bernstein quotient for a field localized in block ``j``.

    Returns ``max_{|g| = order} ||d^g f||_q / (2^{j order + 2 j (1/p - 1/q)} ||f||_p)``.
    """
    if p_in > q_out:
        raise ValueError("the forward Bernstein inequality needs p_in <= q_out")
    if f.mean != 0:
        f = f.without_mean()
    _block_support_check(f, j)
    inv = (lambda x: 0.0 if np.isinf(x) else 1.0 / x)
    scale = 2.0 ** (j * order + 2 * j * (inv(p_in) - inv(q_out)))
    base = lp_norm(f, p_in)
    top = max(lp_norm(derivative(f, g), q_out) for g in _multi_indices(order))
    return top / (scale * base)


def bernstein_reverse_ratio(f: SpectralField2D, j: int, p: float, order: int) -> float:
    """Reverse Bernstein quotient ``2^{-j order} max ||d^b f||_p / ||f||_p``.

    For a block-``j`` field this is bounded below by a constant independent of ``j``.
    """
    if f.mean != 0:
        f = f.without_mean()
    _block_support_check(f, j)
    top = max(lp_norm(derivative(f, b), p) for b in _multi_indices(order))
    return 2.0 ** (-j * order) * top / lp_norm(f, p)
