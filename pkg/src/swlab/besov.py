"""Homogeneous, hybrid, time-space and weighted dyadic norms.

All norms act on the mean-free part of a field: block sums start at the
partition's ``k_min`` and never see the zero mode.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np
from scipy.integrate import trapezoid

from .errors import GridMismatchError
from .spectral import (
    DyadicPartition,
    SpectralField2D,
    VectorField2D,
    Grid2D,
    _to_values,
)

__all__ = [
    "BesovSpec",
    "HybridBesovSpec",
    "WeightParams",
    "Trajectory",
    "BlockEnergy",
    "CoverageWarning",
    "block_norms",
    "besov_norm",
    "hybrid_norm",
    "time_lebesgue",
    "time_space_norm",
    "plain_time_norm",
    "weight_e",
    "weight_omega",
    "omega_tail_bound",
    "weighted_norm_E",
    "weighted_norm_E_hybrid",
    "block_energy",
    "block_energy_parts",
    "norm_record",
]

Field = Union[SpectralField2D, VectorField2D]


class CoverageWarning(UserWarning):
    """A field carries energy outside the partition's coverage annulus."""


def _check_exponent(x: float, name: str):
    if not (x >= 1 or np.isinf(x)):
        raise ValueError(f"{name} must lie in [1, inf], got {x}")


@dataclass(frozen=True)
class BesovSpec:
    """Index triple ``(s, p, r)`` of a homogeneous Besov norm."""

    s: float
    p: float = 2.0
    r: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.s):
            raise ValueError("s must be finite")
        _check_exponent(self.p, "p")
        _check_exponent(self.r, "r")

    def weights(self, ks: np.ndarray) -> np.ndarray:
        return 2.0 ** (self.s * ks)

    def label(self) -> str:
        return f"B^{self.s:g}_{{{self.p:g},{self.r:g}}}"


@dataclass(frozen=True)
class HybridBesovSpec:
    """Hybrid index: weight ``2^{ks}`` for ``k <= 0`` and ``2^{k sigma}`` for ``k >= 1``.

    The hybrid norm is always ``L^2``-based with ``l^1`` summation.
    """

    s: float
    sigma: float

    def __post_init__(self):
        if not (np.isfinite(self.s) and np.isfinite(self.sigma)):
            raise ValueError("hybrid indices must be finite")

    @property
    def p(self) -> float:
        return 2.0

    @property
    def r(self) -> float:
        return 1.0

    def weights(self, ks: np.ndarray) -> np.ndarray:
        ks = np.asarray(ks, float)
        return np.where(ks <= 0, 2.0 ** (self.s * ks), 2.0 ** (self.sigma * ks))

    def label(self) -> str:
        return f"Btilde^{{{self.s:g},{self.sigma:g}}}"


NormSpec = Union[BesovSpec, HybridBesovSpec]


@dataclass(frozen=True)
class WeightParams:
    """Parameters of the time weights ``e_k^r`` and ``omega_k``.

    Parameters
    ----------
    c : float
        Decay constant in ``1 - exp(-c r 4^k t)``.
    T : float
        Horizon at which weighted norms are evaluated.
    k_max : int
        Last block kept in the ``omega_k`` tail sum.
    """

    c: float = 0.125
    T: float = 0.0
    k_max: int = 3

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("c must be positive")
        if not self.T >= 0:
            raise ValueError("T must be nonnegative")


# --------------------------------------------------------------------------
# Block norms
# --------------------------------------------------------------------------


def _components(f: Field) -> tuple[SpectralField2D, ...]:
    return f.components if isinstance(f, VectorField2D) else (f,)


def _block_l2_table(f: Field, p: DyadicPartition) -> np.ndarray:
    area = p.grid.period ** 2
    acc = np.zeros(p.n_blocks)
    masks2 = p.masks ** 2
    for comp in _components(f):
        c = comp.coefficients
        power = c.real * c.real + c.imag * c.imag
        acc += np.tensordot(masks2, power, axes=([1, 2], [0, 1]))
    return np.sqrt(area * acc)


def block_norms(f: Field, p: DyadicPartition, lebesgue: float = 2.0) -> np.ndarray:
    """``||Delta_k f||_{L^p}`` for every block of the partition.

    Vector fields use the pointwise Euclidean magnitude.
    """
    if f.grid != p.grid:
        raise GridMismatchError("field and partition live on different grids")
    if lebesgue == 2:
        return _block_l2_table(f, p)
    out = np.empty(p.n_blocks)
    cell = p.grid.dx ** 2
    for i in range(p.n_blocks):
        mag2 = 0.0
        for comp in _components(f):
            v = _to_values(comp.coefficients * p.masks[i], 0.0)
            mag2 = mag2 + v * v
        mag = np.sqrt(mag2)
        if np.isinf(lebesgue):
            out[i] = np.max(mag)
        else:
            out[i] = (cell * np.sum(mag ** lebesgue)) ** (1.0 / lebesgue)
    return out


def _lr(values: np.ndarray, r: float, axis=-1) -> np.ndarray:
    values = np.abs(values)
    if np.isinf(r):
        return np.max(values, axis=axis)
    if r == 1:
        return np.sum(values, axis=axis)
    return np.sum(values ** r, axis=axis) ** (1.0 / r)


def _warn_coverage(f: Field, p: DyadicPartition):
    defect = max(p.band_defect(c) for c in _components(f))
    if defect > 1e-12:
        warnings.warn(f"field leaks {defect:.2e} of its L2 mass outside the partition coverage",
                      CoverageWarning, stacklevel=3)


def besov_norm(f: Field, spec: BesovSpec, p: DyadicPartition, check_coverage: bool = True) -> float:
    """``(sum_k 2^{ksr} ||Delta_k f||_p^r)^{1/r}`` over the partition range."""
    if check_coverage:
        _warn_coverage(f, p)
    ks = np.arange(p.k_min, p.k_max + 1)
    return float(_lr(spec.weights(ks) * block_norms(f, p, spec.p), spec.r))


def hybrid_norm(f: Field, spec: HybridBesovSpec, p: DyadicPartition,
                check_coverage: bool = True) -> float:
    """``sum_{k<=0} 2^{ks} ||Delta_k f||_2 + sum_{k>0} 2^{k sigma} ||Delta_k f||_2``."""
    if check_coverage:
        _warn_coverage(f, p)
    ks = np.arange(p.k_min, p.k_max + 1)
    return float(np.sum(spec.weights(ks) * block_norms(f, p, 2.0)))


def _norm_from_blocks(blocks: np.ndarray, spec: NormSpec, ks: np.ndarray) -> np.ndarray:
    return _lr(spec.weights(ks) * blocks, spec.r, axis=-1)


# --------------------------------------------------------------------------
# Trajectories
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time samples of one or more named fields with cached block norms.

    Parameters
    ----------
    partition : DyadicPartition
    times : ndarray
        Strictly increasing sample instants.
    fields : mapping of str to list of fields, or None
        Full field series per component (``"h"``, ``"u"``, ...). May be None
        when only block tables are known (e.g. read back from disk).
    block_l2 : mapping of str to ndarray, shape (n_times, n_blocks)
        ``||Delta_k f(t_i)||_2`` per component.
    meta : dict
        Free-form run metadata and monitors.
    """

    partition: DyadicPartition
    times: np.ndarray
    fields: Mapping[str, list] | None
    block_l2: Mapping[str, np.ndarray]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, float)
        if t.ndim != 1 or t.size == 0:
            raise ValueError("a trajectory needs at least one sample time")
        if np.any(np.diff(t) <= 0):
            raise ValueError("sample times must be strictly increasing")
        object.__setattr__(self, "times", t)
        for name, tab in self.block_l2.items():
            if tab.shape != (t.size, self.partition.n_blocks):
                raise ValueError(f"block table for {name!r} has shape {tab.shape}")
        if self.fields is not None:
            for name, series in self.fields.items():
                if len(series) != t.size:
                    raise ValueError(f"series {name!r} has {len(series)} samples for {t.size} times")
                for f in series:
                    if f.grid != self.partition.grid:
                        raise GridMismatchError(f"series {name!r} leaves the partition grid")

    @classmethod
    def from_series(cls, partition: DyadicPartition, times: Sequence[float],
                    series: Mapping[str, Sequence[Field]], keep_fields: bool = True,
                    meta: dict | None = None) -> "Trajectory":
        tables = {name: np.array([_block_l2_table(f, partition) for f in s])
                  for name, s in series.items()}
        fields = {name: list(s) for name, s in series.items()} if keep_fields else None
        return cls(partition, np.asarray(times, float), fields, tables, dict(meta or {}))

    @classmethod
    def from_blocks(cls, partition: DyadicPartition, times: Sequence[float],
                    tables: Mapping[str, np.ndarray], meta: dict | None = None) -> "Trajectory":
        return cls(partition, np.asarray(times, float), None,
                   {k: np.asarray(v, float) for k, v in tables.items()}, dict(meta or {}))

    @property
    def grid(self) -> Grid2D:
        return self.partition.grid

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def components(self) -> list[str]:
        return list(self.block_l2)

    def series(self, name: str) -> list:
        if self.fields is None or name not in self.fields:
            raise KeyError(f"trajectory holds no field series {name!r}")
        return self.fields[name]

    def blocks(self, name: str) -> np.ndarray:
        return self.block_l2[name]

    def restrict(self, T: float) -> "Trajectory":
        """Samples with ``t <= T`` (at least the first one)."""
        n = max(int(np.searchsorted(self.times, T * (1 + 1e-12) + 1e-15, side="right")), 1)
        fields = None if self.fields is None else {k: v[:n] for k, v in self.fields.items()}
        return Trajectory(self.partition, self.times[:n], fields,
                          {k: v[:n] for k, v in self.block_l2.items()}, dict(self.meta))

    def consistency_defect(self) -> float:
        """Max relative gap between cached block norms and recomputed ones."""
        if self.fields is None:
            return 0.0
        worst = 0.0
        for name, series in self.fields.items():
            fresh = np.array([_block_l2_table(f, self.partition) for f in series])
            scale = max(float(np.max(np.abs(fresh))), np.finfo(float).tiny)
            worst = max(worst, float(np.max(np.abs(fresh - self.block_l2[name]))) / scale)
        return worst


def time_lebesgue(values: np.ndarray, times: np.ndarray, rho: float, axis: int = 0) -> np.ndarray:
    """``L^rho`` norm in time by the trapezoid rule (max for ``rho = inf``)."""
    values = np.abs(np.asarray(values, float))
    if np.isinf(rho):
        return np.max(values, axis=axis)
    if times.size < 2:
        return np.zeros(np.delete(values.shape, axis)) if values.ndim > 1 else np.float64(0.0)
    return trapezoid(values ** rho, times, axis=axis) ** (1.0 / rho)


def _per_time_blocks(traj: Trajectory, component: str, lebesgue: float) -> np.ndarray:
    if lebesgue == 2:
        return traj.blocks(component)
    return np.array([block_norms(f, traj.partition, lebesgue) for f in traj.series(component)])


def time_space_norm(traj: Trajectory, rho: float, spec: NormSpec, component: str = "h") -> float:
    """Chemin-Lerner norm: time ``L^rho`` inside the dyadic sum.

    ``|| 2^{ks} ||Delta_k f||_{L^rho_T(L^p)} ||_{l^r}``.
    """
    _check_exponent(rho, "rho")
    ks = np.arange(traj.partition.k_min, traj.partition.k_max + 1)
    blocks = _per_time_blocks(traj, component, spec.p)
    per_block = time_lebesgue(blocks, traj.times, rho, axis=0)
    return float(_norm_from_blocks(per_block, spec, ks))


def plain_time_norm(traj: Trajectory, rho: float, spec: NormSpec, component: str = "h") -> float:
    """Bochner norm ``|| ||f(t)||_{B} ||_{L^rho_T}`` (time norm outside)."""
    _check_exponent(rho, "rho")
    ks = np.arange(traj.partition.k_min, traj.partition.k_max + 1)
    blocks = _per_time_blocks(traj, component, spec.p)
    per_time = _norm_from_blocks(blocks, spec, ks)
    return float(time_lebesgue(per_time, traj.times, rho, axis=0))


# --------------------------------------------------------------------------
# Time weights
# --------------------------------------------------------------------------


def weight_e(k: int, r: float, t, c: float) -> np.ndarray:
    """``e_k^r(t) = (1 - exp(-c r 4^k t))^{1/r}``."""
    t = np.asarray(t, float)
    if np.any(t < 0):
        raise ValueError("t must be nonnegative")
    base = -np.expm1(-c * r * 4.0 ** k * t)
    return base ** (1.0 / r)


def weight_omega(k: int, t, params: WeightParams) -> np.ndarray:
    """``omega_k(t) = sum_{k <= j <= k_max} 2^{-(j-k)} (e_j^1(t) + e_j^2(t))``."""
    t = np.asarray(t, float)
    total = np.zeros_like(t)
    for j in range(k, params.k_max + 1):
        total = total + 2.0 ** (-(j - k)) * (weight_e(j, 1.0, t, params.c) + weight_e(j, 2.0, t, params.c))
    return total


def omega_tail_bound(k: int, k_max: int) -> float:
    """Upper bound for the blocks beyond ``k_max`` dropped from ``omega_k``."""
    return 2.0 ** (-(k_max - k) + 2)


def _sup_blocks(traj: Trajectory, component: str, T: float) -> np.ndarray:
    part = traj.restrict(T)
    return np.max(part.blocks(component), axis=0)


def weighted_norm_E(traj: Trajectory, s: float, params: WeightParams, component: str = "h") -> float:
    """``sum_k 2^{ks} omega_k(T) ||Delta_k f||_{L^inf_T(L^2)}``."""
    ks = np.arange(traj.partition.k_min, traj.partition.k_max + 1)
    omegas = np.array([float(weight_omega(int(k), params.T, params)) for k in ks])
    return float(np.sum(2.0 ** (s * ks) * omegas * _sup_blocks(traj, component, params.T)))


def weighted_norm_E_hybrid(traj: Trajectory, s1: float, s2: float, params: WeightParams,
                           component: str = "h") -> float:
    """Weighted norm with index ``s1`` on ``k <= 0`` and ``s2`` on ``k >= 1``."""
    ks = np.arange(traj.partition.k_min, traj.partition.k_max + 1)
    omegas = np.array([float(weight_omega(int(k), params.T, params)) for k in ks])
    w = np.where(ks <= 0, 2.0 ** (s1 * ks), 2.0 ** (s2 * ks))
    return float(np.sum(w * omegas * _sup_blocks(traj, component, params.T)))


# --------------------------------------------------------------------------
# Block energies
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BlockEnergy:
    """Dyadic energy of block ``k``; ``regime`` is ``"high"`` for ``k >= 1``."""

    k: int
    value: float
    regime: str

    def __post_init__(self):
        if self.regime not in ("high", "low"):
            raise ValueError("regime must be 'high' or 'low'")
        if not self.value >= 0:
            raise ValueError("block energy must be nonnegative")


def block_energy_parts(h: SpectralField2D, u: VectorField2D, k: int,
                       p: DyadicPartition) -> dict[str, float]:
    """Quadratic pieces of the block-``k`` energy.

    Returns ``u2 = ||u_k||^2``, ``grad_h2 = ||grad h_k||^2``, ``h2 = ||h_k||^2``
    and ``cross = (u_k, grad h_k)``.
    """
    if h.grid != p.grid or u.grid != p.grid:
        raise GridMismatchError("fields and partition live on different grids")
    m2 = p.mask(k) ** 2
    area = p.grid.period ** 2
    xi1, xi2 = p.grid.wavevectors
    a, b1, b2 = h.coefficients, u.u1.coefficients, u.u2.coefficients
    h_pow = a.real ** 2 + a.imag ** 2
    h2 = area * float(np.sum(m2 * h_pow))
    grad_h2 = area * float(np.sum(m2 * p.grid.radius ** 2 * h_pow))
    u2 = area * float(np.sum(m2 * (b1.real ** 2 + b1.imag ** 2 + b2.real ** 2 + b2.imag ** 2)))
    # (u_k, grad h_k) = area * sum Re(conj(b_j) i xi_j a) phi^2
    grad = 1j * (xi1 * a), 1j * (xi2 * a)
    cross = area * float(np.sum(m2 * ((np.conj(b1) * grad[0]).real + (np.conj(b2) * grad[1]).real)))
    return {"u2": u2, "grad_h2": grad_h2, "h2": h2, "cross": cross}


def block_energy(h: SpectralField2D, u: VectorField2D, k: int, p: DyadicPartition) -> BlockEnergy:
    """``E_hk`` for ``k >= 1`` or ``E_lk`` for ``k < 1``.

    ``E_hk^2 = ||u_k||^2 / 2 + ||grad h_k||^2 + (u_k, grad h_k)`` and
    ``E_lk^2 = ||u_k||^2 / 2 + ||h_k||^2 / 2 + (u_k, grad h_k) / 8``.
    """
    q = block_energy_parts(h, u, k, p)
    if k >= 1:
        sq = 0.5 * q["u2"] + q["grad_h2"] + q["cross"]
        regime = "high"
        scale = q["u2"] + q["grad_h2"]
    else:
        sq = 0.5 * q["u2"] + 0.5 * q["h2"] + 0.125 * q["cross"]
        regime = "low"
        scale = q["u2"] + q["h2"]
    if sq < 0:
        if sq < -1e-12 * max(scale, 1.0):
            raise ArithmeticError(f"negative block energy {sq:.3e} at k={k}; partition is broken")
        sq = 0.0
    return BlockEnergy(int(k), float(np.sqrt(sq)), regime)


def norm_record(name: str, spec, value: float, partition: DyadicPartition,
                truncation_bound: float = 0.0, **extra) -> dict:
    """JSON-ready record of one norm evaluation."""
    rec = {
        "schema": "swlab.norm/1",
        "norm": name,
        "spec": _spec_dict(spec),
        "value": float(value),
        "partition": {"k_min": partition.k_min, "k_max": partition.k_max},
        "truncation_bound": float(truncation_bound),
    }
    rec.update(extra)
    return rec


def _spec_dict(spec) -> dict:
    if isinstance(spec, BesovSpec):
        return {"kind": "besov", "s": spec.s, "p": _num(spec.p), "r": _num(spec.r)}
    if isinstance(spec, HybridBesovSpec):
        return {"kind": "hybrid", "s": spec.s, "sigma": spec.sigma}
    if isinstance(spec, dict):
        return dict(spec)
    return {"kind": str(spec)}


def _num(x: float):
    return "inf" if np.isinf(x) else float(x)
