"""Bony paraproduct decomposition and the transport commutator pieces.

Products are formed in physical space from block samples and transformed back
once, so a sum of many block products costs one forward transform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridMismatchError
from .spectral import (
    DyadicPartition,
    MultiplierSymbol,
    SpectralField2D,
    VectorField2D,
    _to_values,
    from_physical_product,
    multiply,
)

__all__ = [
    "BonyParts",
    "CommutatorTerms",
    "paraprod",
    "remainder",
    "tprime",
    "bony_decompose",
    "commutator_terms",
    "commutator_terms_all",
    "commutator_remainder_norms",
]


@dataclass(frozen=True, eq=False)
class BonyParts:
    """``f g = T_f g + T_g f + R(f, g) + mean_terms``.

    ``mean_terms`` collects ``mean_f g' + mean_g f' + mean_f mean_g`` where the
    primes denote mean-free parts.
    """

    Tfg: SpectralField2D
    Tgf: SpectralField2D
    R: SpectralField2D
    mean_terms: SpectralField2D

    def total(self) -> SpectralField2D:
        return self.Tfg + self.Tgf + self.R + self.mean_terms


def _check(f: SpectralField2D, g: SpectralField2D, p: DyadicPartition):
    if f.grid != g.grid or f.grid != p.grid:
        raise GridMismatchError("fields and partition must share a grid")


def _block_values(f: SpectralField2D, p: DyadicPartition) -> np.ndarray:
    """Physical samples of every block ``Delta_k f``."""
    return np.stack([_to_values(f.coefficients * m, 0.0) for m in p.masks])


def _low_values(blocks: np.ndarray) -> np.ndarray:
    """Samples of ``S_{k-1} f`` (blocks strictly below ``k-1``) for every ``k``.

    Row ``i`` holds the sum of block rows ``0 .. i-2``.
    """
    nb = blocks.shape[0]
    out = np.zeros_like(blocks)
    run = np.zeros_like(blocks[0])
    for i in range(2, nb):
        run = run + blocks[i - 2]
        out[i] = run
    return out


def _paraprod_values(fb: np.ndarray, gb: np.ndarray) -> np.ndarray:
    low = _low_values(fb)
    return np.einsum("kij,kij->ij", low, gb)


def _remainder_values(fb: np.ndarray, gb: np.ndarray) -> np.ndarray:
    nb = fb.shape[0]
    acc = np.zeros_like(fb[0])
    for i in range(nb):
        lo, hi = max(i - 1, 0), min(i + 1, nb - 1)
        acc += fb[i] * gb[lo:hi + 1].sum(axis=0)
    return acc


def paraprod(f: SpectralField2D, g: SpectralField2D, p: DyadicPartition) -> SpectralField2D:
    """``T_f g = sum_k S_{k-1} f Delta_k g`` over the partition range, dealiased."""
    _check(f, g, p)
    vals = _paraprod_values(_block_values(f, p), _block_values(g, p))
    return from_physical_product(vals, p.grid)


def remainder(f: SpectralField2D, g: SpectralField2D, p: DyadicPartition) -> SpectralField2D:
    """``R(f, g) = sum_k sum_{|k'-k| <= 1} Delta_k f Delta_k' g``, dealiased."""
    _check(f, g, p)
    vals = _remainder_values(_block_values(f, p), _block_values(g, p))
    return from_physical_product(vals, p.grid)


def tprime(f: SpectralField2D, g: SpectralField2D, p: DyadicPartition) -> SpectralField2D:
    """``T'_f g = T_f g + R(f, g)``."""
    _check(f, g, p)
    fb, gb = _block_values(f, p), _block_values(g, p)
    return from_physical_product(_paraprod_values(fb, gb) + _remainder_values(fb, gb), p.grid)


def _mean_terms(f: SpectralField2D, g: SpectralField2D) -> SpectralField2D:
    c = (f.mean * g.coefficients + g.mean * f.coefficients) * f.grid.dealias_mask
    return SpectralField2D(f.grid, c, f.mean * g.mean)


def bony_decompose(f: SpectralField2D, g: SpectralField2D, p: DyadicPartition) -> BonyParts:
    """Split the dealiased product ``f g`` into paraproducts, remainder and mean terms."""
    _check(f, g, p)
    fb, gb = _block_values(f, p), _block_values(g, p)
    tfg = from_physical_product(_paraprod_values(fb, gb), p.grid)
    if f is g:
        tgf = tfg
    else:
        tgf = from_physical_product(_paraprod_values(gb, fb), p.grid)
    r = from_physical_product(_remainder_values(fb, gb), p.grid)
    return BonyParts(tfg, tgf, r, _mean_terms(f, g))


# --------------------------------------------------------------------------
# Commutator pieces of (A(D) Delta_k (v . grad h), A(D) Delta_k h)
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CommutatorTerms:
    """Pieces of ``A(D) Delta_k (v . grad h)``.

    With ``Sbar_j v = S_j v + mean(v)`` and ``w_j = d_j h``:

    * ``F0 = A Delta_k (sum_j T'_{w_j} v^j)``
    * ``F1 = sum_{|k'-k|<=3} (A Delta_k (Sbar_{k'-1} v^j Delta_k' w_j)
      - Sbar_{k'-1} v^j A Delta_k Delta_k' w_j)``
    * ``F2 = sum_{|k'-k|<=3} (S_{k'-1} - S_{k-1}) v^j A Delta_k Delta_k' w_j``
    * ``F3 = -1/2 S_{k-1}(div v) A Delta_k h``
    * ``transport = Sbar_{k-1} v^j A Delta_k w_j``

    For band-limited ``h``: ``direct = F0 + F1 + F2 + transport`` and
    ``(transport, A Delta_k h) = (F3, A Delta_k h)``.
    """

    k: int
    F0: SpectralField2D
    F1: SpectralField2D
    F2: SpectralField2D
    F3: SpectralField2D
    transport: SpectralField2D
    direct: SpectralField2D
    target: SpectralField2D

    def reconstruction(self) -> SpectralField2D:
        return self.F0 + self.F1 + self.F2 + self.transport


def _xi_tables(p: DyadicPartition):
    xi1, xi2 = p.grid.wavevectors
    ny1, ny2 = p.grid.nyquist_free
    return (1j * xi1 * ny1, 1j * xi2 * ny2)


def commutator_terms_all(v: VectorField2D, h: SpectralField2D, A: MultiplierSymbol,
                         p: DyadicPartition, ks=None) -> dict[int, CommutatorTerms]:
    """Commutator pieces for every requested block, sharing the common work."""
    if v.grid != h.grid or h.grid != p.grid:
        raise GridMismatchError("fields and partition must share a grid")
    grid = p.grid
    ks = list(p.block_indices if ks is None else ks)
    nb = p.n_blocks
    d = _xi_tables(p)
    a_tab = A.table(grid)
    vcomp = v.components
    w_coef = [d[j] * h.coefficients for j in range(2)]
    w_fields = [SpectralField2D(grid, w_coef[j], 0.0) for j in range(2)]

    # Low-pass samples of each velocity component: low[j][i] = S_{k_i - 1} v^j
    v_blocks = [_block_values(vcomp[j], p) for j in range(2)]
    v_low = [_low_values(b) for b in v_blocks]
    # Block samples of w_j
    w_blocks = [_block_values(w_fields[j], p) for j in range(2)]

    # F0 is shared up to the outer A Delta_k
    t_prime = np.zeros(grid.shape)
    for j in range(2):
        t_prime += _paraprod_values(w_blocks[j], v_blocks[j]) + _remainder_values(w_blocks[j], v_blocks[j])
    t_prime_hat = from_physical_product(t_prime, grid).coefficients

    direct_hat = multiply(vcomp[0], w_fields[0]).coefficients + multiply(vcomp[1], w_fields[1]).coefficients

    # S_{k-1}(div v) samples for each k
    div_coef = d[0] * vcomp[0].coefficients + d[1] * vcomp[1].coefficients
    div_blocks = np.stack([_to_values(div_coef * m, 0.0) for m in p.masks])
    div_low = _low_values(div_blocks)

    out = {}
    for k in ks:
        i = p.index(k)
        mk = p.masks[i]
        ak = a_tab * mk
        f1a = np.zeros(grid.shape)
        f1b = np.zeros(grid.shape)
        f2 = np.zeros(grid.shape)
        trans = np.zeros(grid.shape)
        for j in range(2):
            mean_j = vcomp[j].mean
            for kp in range(max(k - 3, p.k_min), min(k + 3, p.k_max) + 1):
                ip = p.index(kp)
                sbar = v_low[j][ip] + mean_j
                f1a += sbar * w_blocks[j][ip]
                if abs(kp - k) <= 1:
                    akk = _to_values(ak * p.masks[ip] * w_coef[j], 0.0)
                    f1b += sbar * akk
                    f2 += (v_low[j][ip] - v_low[j][i]) * akk
            akw = _to_values(ak * w_coef[j], 0.0)
            trans += (v_low[j][i] + mean_j) * akw
        akh_vals = _to_values(ak * h.coefficients, 0.0)
        f1 = ak * from_physical_product(f1a, grid).coefficients - from_physical_product(f1b, grid).coefficients
        F0 = SpectralField2D(grid, ak * t_prime_hat, 0.0)
        F1 = SpectralField2D(grid, f1, 0.0)
        F2 = from_physical_product(f2, grid)
        F3 = from_physical_product(-0.5 * div_low[i] * akh_vals, grid)
        T = from_physical_product(trans, grid)
        direct = SpectralField2D(grid, ak * direct_hat, 0.0)
        target = SpectralField2D(grid, ak * h.coefficients, 0.0)
        out[k] = CommutatorTerms(k, F0, F1, F2, F3, T, direct, target)
    return out


def commutator_terms(v: VectorField2D, h: SpectralField2D, k: int, A: MultiplierSymbol,
                     p: DyadicPartition) -> CommutatorTerms:
    """Commutator pieces of ``A(D) Delta_k (v . grad h)`` for one block."""
    p.index(k)
    return commutator_terms_all(v, h, A, p, ks=[k])[k]


def commutator_remainder_norms(v: VectorField2D, h: SpectralField2D, symbols,
                               p: DyadicPartition) -> np.ndarray:
    """``||F0 + F1 + F2 + F3||_2`` for every block, without forming the pieces.

    Uses ``F0 + F1 + F2 = direct - transport``, so per block only the transport
    and ``F3`` products are formed (one forward transform per block).

    Parameters
    ----------
    v, h : fields
    symbols : MultiplierSymbol or sequence of them
    p : DyadicPartition

    Returns
    -------
    ndarray, shape (n_blocks,) or (n_symbols, n_blocks)
    """
    if v.grid != h.grid or h.grid != p.grid:
        raise GridMismatchError("fields and partition must share a grid")
    single = isinstance(symbols, MultiplierSymbol)
    symbols = [symbols] if single else list(symbols)
    grid = p.grid
    d = _xi_tables(p)
    vcomp = v.components
    w_coef = [d[j] * h.coefficients for j in range(2)]
    direct_hat = from_physical_product(
        vcomp[0].values() * _to_values(w_coef[0], 0.0) + vcomp[1].values() * _to_values(w_coef[1], 0.0),
        grid).coefficients
    v_low = [_low_values(_block_values(vcomp[j], p)) for j in range(2)]
    div_coef = d[0] * vcomp[0].coefficients + d[1] * vcomp[1].coefficients
    div_low = _low_values(np.stack([_to_values(div_coef * m, 0.0) for m in p.masks]))
    area = grid.period ** 2
    out = np.empty((len(symbols), p.n_blocks))
    for a, A in enumerate(symbols):
        a_tab = A.table(grid)
        for i in range(p.n_blocks):
            ak = a_tab * p.masks[i]
            acc = -0.5 * div_low[i] * _to_values(ak * h.coefficients, 0.0)
            for j in range(2):
                acc -= (v_low[j][i] + vcomp[j].mean) * _to_values(ak * w_coef[j], 0.0)
            c = ak * direct_hat + from_physical_product(acc, grid).coefficients
            out[a, i] = np.sqrt(area * np.sum(c.real * c.real + c.imag * c.imag))
    return out[0] if single else out
