"""Ratio extraction for the transport commutator bounds.

For the block pairings the reported ratio of one sample is the partial sum
``sum_k alpha_k`` of the empirical sequence

``alpha_k = |pairing_k| / (2^{-k(s_k - m)} ||v||_{B^2} ||f||_{Btilde^{s1,s2}} ||A(D) Delta_k f||_2)``

with ``s_k = s2`` for ``k >= 1`` and ``s1`` for ``k <= 0``; the high and low
block ranges are reported separately.

Each pairing is linear in ``v``: ``pairing_k = <v, K_k>`` with a representer
``K_k`` built from ``f`` (and ``g``). A velocity drawn independently of ``f``
gives pairings with Gaussian-like tails, whose sample maximum keeps growing
with the corpus. Each sample therefore pairs the random ``f`` with the
velocity ``v = P(sum_k c_k K_k)``, the aligned direction in the corpus band,
where ``c_k`` is the inverse of the ``v``-free part of the denominator. This
is a worst-case probe, never weaker than a random ``v``.
"""

from __future__ import annotations

import math
from dataclasses import replace
from typing import Iterable

import numpy as np
from scipy.integrate import trapezoid

from ..besov import WeightParams, block_norms, weight_omega
from ..paraproduct import commutator_remainder_norms
from ..spectral import MultiplierSymbol, SpectralField2D, VectorField2D, from_physical_product
from .corpus import Corpus, random_field, random_trajectory, random_vector_trajectory
from .products import besov_from_blocks
from .report import EstimateReport, RatioTable, assess

__all__ = [
    "SYMBOLS",
    "PAIRING_CASES",
    "CROSS_CASES",
    "block_pairings",
    "cross_pairings",
    "alpha_sequence",
    "pairing_representers",
    "aligned_velocity",
    "commutator_ratios",
    "weighted_commutator_ratios",
    "verify_commutator_estimates",
]

SYMBOLS = {
    "one": (MultiplierSymbol.identity(), 0),
    "modulus": (MultiplierSymbol.modulus(), 1),
    "partial1": (MultiplierSymbol.partial(1), 1),
}
PAIRING_CASES = [(0.0, 1.0), (1.0, 1.0)]
CROSS_CASES = [((0.0, 1.0), (0.0, 0.0))]
WEIGHTED_RHO = (0.0, 0.5, 1.0)
# Time samples of the weighted commutator trajectories.
WEIGHTED_TIMES = 3


def _advect(v: VectorField2D, f: SpectralField2D) -> SpectralField2D:
    """Dealiased ``v . grad f``."""
    grid = f.grid
    xi1, xi2 = grid.wavevectors
    ny1, ny2 = grid.nyquist_free
    g1 = SpectralField2D(grid, 1j * xi1 * ny1 * f.coefficients, 0.0).values()
    g2 = SpectralField2D(grid, 1j * xi2 * ny2 * f.coefficients, 0.0).values()
    return from_physical_product(v.u1.values() * g1 + v.u2.values() * g2, grid)


def _pair_table(a: np.ndarray, b: np.ndarray, weight: np.ndarray, p) -> np.ndarray:
    """``area * sum_xi phi_k^2 weight Re(a conj(b))`` for every block."""
    prod = (weight * a * np.conj(b)).real
    return p.grid.period ** 2 * np.tensordot(p.masks ** 2, prod, axes=([1, 2], [0, 1]))


def block_pairings(v: VectorField2D, f: SpectralField2D, A: MultiplierSymbol, p) -> tuple[np.ndarray, np.ndarray]:
    """``(A Delta_k (v . grad f), A Delta_k f)`` and ``||A Delta_k f||_2`` for every block."""
    a = A.table(p.grid)
    a2 = (a * np.conj(a)).real
    X = _advect(v, f).coefficients
    pair = _pair_table(X, f.coefficients, a2, p)
    norm = np.sqrt(np.maximum(_pair_table(f.coefficients, f.coefficients, a2, p), 0.0))
    return pair, norm


def cross_pairings(v: VectorField2D, f: SpectralField2D, g: SpectralField2D, A: MultiplierSymbol, p):
    """``(A Delta_k(v . grad f), Delta_k g) + (Delta_k(v . grad g), A Delta_k f)`` per block,
    with ``||A Delta_k f||_2`` and ``||Delta_k g||_2``."""
    a = A.table(p.grid)
    ones = np.ones(p.grid.shape)
    Xf = _advect(v, f).coefficients
    Xg = _advect(v, g).coefficients
    pair = _pair_table(a * Xf, g.coefficients, ones, p) + _pair_table(Xg, a * f.coefficients, ones, p)
    a2 = (a * np.conj(a)).real
    nf = np.sqrt(np.maximum(_pair_table(f.coefficients, f.coefficients, a2, p), 0.0))
    ng = np.sqrt(np.maximum(_pair_table(g.coefficients, g.coefficients, ones, p), 0.0))
    return pair, nf, ng


def _hybrid(blocks: np.ndarray, ks: np.ndarray, s1: float, s2: float) -> float:
    return float(np.sum(np.where(ks <= 0, 2.0 ** (s1 * ks), 2.0 ** (s2 * ks)) * blocks))


def alpha_sequence(pair: np.ndarray, norm_af: np.ndarray, ks: np.ndarray, v_b2: float,
                   f_hybrid: float, s1: float, s2: float, m: int) -> np.ndarray:
    """``alpha_k`` of the block pairing bound; NaN where the denominator vanishes."""
    s = np.where(ks >= 1, s2, s1)
    den = 2.0 ** (-ks * (s - m)) * v_b2 * f_hybrid * norm_af
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(den > 0, np.abs(pair) / np.where(den > 0, den, 1.0), np.nan)


def _partial_sum(alpha: np.ndarray, sel: np.ndarray) -> float:
    vals = alpha[sel]
    vals = vals[np.isfinite(vals)]
    return float(np.sum(vals)) if vals.size else math.nan


def _keys():
    keys = []
    for name in SYMBOLS:
        for s1, s2 in PAIRING_CASES:
            keys.append(("commutator.high", f"A={name},s1={s1:g},s2={s2:g}"))
            keys.append(("commutator.low", f"A={name},s1={s1:g},s2={s2:g}"))
        for (s1, s2), (t1, t2) in CROSS_CASES:
            label = f"A={name},s1={s1:g},s2={s2:g},t1={t1:g},t2={t2:g}"
            keys.append(("commutator.cross_high", label))
            keys.append(("commutator.cross_low", label))
    return keys


def _grad_values(f: SpectralField2D) -> list[np.ndarray]:
    grid = f.grid
    xi1, xi2 = grid.wavevectors
    ny1, ny2 = grid.nyquist_free
    return [SpectralField2D(grid, 1j * xi1 * ny1 * f.coefficients, 0.0).values(),
            SpectralField2D(grid, 1j * xi2 * ny2 * f.coefficients, 0.0).values()]


def _band(corpus: Corpus) -> np.ndarray:
    """Indicator of the corpus support on the grid."""
    spec, r = corpus.spec, corpus.grid.radius
    return ((r >= 2.0 ** spec.k_lo) & (r < 2.0 ** (spec.k_hi + 1))).astype(float)


def pairing_representers(f: SpectralField2D, A: MultiplierSymbol, p, band: np.ndarray,
                         g: SpectralField2D | None = None) -> np.ndarray:
    """Coefficients of ``K_k`` (shape ``(n_blocks, 2, n, n)``) restricted to ``band``.

    Without ``g``: ``<v, K_k> = (A Delta_k (v . grad f), A Delta_k f)``.
    With ``g``: ``<v, K_k> = (A Delta_k (v . grad f), Delta_k g) + (Delta_k (v . grad g), A Delta_k f)``.
    """
    grid = p.grid
    a = A.table(grid)
    df = _grad_values(f)
    dg = _grad_values(g) if g is not None else None
    out = np.zeros((p.n_blocks, 2) + grid.shape, dtype=complex)
    for i in range(p.n_blocks):
        m2 = p.masks[i] ** 2
        if g is None:
            y1 = SpectralField2D(grid, (a * np.conj(a)).real * m2 * f.coefficients, 0.0).values()
            for j in range(2):
                out[i, j] = band * from_physical_product(df[j] * y1, grid).coefficients
        else:
            y1 = SpectralField2D(grid, np.conj(a) * m2 * g.coefficients, 0.0).values()
            y2 = SpectralField2D(grid, a * m2 * f.coefficients, 0.0).values()
            for j in range(2):
                out[i, j] = band * from_physical_product(df[j] * y1 + dg[j] * y2, grid).coefficients
    return out


def aligned_velocity(K: np.ndarray, weights: np.ndarray, grid) -> VectorField2D | None:
    """``v = sum_k weights_k K_k``; None when it vanishes."""
    V = np.tensordot(weights, K, axes=(0, 0))
    if not np.any(V):
        return None
    return VectorField2D(SpectralField2D(grid, V[0], 0.0), SpectralField2D(grid, V[1], 0.0))


def _den_pairing(naf, ks, f_hybrid, s1, s2, m):
    s = np.where(ks >= 1, s2, s1)
    return 2.0 ** (-ks * (s - m)) * f_hybrid * naf


def _den_cross(nf, ng, ks, f_hybrid, g_hybrid, s1, s2, t1, t2, m):
    fs = np.where(ks >= 1, s2, s1)
    gt = np.where(ks >= 1, t2, t1)
    return 2.0 ** (-ks * gt) * g_hybrid * nf + 2.0 ** (-ks * (fs - m)) * f_hybrid * ng


def _aligned_sum(K, den, sel, p, pair_fn):
    """``sum_{k in sel} alpha_k`` for the aligned velocity of ``sel``."""
    ks = np.arange(p.k_min, p.k_max + 1)
    w = np.where(sel & (den > 0), 1.0 / np.where(den > 0, den, 1.0), 0.0)
    v = aligned_velocity(K, w, p.grid)
    if v is None:
        return math.nan
    v_b2 = besov_from_blocks(block_norms(v, p), ks, 2.0)
    pair = pair_fn(v)
    with np.errstate(divide="ignore", invalid="ignore"):
        alpha = np.where(den > 0, np.abs(pair) / (v_b2 * np.where(den > 0, den, 1.0)), np.nan)
    return _partial_sum(alpha, sel)


def commutator_ratios(corpus: Corpus, indices: Iterable[int]) -> RatioTable:
    """``sum_k alpha_k`` over high (``k >= 1``) and low (``k <= 0``) blocks."""
    spec, p, grid = corpus.spec, corpus.partition, corpus.grid
    ks = np.arange(p.k_min, p.k_max + 1)
    ranges = {"high": ks >= 1, "low": ks <= 0}
    ids = {"high": ("commutator.high", "commutator.cross_high"), "low": ("commutator.low", "commutator.cross_low")}
    band = _band(corpus)
    out = {k: [] for k in _keys()}
    for i in indices:
        f = random_field(spec, grid, i, 1)
        g = random_field(spec, grid, i, 2)
        bf, bg = block_norms(f, p), block_norms(g, p)
        for name, (A, m) in SYMBOLS.items():
            K = pairing_representers(f, A, p, band)
            Kx = pairing_representers(f, A, p, band, g)
            _, naf = block_pairings(VectorField2D.zero(grid), f, A, p)
            _, nf, ng = cross_pairings(VectorField2D.zero(grid), f, g, A, p)
            for s1, s2 in PAIRING_CASES:
                den = _den_pairing(naf, ks, _hybrid(bf, ks, s1, s2), s1, s2, m)
                for rng_name, sel in ranges.items():
                    val = _aligned_sum(K, den, sel, p, lambda v: block_pairings(v, f, A, p)[0])
                    out[(ids[rng_name][0], f"A={name},s1={s1:g},s2={s2:g}")].append(val)
            for (s1, s2), (t1, t2) in CROSS_CASES:
                den = _den_cross(nf, ng, ks, _hybrid(bf, ks, s1, s2), _hybrid(bg, ks, t1, t2), s1, s2, t1, t2, m)
                label = f"A={name},s1={s1:g},s2={s2:g},t1={t1:g},t2={t2:g}"
                for rng_name, sel in ranges.items():
                    val = _aligned_sum(Kx, den, sel, p, lambda v: cross_pairings(v, f, g, A, p)[0])
                    out[(ids[rng_name][1], label)].append(val)
    return out


def weighted_commutator_ratios(corpus: Corpus, indices: Iterable[int], c: float = 0.125) -> RatioTable:
    """Ratios for the weighted commutator sums.

    ``F_k`` is the part of ``A Delta_k (v . grad h)`` that carries the pairing
    with ``A Delta_k h`` (commutators plus the divergence term); for a vector
    field the componentwise norms are combined in ``l^2``. Trajectories use
    ``WEIGHTED_TIMES`` samples.
    """
    spec, p = replace(corpus.spec, n_times=WEIGHTED_TIMES), corpus.partition
    ks = np.arange(p.k_min, p.k_max + 1)
    wp = WeightParams(c=c, T=spec.T, k_max=p.k_max)
    omega = np.array([float(weight_omega(int(k), spec.T, wp)) for k in ks])
    names = list(SYMBOLS)
    symbols = [SYMBOLS[n][0] for n in names]
    keys = [(ineq, f"A={n},rho={r:g}") for ineq in ("commutator.weighted_height", "commutator.weighted_velocity") for n in names for r in WEIGHTED_RHO]
    out = {k: [] for k in keys}
    for i in indices:
        ht = random_trajectory(spec, p, i, 0)
        vt = random_vector_trajectory(spec, p, i, 1)
        ut = random_vector_trajectory(spec, p, i, 2)
        t = ht.times
        Fh = np.array([commutator_remainder_norms(v, h, symbols, p)
                       for v, h in zip(vt.series("u"), ht.series("h"))])
        Fu = np.array([np.hypot(commutator_remainder_norms(v, u.u1, symbols, p),
                                commutator_remainder_norms(v, u.u2, symbols, p))
                       for v, u in zip(vt.series("u"), ut.series("u"))])
        Fh_l1 = trapezoid(Fh, t, axis=0)
        Fu_l1 = trapezoid(Fu, t, axis=0)
        vb = vt.blocks("u")
        v_l1_b2 = float(trapezoid((2.0 ** (2 * ks) * vb).sum(axis=1), t))
        v_l2_b1 = float(np.sqrt(trapezoid((2.0 ** ks * vb).sum(axis=1) ** 2, t)))
        hb, ub = ht.blocks("h"), ut.blocks("u")
        for a, name in enumerate(names):
            m = SYMBOLS[name][1]
            for rho in WEIGHTED_RHO:
                e_norm = float(np.sum(2.0 ** (rho * ks) * omega * np.max(hb, axis=0)))
                lhs = float(np.sum(omega * 2.0 ** (ks * (rho - m)) * Fh_l1[a]))
                rhs = e_norm * v_l1_b2
                out[("commutator.weighted_height", f"A={name},rho={rho:g}")].append(lhs / rhs if rhs > 0 else math.nan)
                u_l2 = float(np.sqrt(trapezoid((2.0 ** ((rho + 1) * ks) * ub).sum(axis=1) ** 2, t)))
                lhs = float(np.sum(2.0 ** (ks * (rho - m)) * Fu_l1[a]))
                rhs = u_l2 * v_l2_b1
                out[("commutator.weighted_velocity", f"A={name},rho={rho:g}")].append(lhs / rhs if rhs > 0 else math.nan)
    return out


def verify_commutator_estimates(corpus: Corpus, refine_count: int | None = None, c: float = 0.125,
                                weighted: bool = True) -> list[EstimateReport]:
    reports = assess(commutator_ratios, corpus, refine_count)
    if weighted:
        reports += assess(lambda cp, idx: weighted_commutator_ratios(cp, idx, c), corpus, refine_count)
    return reports
