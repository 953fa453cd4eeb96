"""Ratio extraction for product, composition, interpolation and weighted-product bounds.

Every ratio is ``LHS / RHS`` with the unknown constant removed; samples with a
vanishing right side are recorded as NaN (skipped). Norms are taken over the
partition range on mean-free corpus samples, in dimension ``d = 2``, with
``B^s`` the space ``B^s_{2,1}``.
"""

from __future__ import annotations

import math
from typing import Callable, Iterable

import numpy as np
from scipy.integrate import trapezoid

from ..besov import Trajectory, WeightParams, block_norms, weight_omega
from ..spectral import DyadicPartition, SpectralField2D, from_physical_product, lp_norm, multiply
from .corpus import Corpus, random_field, random_trajectory
from .report import EstimateReport, RatioTable, assess

__all__ = [
    "PRODUCT_CASES",
    "COMPOSITION_F",
    "COMPOSITION_G",
    "product_ratios",
    "composition_ratios",
    "log_interpolation_ratios",
    "weighted_product_ratios",
    "verify_product_estimates",
    "verify_composition",
    "verify_log_interpolation",
    "verify_weighted_products",
    "besov_from_blocks",
    "tilde_from_blocks",
]

# Exponent choices inside each admissible range (d = 2).
PRODUCT_CASES = {
    "product.tame": [0.5, 1.0, 1.5],
    "product.sum": [(1.0, 1.0), (0.5, 0.5), (1.0, 0.0), (0.5, 1.0), (1.0, -0.5)],
    "product.multiplier": [(-0.5, 1.0), (0.0, 1.0), (0.5, 1.0), (-0.5, math.inf), (0.0, math.inf), (0.5, math.inf)],
    "product.endpoint": [0.0, 0.5, 1.0],
    "product.time": [(s, r1, r2) for s in (0.0, 1.0)
              for (r1, r2) in ((2.0, 2.0), (math.inf, 1.0), (1.0, math.inf), (math.inf, math.inf))],
}

# Built-in nonlinearities: F(0) = 0 for the composition bounds, G'(0) = 0 for
# the difference bounds. Each entry maps values to values; the Moebius maps
# need ``1 + z`` bounded away from zero.
COMPOSITION_F: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "quadratic": lambda z: z * z,
    "mobius": lambda z: z / (1.0 + z),
    "sine": np.sin,
}
COMPOSITION_G: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "quadratic": lambda z: z * z,
    "mobius2": lambda z: z * z / (1.0 + z),
    "cosine": lambda z: 1.0 - np.cos(z),
}
_GUARDED = {"mobius", "mobius2"}
VACUUM_FLOOR = 0.1


def _ks(p: DyadicPartition) -> np.ndarray:
    return np.arange(p.k_min, p.k_max + 1)


def besov_from_blocks(blocks: np.ndarray, ks: np.ndarray, s: float, r: float = 1.0) -> float:
    """``|| 2^{ks} b_k ||_{l^r}`` from a block-norm table."""
    w = 2.0 ** (s * ks) * np.abs(blocks)
    if math.isinf(r):
        return float(np.max(w))
    return float(np.sum(w ** r) ** (1.0 / r))


def _time_norm(tab: np.ndarray, times: np.ndarray, rho: float) -> np.ndarray:
    """Per-block ``L^rho`` in time of a ``(n_times, n_blocks)`` table."""
    if math.isinf(rho):
        return np.max(np.abs(tab), axis=0)
    return trapezoid(np.abs(tab) ** rho, times, axis=0) ** (1.0 / rho)


def tilde_from_blocks(tab: np.ndarray, times: np.ndarray, ks: np.ndarray, rho: float, s: float,
                      r: float = 1.0) -> float:
    """Chemin-Lerner norm ``|| 2^{ks} ||Delta_k f||_{L^rho_T(L^2)} ||_{l^r}``."""
    return besov_from_blocks(_time_norm(tab, times, rho), ks, s, r)


def _bochner(tab: np.ndarray, times: np.ndarray, ks: np.ndarray, rho: float, s: float) -> float:
    """``|| ||f(t)||_{B^s} ||_{L^rho_T}``."""
    per_time = (2.0 ** (s * ks) * tab).sum(axis=1)
    return float(_time_norm(per_time[:, None], times, rho)[0])


def _ratio(lhs: float, rhs: float) -> float:
    return lhs / rhs if rhs > 0 and math.isfinite(rhs) else math.nan


def _new_table(keys) -> RatioTable:
    return {k: [] for k in keys}


def _product_keys():
    keys = [("product.tame", f"s={s:g}") for s in PRODUCT_CASES["product.tame"]]
    keys += [("product.sum", f"s1={a:g},s2={b:g}") for a, b in PRODUCT_CASES["product.sum"]]
    keys += [("product.multiplier", f"s={s:g},r={r:g}") for s, r in PRODUCT_CASES["product.multiplier"]]
    keys += [("product.endpoint", f"s={s:g}") for s in PRODUCT_CASES["product.endpoint"]]
    keys += [("product.time", f"s={s:g},rho1={a:g},rho2={b:g}") for s, a, b in PRODUCT_CASES["product.time"]]
    return keys


def _traj_product(a: Trajectory, b: Trajectory, p: DyadicPartition) -> np.ndarray:
    return np.array([block_norms(multiply(x, y), p) for x, y in zip(a.series("h"), b.series("h"))])


def product_ratios(corpus: Corpus, indices: Iterable[int]) -> RatioTable:
    """Ratios for the product bounds on the pairs ``(f_i, g_i)`` of the corpus."""
    spec, p, grid = corpus.spec, corpus.partition, corpus.grid
    ks = _ks(p)
    out = _new_table(_product_keys())
    for i in indices:
        f = random_field(spec, grid, i, 0)
        g = random_field(spec, grid, i, 1)
        bf, bg = block_norms(f, p), block_norms(g, p)
        bfg = block_norms(multiply(f, g), p)
        fi, gi = lp_norm(f, math.inf), lp_norm(g, math.inf)
        B = lambda b, s, r=1.0: besov_from_blocks(b, ks, s, r)  # noqa: E731
        for s in PRODUCT_CASES["product.tame"]:
            out[("product.tame", f"s={s:g}")].append(_ratio(B(bfg, s), fi * B(bg, s) + gi * B(bf, s)))
        for a, b in PRODUCT_CASES["product.sum"]:
            out[("product.sum", f"s1={a:g},s2={b:g}")].append(_ratio(B(bfg, a + b - 1.0), B(bf, a) * B(bg, b)))
        for s, r in PRODUCT_CASES["product.multiplier"]:
            out[("product.multiplier", f"s={s:g},r={r:g}")].append(_ratio(B(bfg, s, r), B(bf, s, r) * B(bg, 1.0)))
        for s in PRODUCT_CASES["product.endpoint"]:
            out[("product.endpoint", f"s={s:g}")].append(
                _ratio(B(bfg, -1.0, math.inf), B(bf, s) * B(bg, -s, math.inf)))
        ft = random_trajectory(spec, p, i, 0)
        gt = random_trajectory(spec, p, i, 1)
        tfg = _traj_product(ft, gt, p)
        t = ft.times
        for s, r1, r2 in PRODUCT_CASES["product.time"]:
            inv = 1.0 / r1 + 1.0 / r2
            rho = math.inf if inv == 0 else 1.0 / inv
            lhs = tilde_from_blocks(tfg, t, ks, rho, -1.0, math.inf)
            rhs = (tilde_from_blocks(ft.blocks("h"), t, ks, r1, s)
                   * tilde_from_blocks(gt.blocks("h"), t, ks, r2, -s, math.inf))
            out[("product.time", f"s={s:g},rho1={r1:g},rho2={r2:g}")].append(_ratio(lhs, rhs))
    return out


def _compose(fn: Callable, f: SpectralField2D, guarded: bool) -> SpectralField2D | None:
    vals = f.values()
    if guarded and float(np.min(1.0 + vals)) <= VACUUM_FLOOR:
        return None
    return from_physical_product(fn(vals), f.grid)


COMPOSITION_S = {"composition.besov": [0.5, 1.0], "composition.besov_inf": [0.5, 1.0], "composition.difference": [-0.5, 0.0, 0.5, 1.0],
                 "composition.difference_inf": [-0.5, 0.0, 0.5], "composition.weighted": [0.5, 1.0]}


def _composition_keys():
    keys = []
    for ineq in ("composition.besov", "composition.besov_inf", "composition.weighted"):
        keys += [(ineq, f"F={name},s={s:g}") for name in COMPOSITION_F for s in COMPOSITION_S[ineq]]
    for ineq in ("composition.difference", "composition.difference_inf"):
        keys += [(ineq, f"G={name},s={s:g}") for name in COMPOSITION_G for s in COMPOSITION_S[ineq]]
    return keys


def composition_ratios(corpus: Corpus, indices: Iterable[int], c: float = 0.125) -> RatioTable:
    """Ratios for the composition bounds and the weighted composition bound.

    The factors ``C(||u||_inf, ||v||_inf)`` of the difference bounds are not
    divided out: corpus samples share one amplitude law, so they only rescale
    the constant.
    """
    spec, p, grid = corpus.spec, corpus.partition, corpus.grid
    ks = _ks(p)
    out = _new_table(_composition_keys())
    wp = WeightParams(c=c, T=spec.T, k_max=p.k_max)
    omega = np.array([float(weight_omega(int(k), spec.T, wp)) for k in ks])
    for i in indices:
        u = random_field(spec, grid, i, 0)
        v = random_field(spec, grid, i, 1)
        bu, bv = block_norms(u, p), block_norms(v, p)
        ui = lp_norm(u, math.inf)
        bd = block_norms(u - v, p)
        B = lambda b, s, r=1.0: besov_from_blocks(b, ks, s, r)  # noqa: E731
        for name, fn in COMPOSITION_F.items():
            Fu = _compose(fn, u, name in _GUARDED)
            bF = None if Fu is None else block_norms(Fu, p)
            for s in COMPOSITION_S["composition.besov"]:
                fac = (1.0 + ui) ** (math.floor(s) + 1)
                out[("composition.besov", f"F={name},s={s:g}")].append(
                    math.nan if bF is None else _ratio(B(bF, s), fac * B(bu, s)))
                out[("composition.besov_inf", f"F={name},s={s:g}")].append(
                    math.nan if bF is None else _ratio(B(bF, s, math.inf), fac * B(bu, s, math.inf)))
        for name, fn in COMPOSITION_G.items():
            Gu = _compose(fn, u, name in _GUARDED)
            Gv = _compose(fn, v, name in _GUARDED)
            bG = None if Gu is None or Gv is None else block_norms(Gu - Gv, p)
            scale = B(bu, 1.0) + B(bv, 1.0)
            for s in COMPOSITION_S["composition.difference"]:
                out[("composition.difference", f"G={name},s={s:g}")].append(
                    math.nan if bG is None else _ratio(B(bG, s), scale * B(bd, s)))
            for s in COMPOSITION_S["composition.difference_inf"]:
                out[("composition.difference_inf", f"G={name},s={s:g}")].append(
                    math.nan if bG is None else _ratio(B(bG, s, math.inf), scale * B(bd, s, math.inf)))
        ft = random_trajectory(spec, p, i, 0)
        fsup = max(lp_norm(x, math.inf) for x in ft.series("h"))
        tab_f = ft.blocks("h")
        for name, fn in COMPOSITION_F.items():
            comp = [_compose(fn, x, name in _GUARDED) for x in ft.series("h")]
            for s in COMPOSITION_S["composition.weighted"]:
                key = ("composition.weighted", f"F={name},s={s:g}")
                if any(x is None for x in comp):
                    out[key].append(math.nan)
                    continue
                tab_F = np.array([block_norms(x, p) for x in comp])
                lhs = float(np.sum(2.0 ** (s * ks) * omega * np.max(tab_F, axis=0)))
                rhs = (1.0 + fsup) ** (math.floor(s) + 2) * float(
                    np.sum(2.0 ** (s * ks) * omega * np.max(tab_f, axis=0)))
                out[key].append(_ratio(lhs, rhs))
    return out


LOG_EPS = (0.25, 0.5, 1.0)
LOG_RHO = (1.0, 2.0, math.inf)
LOG_S = 1.0


def log_interpolation_ratios(corpus: Corpus, indices: Iterable[int]) -> RatioTable:
    """Ratios for the logarithmic interpolation bound at ``s = 1``, ``p = 2``."""
    spec, p = corpus.spec, corpus.partition
    ks = _ks(p)
    out = _new_table([("interpolation.log", f"eps={e:g},rho={r:g}") for e in LOG_EPS for r in LOG_RHO])
    for i in indices:
        ft = random_trajectory(spec, p, i, 0)
        tab, t = ft.blocks("h"), ft.times
        for e in LOG_EPS:
            for rho in LOG_RHO:
                lhs = tilde_from_blocks(tab, t, ks, rho, LOG_S, 1.0)
                x = tilde_from_blocks(tab, t, ks, rho, LOG_S, math.inf)
                if x == 0:
                    out[("interpolation.log", f"eps={e:g},rho={rho:g}")].append(math.nan)
                    continue
                y = tilde_from_blocks(tab, t, ks, rho, LOG_S - e, math.inf)
                z = tilde_from_blocks(tab, t, ks, rho, LOG_S + e, math.inf)
                rhs = x / e * math.log(math.e + (y + z) / x)
                out[("interpolation.log", f"eps={e:g},rho={rho:g}")].append(_ratio(lhs, rhs))
    return out


WEIGHTED_SUM_CASES = [(s1, s2, r1, r2) for (s1, s2) in ((0.0, 1.0), (-0.5, 1.0), (0.0, 0.5))
                for (r1, r2) in ((1.0, math.inf), (math.inf, 1.0), (2.0, 2.0))]
WEIGHTED_SUP_CASES = [(0.0, 0.0), (0.0, 0.5), (-0.5, 0.5)]


def weighted_product_ratios(corpus: Corpus, indices: Iterable[int], c: float = 0.125) -> RatioTable:
    """Ratios for the two weighted product bounds."""
    spec, p = corpus.spec, corpus.partition
    ks = _ks(p)
    wp = WeightParams(c=c, T=spec.T, k_max=p.k_max)
    omega = np.array([float(weight_omega(int(k), spec.T, wp)) for k in ks])
    keys = [("product.weighted_sum", f"s1={a:g},s2={b:g},r1={x:g},r2={y:g}") for a, b, x, y in WEIGHTED_SUM_CASES]
    keys += [("product.weighted_sup", f"s1={a:g},s2={b:g}") for a, b in WEIGHTED_SUP_CASES]
    out = _new_table(keys)
    for i in indices:
        ft = random_trajectory(spec, p, i, 0)
        gt = random_trajectory(spec, p, i, 1)
        t = ft.times
        tfg = _traj_product(ft, gt, p)
        tf, tg = ft.blocks("h"), gt.blocks("h")
        fg_l1 = _time_norm(tfg, t, 1.0)
        for s1, s2, r1, r2 in WEIGHTED_SUM_CASES:
            lhs = float(np.sum(omega * 2.0 ** ((s1 + s2 - 1.0) * ks) * fg_l1))
            rhs = float(np.sum(omega * 2.0 ** (s1 * ks) * _time_norm(tf, t, r1))) * _bochner(tg, t, ks, r2, s2)
            out[("product.weighted_sum", f"s1={s1:g},s2={s2:g},r1={r1:g},r2={r2:g}")].append(_ratio(lhs, rhs))
        for s1, s2 in WEIGHTED_SUP_CASES:
            lhs = float(np.max(omega * 2.0 ** ((s1 + s2 - 1.0) * ks) * fg_l1))
            e_norm = float(np.sum(2.0 ** (s1 * ks) * omega * np.max(tf, axis=0)))
            rhs = e_norm * tilde_from_blocks(tg, t, ks, 1.0, s2, math.inf)
            out[("product.weighted_sup", f"s1={s1:g},s2={s2:g}")].append(_ratio(lhs, rhs))
    return out


def verify_product_estimates(corpus: Corpus, refine_count: int | None = None) -> list[EstimateReport]:
    return assess(product_ratios, corpus, refine_count)


def verify_composition(corpus: Corpus, refine_count: int | None = None, c: float = 0.125) -> list[EstimateReport]:
    return assess(lambda cp, idx: composition_ratios(cp, idx, c), corpus, refine_count)


def verify_log_interpolation(corpus: Corpus, refine_count: int | None = None) -> list[EstimateReport]:
    return assess(log_interpolation_ratios, corpus, refine_count)


def verify_weighted_products(corpus: Corpus, refine_count: int | None = None,
                             c: float = 0.125) -> list[EstimateReport]:
    return assess(lambda cp, idx: weighted_product_ratios(cp, idx, c), corpus, refine_count)
