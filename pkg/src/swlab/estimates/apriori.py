"""Empirical constants of the two a priori estimates along linearized runs.

Each corpus member is one solve of the linearized system with random data,
a random time-dependent transport field and random forcings; the solver's
monitors supply both sides of each estimate.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Iterable

import numpy as np

from ..linear import LinearizedProblem, State, solve_linearized
from ..spectral import Grid2D, make_partition
from .corpus import Corpus, CorpusSpec, random_field, random_trajectory, random_vector, random_vector_trajectory
from .report import EstimateReport, RatioTable, assess

__all__ = ["APRIORI_SPEC", "apriori_corpus", "linearized_run", "apriori_ratios", "verify_apriori"]

APRIORI_SPEC = CorpusSpec(count=16, k_lo=-2, k_hi=0, amplitude=0.1, T=1.0)


def apriori_corpus(spec: CorpusSpec | None = None, n_points: int = 128, period: float = 16 * np.pi,
                   k_min: int = -4, k_max: int = 1) -> Corpus:
    """Reduced-grid corpus for solver runs."""
    return Corpus(spec or APRIORI_SPEC, make_partition(Grid2D(n_points, period), k_min, k_max))


def linearized_run(corpus: Corpus, index: int, dt: float = 0.02, nu: float = 1.0) -> dict:
    """Monitors of the linearized run number ``index``."""
    spec, p, grid = corpus.spec, corpus.partition, corpus.grid
    n = int(round(spec.T / dt))
    fine = replace(spec, n_times=n + 1)
    h0 = random_field(spec, grid, index, 0)
    u0 = random_vector(spec, grid, index, 1)
    v = random_vector_trajectory(fine, p, index, 2).series("u")
    H = random_trajectory(fine, p, index, 3).series("h")
    G = random_vector_trajectory(fine, p, index, 4).series("u")
    problem = LinearizedProblem(State(0.0, h0, u0, nu), dt, spec.T, p, v=v, forcing_H=H, forcing_G=G,
                                keep_fields=False)
    return solve_linearized(problem).meta["monitors"]


def apriori_ratios(corpus: Corpus, indices: Iterable[int], dt: float = 0.02, nu: float = 1.0) -> RatioTable:
    out = {("apriori.energy", "linearized"): [], ("apriori.smoothing", "linearized"): []}
    for i in indices:
        m = linearized_run(corpus, i, dt, nu)
        out[("apriori.energy", "linearized")].append(m["ratio_energy"])
        out[("apriori.smoothing", "linearized")].append(m["ratio_smoothing"])
    return out


def verify_apriori(corpus: Corpus | None = None, refine_count: int | None = 0, dt: float = 0.02,
                   nu: float = 1.0) -> list[EstimateReport]:
    """Reports for both a priori estimates; by default only corpus doubling is checked."""
    return assess(lambda cp, idx: apriori_ratios(cp, idx, dt, nu), corpus or apriori_corpus(), refine_count)
