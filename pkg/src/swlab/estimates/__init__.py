"""Empirical-constant harness, Osgood bounds and the perturbation experiment."""

from __future__ import annotations

from dataclasses import replace
from typing import Callable

from .apriori import apriori_corpus, verify_apriori
from .commutators import verify_commutator_estimates
from .corpus import (
    Corpus,
    CorpusSpec,
    lattice_amplitudes,
    random_field,
    random_trajectory,
    random_vector,
    random_vector_trajectory,
)
from .osgood import OsgoodProblem, OsgoodResult, gamma_integral, linear_modulus, log_modulus, osgood_bound, osgood_M, osgood_solve
from .products import verify_composition, verify_log_interpolation, verify_product_estimates, verify_weighted_products
from .report import DRIFT_LIMIT, EstimateReport, assess
from .uniqueness import UniquenessReport, uniqueness_experiment

__all__ = [
    "Corpus",
    "CorpusSpec",
    "random_field",
    "random_vector",
    "random_trajectory",
    "random_vector_trajectory",
    "lattice_amplitudes",
    "EstimateReport",
    "DRIFT_LIMIT",
    "assess",
    "verify_product_estimates",
    "verify_composition",
    "verify_commutator_estimates",
    "verify_log_interpolation",
    "verify_weighted_products",
    "verify_apriori",
    "apriori_corpus",
    "OsgoodProblem",
    "OsgoodResult",
    "osgood_M",
    "osgood_bound",
    "osgood_solve",
    "gamma_integral",
    "linear_modulus",
    "log_modulus",
    "UniquenessReport",
    "uniqueness_experiment",
    "HARNESSES",
    "INEQUALITY_GROUPS",
    "resolve_selection",
    "run_harness",
]

# Report ids by harness group.
INEQUALITY_GROUPS: dict[str, tuple[str, ...]] = {
    "products": ("product.tame", "product.sum", "product.multiplier", "product.endpoint", "product.time"),
    "composition": ("composition.besov", "composition.besov_inf", "composition.difference",
                    "composition.difference_inf", "composition.weighted"),
    "commutators": ("commutator.high", "commutator.low", "commutator.cross_high", "commutator.cross_low",
                    "commutator.weighted_height", "commutator.weighted_velocity"),
    "interpolation": ("interpolation.log",),
    "weighted_products": ("product.weighted_sum", "product.weighted_sup"),
    "apriori": ("apriori.energy", "apriori.smoothing"),
}

HARNESSES: dict[str, Callable[..., list]] = {
    "products": lambda corpus, refine_count, c: verify_product_estimates(corpus, refine_count),
    "composition": lambda corpus, refine_count, c: verify_composition(corpus, refine_count, c),
    "commutators": lambda corpus, refine_count, c: verify_commutator_estimates(corpus, refine_count, c),
    "interpolation": lambda corpus, refine_count, c: verify_log_interpolation(corpus, refine_count),
    "weighted_products": lambda corpus, refine_count, c: verify_weighted_products(corpus, refine_count, c),
}


def resolve_selection(select: str | None) -> tuple[list[str], set[str] | None]:
    """Harness groups to run and the report ids to keep (None keeps all).

    ``select`` is a group name, a report id, a group prefix such as
    ``"product"``, or None for every field harness (the a priori group runs
    solver corpora and is only included when named).
    """
    if select is None or select == "all":
        return list(HARNESSES), None
    if select in INEQUALITY_GROUPS:
        return [select], None
    groups = [g for g, ids in INEQUALITY_GROUPS.items() if select in ids]
    if groups:
        return groups, {select}
    ids = {i for g in INEQUALITY_GROUPS.values() for i in g if i.startswith(select + ".")}
    if ids:
        return [g for g, gi in INEQUALITY_GROUPS.items() if ids & set(gi)], ids
    known = sorted(INEQUALITY_GROUPS) + sorted(i for g in INEQUALITY_GROUPS.values() for i in g)
    raise KeyError(f"unknown selection {select!r}; known: {', '.join(known)}")


def run_harness(select: str | None = None, corpus: Corpus | None = None, refine_count: int | None = 4,
                c: float = 0.125, spec: CorpusSpec | None = None) -> list[EstimateReport]:
    """Run the selected harness groups and return their reports in a fixed order."""
    groups, keep = resolve_selection(select)
    reports: list[EstimateReport] = []
    for g in groups:
        if g == "apriori":
            cp = apriori_corpus(replace(spec, k_lo=-2, k_hi=0) if spec else None)
            reports += verify_apriori(cp)
        else:
            cp = corpus or Corpus.default(spec)
            reports += HARNESSES[g](cp, refine_count, c)
    if keep is not None:
        reports = [r for r in reports if r.inequality in keep]
    return reports
