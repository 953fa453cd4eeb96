"""Empirical-constant reports and the bounded/unbounded verdict."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .corpus import Corpus

__all__ = ["EstimateReport", "DRIFT_LIMIT", "assess", "RatioTable"]

DRIFT_LIMIT = 0.10

# Maps a report key (inequality id, parameter label) to per-sample ratios;
# NaN marks a skipped (degenerate) sample.
RatioTable = dict


@dataclass
class EstimateReport:
    """Measured ratios ``LHS / RHS`` (constant removed) for one inequality setting.

    ``drift_corpus`` compares the max ratio of the doubled corpus with the base
    corpus; ``drift_resolution`` compares the same samples on the doubled grid.
    Only increases count as drift.
    """

    inequality: str
    params: str
    corpus: dict
    ratios: list
    skipped: int
    max_ratio: float
    max_ratio_doubled: float
    max_ratio_refined: float
    drift_corpus: float
    drift_resolution: float
    verdict: str
    extra: dict = field(default_factory=dict)

    @property
    def bounded(self) -> bool:
        return self.verdict == "bounded"

    def summary(self) -> dict:
        return {
            "schema": "swlab.estimate/1",
            "kind": "summary",
            "inequality": self.inequality,
            "params": self.params,
            "corpus": self.corpus,
            "samples": len(self.ratios),
            "skipped": self.skipped,
            "max_ratio": self.max_ratio,
            "max_ratio_doubled": self.max_ratio_doubled,
            "max_ratio_refined": self.max_ratio_refined,
            "drift_corpus": self.drift_corpus,
            "drift_resolution": self.drift_resolution,
            "verdict": self.verdict,
            "extra": self.extra,
        }

    def sample_records(self) -> list[dict]:
        return [{"schema": "swlab.estimate/1", "kind": "sample", "inequality": self.inequality,
                 "params": self.params, "index": i, "ratio": (None if math.isnan(r) else r)}
                for i, r in enumerate(self.ratios)]


def _max(values) -> float:
    arr = np.asarray(values, float)
    arr = arr[np.isfinite(arr)]
    return float(np.max(arr)) if arr.size else math.nan


def _drift(new: float, base: float) -> float:
    if math.isnan(new) or math.isnan(base):
        return math.nan
    if base == 0:
        return 0.0 if new == 0 else math.inf
    return max(0.0, (new - base) / base)


def assess(ratio_fn: Callable[[Corpus, Iterable[int]], RatioTable], corpus: Corpus,
           refine_count: int | None = None) -> list[EstimateReport]:
    """Evaluate ``ratio_fn`` on the corpus, its doubling and its refinement.

    Parameters
    ----------
    ratio_fn : callable
        ``ratio_fn(corpus, indices) -> {(inequality, params): [ratio, ...]}``.
    corpus : Corpus
    refine_count : int, optional
        Number of leading samples re-evaluated on the doubled grid (default:
        the whole base corpus); ``0`` skips the resolution comparison. The
        comparison is always between the same samples on both grids.
    """
    count = corpus.spec.count
    base = ratio_fn(corpus, range(count))
    extra = ratio_fn(corpus, range(count, 2 * count))
    m = count if refine_count is None else max(0, min(refine_count, count))
    fine = ratio_fn(corpus.refined(), range(m)) if m else None
    reports = []
    for key, ratios in base.items():
        ineq, params = key
        both = list(ratios) + list(extra[key])
        mb = _max(ratios)
        md = _max(both)
        dc = _drift(md, mb)
        if fine is None:
            mr, dr = math.nan, 0.0
        else:
            mr = _max(fine[key])
            dr = _drift(mr, _max(ratios[:m]))
        finite = [r for r in both if not math.isnan(r)]
        ok = (bool(finite) and all(math.isfinite(r) and r >= 0 for r in finite)
              and dc <= DRIFT_LIMIT and dr <= DRIFT_LIMIT)
        reports.append(EstimateReport(
            inequality=ineq, params=params, corpus=corpus.spec.to_dict() | {"n_points": corpus.grid.n_points},
            ratios=[float(r) for r in both], skipped=int(sum(math.isnan(r) for r in both)),
            max_ratio=mb, max_ratio_doubled=md, max_ratio_refined=mr,
            drift_corpus=dc, drift_resolution=dr,
            verdict="bounded" if ok else "unbounded-trend",
            extra={"refined_samples": m},
        ))
    return reports
