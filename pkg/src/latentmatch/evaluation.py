"""Evaluation utilities: CMC curves, candidate-list fusion with an external
matcher, and sequential forward selection of descriptor patch types."""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Sequence

import numpy as np

from .config import EngineConfig
from .database import CandidateEntry, CandidateList
from .errors import MissingTruthError, QueryMismatchError
from .scoring import score_subject


@dataclass
class CmcCurve:
    """Cumulative match characteristic: rank-k identification rates."""

    rates: np.ndarray  # rates[k-1] = fraction of queries with mate at rank <= k
    query_count: int

    def __post_init__(self):
        self.rates = np.ascontiguousarray(self.rates, dtype=np.float64)

    def rate(self, k: int) -> float:
        return float(self.rates[k - 1])

    def to_csv(self) -> str:
        lines = ["rank,rate"]
        for k, rate in enumerate(self.rates, start=1):
            lines.append(f"{k},{float(rate)!r}")
        return "\n".join(lines) + "\n"


def compute_cmc(lists: Sequence[CandidateList], truth: dict[str, str],
                k_max: int) -> CmcCurve:
    """Rank-k identification rates over a query set.

    ``truth`` maps each query id to its mated subject id; a query whose
    mate is absent from its candidate list contributes 0 at every rank.
    """
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    hits = np.zeros(k_max, dtype=np.int64)
    for clist in lists:
        if clist.query_id not in truth:
            raise MissingTruthError(
                f"no truth entry for query {clist.query_id!r}")
        rank = clist.rank_of(truth[clist.query_id])
        if rank is not None and rank <= k_max:
            hits[rank - 1] += 1
    rates = np.cumsum(hits) / max(len(lists), 1)
    return CmcCurve(rates=rates, query_count=len(lists))


# --------------------------------------------------------------------------
# fusion with an external matcher


class FusionMode(Enum):
    SCORE_EQUAL_WEIGHT = "score"
    BORDA = "borda"


def _minmax_scores(clist: CandidateList) -> dict[str, float]:
    if not clist.entries:
        return {}
    scores = np.array([e.score for e in clist.entries])
    lo, hi = float(scores.min()), float(scores.max())
    if hi == lo:
        return {e.subject_id: 1.0 for e in clist.entries}
    return {e.subject_id: (e.score - lo) / (hi - lo) for e in clist.entries}


def _borda_points(clist: CandidateList) -> dict[str, float]:
    length = len(clist.entries)
    return {e.subject_id: float(length - rank)
            for rank, e in enumerate(clist.entries, start=1)}


def fuse_external_scores(ours: CandidateList, theirs: CandidateList,
                         mode: FusionMode | str) -> CandidateList:
    """Fuse two candidate lists for the same query.

    Score mode min-max normalizes each list to [0, 1] and sums with equal
    weights; Borda mode awards ``L - rank`` points within each top-L list.
    Subjects missing from one list contribute nothing from it.  The fused
    list is re-ranked score descending, ties by subject id.
    """
    mode = FusionMode(mode) if not isinstance(mode, FusionMode) else mode
    if ours.query_id != theirs.query_id:
        raise QueryMismatchError(
            f"query ids differ: {ours.query_id!r} vs {theirs.query_id!r}")
    if mode is FusionMode.SCORE_EQUAL_WEIGHT:
        ours_scores = _minmax_scores(ours)
        theirs_scores = _minmax_scores(theirs)
    else:
        ours_scores = _borda_points(ours)
        theirs_scores = _borda_points(theirs)

    subjects = set(ours_scores) | set(theirs_scores)
    fused = {sid: ours_scores.get(sid, 0.0) + theirs_scores.get(sid, 0.0)
             for sid in subjects}
    ranked = sorted(fused.items(), key=lambda item: (-item[1], item[0]))
    entries = [CandidateEntry(subject_id=sid, score=score)
               for sid, score in ranked]
    return CandidateList(query_id=ours.query_id, entries=entries)


# --------------------------------------------------------------------------
# sequential forward selection of patch types


@dataclass
class SfsBenchmark:
    """A fixed identification benchmark evaluated at a patch-type subset.

    ``queries`` hold latent templates whose descriptors cover the whole
    candidate catalog; restricting ``EngineConfig.patch_types`` then
    evaluates any subset without re-extracting anything.
    """

    queries: list  # list[LatentQuery]
    records: list  # list[SubjectRecord]
    truth: dict[str, str]
    config: EngineConfig | None = None

    def rank1_accuracy(self, patch_types: Sequence[str]) -> float:
        base = self.config if self.config is not None else EngineConfig()
        config = replace(base, patch_types=tuple(patch_types))
        hits = 0
        for query in self.queries:
            best_sid = None
            best = None
            for record in self.records:
                b = score_subject(query.minutiae_template_1,
                                  query.minutiae_template_2,
                                  query.texture_template, record, config)
                key = (-b.s_final, record.subject_id)
                if best is None or key < best:
                    best = key
                    best_sid = record.subject_id
            if best_sid == self.truth[query.query_id]:
                hits += 1
        return hits / max(len(self.queries), 1)


def sfs_patch_selection(benchmark, catalog: Sequence[str], max_k: int
                        ) -> list[tuple[str, float]]:
    """Greedy forward selection of patch types by rank-1 accuracy.

    At each step the patch type whose addition maximizes rank-1 accuracy
    joins the subset (ties resolved by catalog order); selection stops at
    ``max_k`` types or as soon as the best addition no longer improves
    accuracy.  Returns the ordered subset with the accuracy after each
    step.
    """
    if not catalog:
        raise ValueError("catalog must contain at least one patch type")
    selected: list[str] = []
    steps: list[tuple[str, float]] = []
    best_so_far = -np.inf
    while len(selected) < min(max_k, len(catalog)):
        best_type = None
        best_acc = -np.inf
        for pt in catalog:
            if pt in selected:
                continue
            acc = benchmark.rank1_accuracy(tuple(selected) + (pt,))
            if acc > best_acc:
                best_acc = acc
                best_type = pt
        if best_type is None:
            break
        if steps and best_acc <= best_so_far:
            break  # no improvement
        selected.append(best_type)
        steps.append((best_type, best_acc))
        best_so_far = best_acc
    return steps
