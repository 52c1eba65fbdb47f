"""Ranking evaluation: per-triple ranks, hits@n, MRR, per-relation breakdowns.

Every evaluation fold triple is ranked in both directions: the tail is ranked
against all entities for the (head, relation) query, and the head against all
entities for the (tail, reciprocal-relation) query. Filtered ranking removes
every other entity known to complete the query in any fold, never the target.

Ties rank pessimistically: a candidate scoring equal to the target counts as
ranked above it, so a constant scorer cannot look good.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from affinitykg.errors import ConsistencyError
from affinitykg.kg import RECIPROCAL_SUFFIX, KnowledgeGraph, KnownTrueSet
from affinitykg.models import score_all_tails
from affinitykg.util import format_float

HIST_MAX_RANK = 10


@dataclass(frozen=True)
class RankRecord:
    h: int
    r: int          # base relation id
    t: int
    direction: str  # "tail" (predicting t) or "head" (predicting h)
    raw_rank: int
    filtered_rank: int

    def rank(self, mode: str) -> int:
        return self.filtered_rank if mode == "filtered" else self.raw_rank


@dataclass
class MetricsReport:
    hits1: float
    hits3: float
    hits10: float
    mrr: float
    n: int
    hits_per_rank: list          # counts at ranks 1..10
    per_relation: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "hits1": self.hits1,
            "hits3": self.hits3,
            "hits10": self.hits10,
            "mrr": self.mrr,
            "n": self.n,
            "hits_per_rank": list(self.hits_per_rank),
        }
        if self.per_relation:
            out["per_relation"] = {
                label: sub.to_dict() for label, sub in sorted(self.per_relation.items())
            }
        return out


def rank_of_target(scores, target: int, filter_set=frozenset(), mode: str = "filtered") -> int:
    """Rank of the target among candidates: 1 + better + ties (excluding itself).

    In filtered mode every other known-true candidate is ignored; the target
    itself is always ranked. Filtering out the target is a contract violation.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if not 0 <= target < scores.shape[0]:
        raise IndexError(f"target {target} out of range")
    if mode not in ("raw", "filtered"):
        raise ValueError(f"unknown mode {mode!r}")
    target_score = scores[target]
    if mode == "filtered" and filter_set:
        # The target may appear in the known-true set; it is never excluded
        # from its own ranking.
        exclude = [c for c in filter_set if c != target]
        if exclude:
            keep = np.ones(scores.shape[0], dtype=bool)
            keep[np.asarray(exclude, dtype=np.int64)] = False
            scores = scores[keep]
    better = int(np.count_nonzero(scores > target_score))
    ties = int(np.count_nonzero(scores == target_score)) - 1
    return 1 + better + ties


def hits_at(ranks, n: int) -> float:
    ranks = np.asarray(ranks)
    if ranks.size == 0:
        raise ValueError("empty rank list")
    return float(np.count_nonzero(ranks <= n) / ranks.size)


def mrr(ranks) -> float:
    ranks = np.asarray(ranks, dtype=np.float64)
    if ranks.size == 0:
        raise ValueError("empty rank list")
    return float(np.mean(1.0 / ranks))


def compute_ranks(params, kg: KnowledgeGraph, fold: str = "test") -> list:
    """Raw and filtered ranks for both directions of every fold triple."""
    if params.n_entities != kg.n_entities:
        raise ConsistencyError(
            f"parameters cover {params.n_entities} entities, graph has {kg.n_entities}"
        )
    if params.n_relations != 2 * kg.n_base_relations:
        raise ConsistencyError(
            f"parameters cover {params.n_relations} relations, expected "
            f"{2 * kg.n_base_relations} (base + reciprocal)"
        )
    known = KnownTrueSet(kg)
    n_base = kg.n_base_relations
    records = []
    for h, r, t in getattr(kg, fold):
        h, r, t = int(h), int(r), int(t)
        for direction, query, rel, target in (
            ("tail", h, r, t),
            ("head", t, r + n_base, h),
        ):
            scores = score_all_tails(params, query, rel)
            filter_set = known.tails_of(query, rel)
            raw = rank_of_target(scores, target, mode="raw")
            filtered = rank_of_target(scores, target, filter_set, mode="filtered")
            records.append(RankRecord(h, r, t, direction, raw, filtered))
    return records


def summarize(records, mode: str = "filtered") -> MetricsReport:
    if not records:
        raise ValueError("no rank records to summarize")
    ranks = np.array([rec.rank(mode) for rec in records])
    hist = [int(np.count_nonzero(ranks == k)) for k in range(1, HIST_MAX_RANK + 1)]
    return MetricsReport(
        hits1=hits_at(ranks, 1),
        hits3=hits_at(ranks, 3),
        hits10=hits_at(ranks, 10),
        mrr=mrr(ranks),
        n=len(records),
        hits_per_rank=hist,
    )


def evaluate(params, kg: KnowledgeGraph, mode: str = "filtered",
             fold: str = "test") -> MetricsReport:
    """MetricsReport over a fold, with per-relation sub-reports by base label."""
    records = compute_ranks(params, kg, fold)
    report = summarize(records, mode)
    by_relation: dict = {}
    for rec in records:
        label = kg.relations.label_of(rec.r)
        if label.endswith(RECIPROCAL_SUFFIX):
            label = label[: -len(RECIPROCAL_SUFFIX)]
        by_relation.setdefault(label, []).append(rec)
    report.per_relation = {
        label: summarize(recs, mode) for label, recs in by_relation.items()
    }
    return report


def per_relation_csv(report: MetricsReport) -> str:
    """CSV table `relation,hits1,hits3,hits10,mrr,n` over the sub-reports."""
    lines = ["relation,hits1,hits3,hits10,mrr,n"]
    for label, sub in sorted(report.per_relation.items()):
        lines.append(
            f"{label},{format_float(sub.hits1)},{format_float(sub.hits3)},"
            f"{format_float(sub.hits10)},{format_float(sub.mrr)},{sub.n}"
        )
    return "".join(line + "\n" for line in lines)


def random_top_n_probability(n_e: int, degree: int) -> float:
    """Chance that a uniformly random top-`degree` list is perfectly precise.

    Product over i = 1..degree of (degree + 1 - i) / (n_e - i), evaluated in
    log space so large vocabularies cannot underflow the partial products.
    """
    if degree >= n_e:
        raise ValueError("degree must be smaller than the entity count")
    if degree < 0:
        raise ValueError("degree must be non-negative")
    log_p = 0.0
    for i in range(1, degree + 1):
        log_p += math.log(degree + 1 - i) - math.log(n_e - i)
    return math.exp(log_p)
