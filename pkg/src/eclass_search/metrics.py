"""Binary-relevance IR metrics over ranked result lists.

Per-query functions take the ranked ids and the relevant-id set; ``aggregate``
macro-averages per-query vectors.
"""

from __future__ import annotations

from collections.abc import Collection, Iterable, Sequence
from dataclasses import dataclass

from .errors import ConfigError, DataError

METRIC_NAMES = (
    "hit_rate_at_k",
    "hits_at_k",
    "mrr",
    "recall",
    "precision_at_k",
    "r_precision",
    "r_precision_at_k",
)


def _check_k(k: int) -> None:
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")


def hits_at_k(ids: Sequence[str], relevant: Collection[str], k: int) -> int:
    _check_k(k)
    return sum(1 for i in ids[:k] if i in relevant)


def hit_rate_at_k(ids: Sequence[str], relevant: Collection[str], k: int) -> float:
    return 1.0 if hits_at_k(ids, relevant, k) > 0 else 0.0


def mrr(ids: Sequence[str], relevant: Collection[str]) -> float:
    for rank, i in enumerate(ids, start=1):
        if i in relevant:
            return 1.0 / rank
    return 0.0


def recall(ids: Sequence[str], relevant: Collection[str]) -> float:
    if not relevant:
        raise DataError("judgment has no relevant ids")
    return len(set(ids) & set(relevant)) / len(relevant)


def precision_at_k(ids: Sequence[str], relevant: Collection[str], k: int) -> float:
    return hits_at_k(ids, relevant, k) / k


def r_precision(ids: Sequence[str], relevant: Collection[str]) -> float:
    r = len(relevant)
    if r == 0:
        raise DataError("judgment has no relevant ids")
    return hits_at_k(ids, relevant, r) / r


def r_precision_at_k(ids: Sequence[str], relevant: Collection[str], k: int) -> float:
    return max(r_precision(ids, relevant), precision_at_k(ids, relevant, k))


@dataclass(frozen=True)
class MetricVector:
    k: int
    hit_rate_at_k: float
    hits_at_k: float
    mrr: float
    recall: float
    precision_at_k: float
    r_precision: float
    r_precision_at_k: float
    n_queries: int = 1

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in METRIC_NAMES}


def evaluate_query(ids: Sequence[str], relevant: Collection[str], k: int) -> MetricVector:
    if len(set(ids)) != len(ids):
        raise DataError("ranked result contains duplicate ids")
    relevant = frozenset(relevant)
    if not relevant:
        raise DataError("judgment has no relevant ids")
    return MetricVector(
        k=k,
        hit_rate_at_k=hit_rate_at_k(ids, relevant, k),
        hits_at_k=float(hits_at_k(ids, relevant, k)),
        mrr=mrr(ids, relevant),
        recall=recall(ids, relevant),
        precision_at_k=precision_at_k(ids, relevant, k),
        r_precision=r_precision(ids, relevant),
        r_precision_at_k=r_precision_at_k(ids, relevant, k),
    )


def aggregate(vectors: Iterable[MetricVector]) -> MetricVector:
    vectors = list(vectors)
    if not vectors:
        raise DataError("cannot aggregate zero queries")
    ks = {v.k for v in vectors}
    if len(ks) != 1:
        raise DataError(f"mixed cutoffs in aggregate: {sorted(ks)}")
    n = sum(v.n_queries for v in vectors)
    means = {name: sum(getattr(v, name) * v.n_queries for v in vectors) / n for name in METRIC_NAMES}
    return MetricVector(k=ks.pop(), n_queries=n, **means)
