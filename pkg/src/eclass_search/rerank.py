"""Second-stage re-ranking of first-stage candidates."""

from __future__ import annotations

import logging
import os
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import httpx

from .catalog import ComposedDocument
from .dense import post_with_retries
from .errors import ConfigError, DataError, ProviderError
from .lexical import tokenize

log = logging.getLogger(__name__)


def overlap_score(query: str, doc_text: str, synonyms: Mapping[str, str] | None = None) -> float:
    """Fraction of distinct query tokens that occur in the document."""
    q = set(tokenize(query))
    d = set(tokenize(doc_text))
    if synonyms:
        q = {synonyms.get(t, t) for t in q}
        d = {synonyms.get(t, t) for t in d}
    return len(q & d) / max(1, len(q))


class Reranker:
    name: str
    kind: str

    def score(self, query: str, texts: Sequence[str]) -> list[float]:
        raise NotImplementedError


class OverlapReranker(Reranker):
    kind = "token-overlap-offline"

    def __init__(self, synonyms: Mapping[str, str] | None = None):
        self.synonyms = dict(synonyms or {})
        self.name = "overlap" + ("+syn" if self.synonyms else "")
        self.scored = 0

    def score(self, query: str, texts: Sequence[str]) -> list[float]:
        self.scored += len(texts)
        return [overlap_score(query, t, self.synonyms) for t in texts]


@dataclass
class RemoteReranker(Reranker):
    """Client for a rerank endpoint: {"model","query","documents"} -> {"results":[{"index","relevance_score"}]}."""

    url: str
    model: str
    batch_size: int = 64
    max_retries: int = 3
    backoff: float = 0.5
    timeout: float = 120.0
    api_key: str | None = None
    transport: httpx.BaseTransport | None = field(default=None, repr=False)
    kind = "remote-http"

    @property
    def name(self) -> str:  # type: ignore[override]
        return f"remote-{self.model}"

    @classmethod
    def from_env(cls, model: str, **kwargs) -> RemoteReranker:
        url = os.environ.get("RERANK_URL")
        if not url:
            raise ConfigError("RERANK_URL is not set")
        return cls(url=url, model=model, api_key=os.environ.get("API_KEY"), **kwargs)

    def score(self, query: str, texts: Sequence[str]) -> list[float]:
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else None
        scores: list[float] = []
        with httpx.Client(timeout=self.timeout, headers=headers, transport=self.transport) as client:
            for start in range(0, len(texts), self.batch_size):
                batch = list(texts[start : start + self.batch_size])
                body = post_with_retries(
                    client, self.url, {"model": self.model, "query": query, "documents": batch},
                    max_retries=self.max_retries, backoff=self.backoff,
                )
                try:
                    got = {int(r["index"]): float(r["relevance_score"]) for r in body["results"]}
                except (KeyError, TypeError, ValueError) as exc:
                    raise ProviderError(f"{self.url}: unexpected response shape") from exc
                if sorted(got) != list(range(len(batch))):
                    raise ProviderError(f"{self.url}: results do not cover all {len(batch)} documents")
                scores.extend(got[i] for i in range(len(batch)))
        return scores


@dataclass
class RerankResult:
    ranked: list[tuple[str, float]]
    scored: int
    degraded: bool = False


def rerank(
    reranker: Reranker,
    query: str,
    candidates: Sequence[tuple[str, float]],
    docs: Mapping[str, ComposedDocument],
    *,
    fallback: bool = False,
) -> RerankResult:
    """Reorder ``candidates`` by reranker score.

    Ties keep first-stage order. With ``fallback=True`` a provider failure
    returns the first-stage order flagged as degraded instead of raising.
    """
    missing = [cid for cid, _ in candidates if cid not in docs]
    if missing:
        raise DataError(f"candidate {missing[0]} has no document")
    if not candidates:
        return RerankResult([], 0)
    texts = [docs[cid].text for cid, _ in candidates]
    try:
        scores = reranker.score(query, texts)
    except ProviderError:
        if not fallback:
            raise
        log.warning("reranker %s failed; keeping first-stage order", reranker.name)
        return RerankResult(list(candidates), 0, degraded=True)
    if len(scores) != len(candidates):
        raise ProviderError(f"{reranker.name}: returned {len(scores)} scores for {len(candidates)} candidates")
    order = sorted(range(len(candidates)), key=lambda i: (-scores[i], i, candidates[i][0]))
    return RerankResult([(candidates[i][0], float(scores[i])) for i in order], len(candidates))
