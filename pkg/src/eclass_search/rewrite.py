"""Optional query rewriting before retrieval."""

from __future__ import annotations

import logging
import os
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import httpx

from .dense import post_with_retries
from .errors import ConfigError, ProviderError

log = logging.getLogger(__name__)

PROMPT_VERSION = "v1"

DEFAULT_STOPLIST = frozenset(
    """
    which what who whom whose where when why how
    is are was were be been being am do does did
    can could should would will shall may might must
    i we you me my our your us there here
    a an the any some
    please need want looking find show tell give
    available possible exist exists
    """.split()
)

_WORD_RE = re.compile(r"[^\W_]+")


@dataclass(frozen=True)
class RewriteResult:
    text: str
    degraded: bool = False


class QueryRewriter:
    name: str
    kind: str

    def rewrite(self, query: str) -> RewriteResult:
        raise NotImplementedError


class PassthroughRewriter(QueryRewriter):
    name = "passthrough"
    kind = "passthrough"

    def rewrite(self, query: str) -> RewriteResult:
        return RewriteResult(query)


class RulesRewriter(QueryRewriter):
    """Drops stop-phrase tokens and keeps the rest in their original order and casing."""

    kind = "rules-offline"

    def __init__(self, stoplist: frozenset[str] | set[str] | None = None):
        self.stoplist = frozenset(w.lower() for w in (DEFAULT_STOPLIST if stoplist is None else stoplist))
        self.name = "rules"

    def rewrite(self, query: str) -> RewriteResult:
        kept = [w for w in _WORD_RE.findall(query) if w.lower() not in self.stoplist]
        if not kept:
            # every token was a stop word; keep the query rather than emit nothing
            return RewriteResult(query, degraded=True)
        return RewriteResult(" ".join(kept))


def load_prompt(path: str | Path | None = None) -> str:
    if path is not None:
        return Path(path).read_text(encoding="utf-8").strip()
    return resources.files("eclass_search.data").joinpath(f"rewrite_prompt_{PROMPT_VERSION}.txt").read_text(
        encoding="utf-8"
    ).strip()


@dataclass
class RemoteRewriter(QueryRewriter):
    """Chat-completions client; falls back to the original query on failure."""

    url: str
    model: str
    prompt: str = field(default_factory=load_prompt)
    max_retries: int = 2
    backoff: float = 0.5
    timeout: float = 60.0
    api_key: str | None = None
    transport: httpx.BaseTransport | None = field(default=None, repr=False)
    kind = "remote-llm"

    @property
    def name(self) -> str:  # type: ignore[override]
        return f"remote-{self.model}"

    @classmethod
    def from_env(cls, model: str, prompt_path: str | None = None, **kwargs) -> RemoteRewriter:
        url = os.environ.get("REWRITE_URL")
        if not url:
            raise ConfigError("REWRITE_URL is not set")
        return cls(url=url, model=model, prompt=load_prompt(prompt_path), api_key=os.environ.get("API_KEY"), **kwargs)

    def rewrite(self, query: str) -> RewriteResult:
        payload = {
            "model": self.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": self.prompt},
                {"role": "user", "content": query},
            ],
        }
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else None
        try:
            with httpx.Client(timeout=self.timeout, headers=headers, transport=self.transport) as client:
                body = post_with_retries(client, self.url, payload, max_retries=self.max_retries, backoff=self.backoff)
            text = str(body["choices"][0]["message"]["content"]).strip()
        except (ProviderError, KeyError, IndexError, TypeError) as exc:
            log.warning("rewriter %s failed (%s); using original query", self.name, exc)
            return RewriteResult(query, degraded=True)
        if not text:
            return RewriteResult(query, degraded=True)
        return RewriteResult(text)


def rewrite_query(rewriter: QueryRewriter, query: str) -> str:
    return rewrite_with_status(rewriter, query).text


def rewrite_with_status(rewriter: QueryRewriter, query: str) -> RewriteResult:
    if not query or not query.strip():
        raise ConfigError("query is blank")
    result = rewriter.rewrite(query)
    log.info("rewrite %r -> %r", query, result.text)
    return result
