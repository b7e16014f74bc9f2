"""Rewrite -> retrieve -> rerank orchestration with per-stage timings."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

from filelock import FileLock

from .catalog import ComposedDocument, DataLevel, Product, Taxonomy, check_category_level, compose_all
from .dense import (
    EmbeddingProvider,
    HashingProvider,
    RemoteProvider,
    VectorIndex,
    build_vector_index,
    dense_search,
    embed_texts,
    load_vector_index,
    save_vector_index,
)
from .errors import CatalogError, ConfigError, DataError, ProvenanceError
from .lexical import Bm25Index, Bm25Params, bm25_search, build_bm25_index, load_bm25_index, save_bm25_index
from .rerank import OverlapReranker, RemoteReranker, Reranker, rerank
from .rewrite import PassthroughRewriter, QueryRewriter, RemoteRewriter, RulesRewriter, rewrite_with_status

log = logging.getLogger(__name__)

DEFAULT_TOP_K_SWEEP = (20, 50, 100, 150, 200)


def _canonical(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def _digest(obj: Any, n: int = 16) -> str:
    return hashlib.sha256(_canonical(obj).encode("utf-8")).hexdigest()[:n]


@dataclass(frozen=True)
class RetrieverConfig:
    kind: str = "dense"
    provider: str = "hashing"
    dimension: int = 512
    model: str | None = None
    seed: int = 0
    use_synonyms: bool = False
    k1: float = 1.2
    b: float = 0.75
    dedupe_query: bool = True

    def __post_init__(self) -> None:
        if self.kind not in ("dense", "bm25"):
            raise ConfigError(f"retriever kind must be dense or bm25, got {self.kind!r}")
        if self.kind == "dense":
            if self.provider not in ("hashing", "remote"):
                raise ConfigError(f"unknown embedding provider {self.provider!r}")
            if self.dimension < 8:
                raise ConfigError(f"dimension must be >= 8, got {self.dimension}")
            if self.provider == "remote" and not self.model:
                raise ConfigError("remote provider requires a model name")
        else:
            Bm25Params(self.k1, self.b, self.dedupe_query)

    def index_key(self) -> dict[str, Any]:
        """Only the fields that change what gets indexed."""
        if self.kind == "bm25":
            return {"kind": "bm25", "k1": self.k1, "b": self.b}
        key: dict[str, Any] = {"kind": "dense", "provider": self.provider, "dimension": self.dimension}
        if self.provider == "hashing":
            key.update(seed=self.seed, use_synonyms=self.use_synonyms)
        else:
            key["model"] = self.model
        return key


@dataclass(frozen=True)
class StageConfig:
    enabled: bool = False
    kind: str = "passthrough"
    model: str | None = None
    prompt_path: str | None = None


@dataclass(frozen=True)
class SearchConfig:
    data_level: DataLevel = DataLevel.BASIC
    category_level: int = 1
    retriever: RetrieverConfig = field(default_factory=RetrieverConfig)
    top_k: int = 200
    final_k: int = 10
    rewrite: StageConfig = field(default_factory=StageConfig)
    rerank: StageConfig = field(default_factory=lambda: StageConfig(False, "overlap"))
    rerank_query: str = "rewritten"
    rerank_fallback: bool = False
    label: str | None = None

    def __post_init__(self) -> None:
        try:
            object.__setattr__(self, "data_level", DataLevel.parse(self.data_level))
            check_category_level(self.category_level)
        except CatalogError as exc:
            raise ConfigError(str(exc)) from None
        if self.top_k < 1:
            raise ConfigError(f"top_k must be >= 1, got {self.top_k}")
        if not 1 <= self.final_k <= self.top_k:
            raise ConfigError(f"final_k must be in 1..top_k ({self.top_k}), got {self.final_k}")
        if self.rewrite.kind not in ("passthrough", "rules", "remote"):
            raise ConfigError(f"unknown rewriter {self.rewrite.kind!r}")
        if self.rerank.kind not in ("overlap", "remote"):
            raise ConfigError(f"unknown reranker {self.rerank.kind!r}")
        if self.rerank_query not in ("rewritten", "original"):
            raise ConfigError("rerank_query must be 'rewritten' or 'original'")
        # passthrough rewriting is indistinguishable from no rewriting
        if self.rewrite.enabled and self.rewrite.kind == "passthrough":
            object.__setattr__(self, "rewrite", replace(self.rewrite, enabled=False))

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> SearchConfig:
        if not isinstance(raw, Mapping):
            raise ConfigError("search config must be a JSON object")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        kwargs = dict(raw)
        try:
            if "retriever" in kwargs:
                kwargs["retriever"] = RetrieverConfig(**kwargs["retriever"])
            for stage in ("rewrite", "rerank"):
                if stage in kwargs:
                    value = kwargs[stage]
                    if isinstance(value, bool):
                        default = "passthrough" if stage == "rewrite" else "overlap"
                        value = {"enabled": value, "kind": default}
                    kwargs[stage] = StageConfig(**value)
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(f"invalid search config: {exc}") from None

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["data_level"] = self.data_level.value
        return out

    def index_key(self) -> dict[str, Any]:
        return {
            "retriever": self.retriever.index_key(),
            "data_level": self.data_level.value,
            "category_level": self.category_level,
        }

    def fingerprint(self) -> str:
        body = self.to_dict()
        body.pop("label")
        return _digest(body)

    def with_overrides(self, **overrides: Any) -> SearchConfig:
        return replace(self, **overrides)


def _read_json(path: str | Path) -> Any:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON: {exc}") from None


def load_config(path: str | Path) -> SearchConfig:
    return SearchConfig.from_dict(_read_json(path))


def load_grid(path: str | Path) -> list[SearchConfig]:
    raw = _read_json(path)
    if isinstance(raw, Mapping) and "configs" in raw:
        raw = raw["configs"]
    if not isinstance(raw, list) or not raw:
        raise ConfigError(f"{path}: grid must be a non-empty list of configs")
    return [SearchConfig.from_dict(item) for item in raw]


@dataclass
class StageTimings:
    rewrite_ms: float = 0.0
    embed_ms: float = 0.0
    retrieve_ms: float = 0.0
    rerank_ms: float = 0.0
    total_ms: float = 0.0


@dataclass
class SearchOutcome:
    query_id: str | None
    query: str
    rewritten_query: str
    results: list[tuple[str, float]]
    candidates: list[str]
    scored_candidates: int
    timings: StageTimings
    degraded: dict[str, bool]
    fingerprint: str
    names: dict[str, str] = field(default_factory=dict, repr=False)

    @property
    def ids(self) -> list[str]:
        return [pid for pid, _ in self.results]

    def to_json(self, include_candidates: bool = False) -> dict[str, Any]:
        out: dict[str, Any] = {
            "query_id": self.query_id,
            "query": self.query,
            "rewritten_query": self.rewritten_query,
            "results": [
                {"rank": r, "article_number": pid, "name": self.names.get(pid, ""), "score": score}
                for r, (pid, score) in enumerate(self.results, start=1)
            ],
            "scored_candidates": self.scored_candidates,
            "timings": asdict(self.timings),
            "degraded": dict(self.degraded),
            "fingerprint": self.fingerprint,
        }
        if include_candidates:
            out["candidates"] = list(self.candidates)
        return out


@dataclass
class PreparedIndex:
    key: dict[str, Any]
    fingerprint: str
    docs: dict[str, ComposedDocument]
    vectors: VectorIndex | None = None
    bm25: Bm25Index | None = None
    provider: EmbeddingProvider | None = None


class Components:
    """Builds providers, rerankers and rewriters from config, caching instances."""

    def __init__(self, synonyms: Mapping[str, str] | None = None):
        self.synonyms = dict(synonyms or {})
        self._cache: dict[str, Any] = {}
        self._lock = threading.Lock()

    def _get(self, key: Any, build: Callable[[], Any]) -> Any:
        k = _canonical(key)
        with self._lock:
            if k not in self._cache:
                self._cache[k] = build()
            return self._cache[k]

    def provider(self, cfg: RetrieverConfig) -> EmbeddingProvider:
        def build() -> EmbeddingProvider:
            if cfg.provider == "hashing":
                return HashingProvider(cfg.dimension, self.synonyms if cfg.use_synonyms else None, cfg.seed)
            return RemoteProvider.from_env(cfg.model or "", cfg.dimension)

        return self._get(["provider", cfg.index_key()], build)

    def reranker(self, cfg: StageConfig) -> Reranker:
        def build() -> Reranker:
            if cfg.kind == "overlap":
                return OverlapReranker()
            return RemoteReranker.from_env(cfg.model or "")

        return self._get(["rerank", asdict(cfg)], build)

    def rewriter(self, cfg: StageConfig) -> QueryRewriter:
        def build() -> QueryRewriter:
            if cfg.kind == "rules":
                return RulesRewriter()
            if cfg.kind == "remote":
                return RemoteRewriter.from_env(cfg.model or "", cfg.prompt_path)
            return PassthroughRewriter()

        return self._get(["rewrite", asdict(cfg)], build)


def catalog_digest(taxonomy: Taxonomy, products: Sequence[Product], synonyms: Mapping[str, str] | None = None) -> str:
    return _digest([taxonomy.to_json(), [p.to_json() for p in products], sorted((synonyms or {}).items())], 32)


class IndexSet:
    """Indices keyed by (retriever, data level, category level), plus the components to query them."""

    def __init__(self, products: Sequence[Product], components: Components | None = None):
        self.indices: dict[str, PreparedIndex] = {}
        self.components = components or Components()
        self.names = {p.article_number: p.name for p in products}

    def get(self, config: SearchConfig) -> PreparedIndex:
        key = _canonical(config.index_key())
        try:
            return self.indices[key]
        except KeyError:
            raise ProvenanceError(f"no index prepared for {key}") from None

    def __len__(self) -> int:
        return len(self.indices)


_publish_locks: dict[str, threading.Lock] = {}
_publish_guard = threading.Lock()


def _publish_lock(fp: str) -> threading.Lock:
    with _publish_guard:
        return _publish_locks.setdefault(fp, threading.Lock())


def prepare_indices(
    products: Sequence[Product],
    taxonomy: Taxonomy,
    configs: Iterable[SearchConfig],
    *,
    cache_dir: str | Path | None = None,
    components: Components | None = None,
    indices: IndexSet | None = None,
) -> IndexSet:
    """Build (or load from ``cache_dir``) one index per distinct retriever/data-level/category-level."""
    components = components or (indices.components if indices else Components())
    out = indices or IndexSet(products, components)
    base = catalog_digest(taxonomy, products, components.synonyms)
    cache = Path(cache_dir) if cache_dir is not None else None
    if cache is not None:
        cache.mkdir(parents=True, exist_ok=True)
    for config in configs:
        key = config.index_key()
        skey = _canonical(key)
        if skey in out.indices:
            continue
        fp = _digest([base, key])
        docs = compose_all(products, taxonomy, config.data_level, config.category_level)
        prepared = PreparedIndex(key, fp, {d.product_id: d for d in docs})
        retr = config.retriever
        if retr.kind == "dense":
            prepared.provider = components.provider(retr)
            stamp = {
                "provider": prepared.provider.name,
                "dimension": retr.dimension,
                "data_level": config.data_level.value,
                "category_level": config.category_level,
            }
            prepared.vectors = _cached(
                cache, fp, ".vec",
                lambda: build_vector_index(docs, prepared.provider),
                save_vector_index,
                lambda p: load_vector_index(p, expect=stamp),
            )
        else:
            params = Bm25Params(retr.k1, retr.b, retr.dedupe_query)
            prepared.bm25 = _cached(
                cache, fp, ".bm25",
                lambda: build_bm25_index(docs, params),
                save_bm25_index,
                load_bm25_index,
            )
            prepared.bm25.params = params
        out.indices[skey] = prepared
    return out


def _cached(cache: Path | None, fp: str, suffix: str, build, save, load):
    if cache is None:
        return build()
    path = cache / f"{fp}{suffix}"
    with _publish_lock(fp), FileLock(str(path) + ".lock"):
        if path.exists():
            log.info("cache hit %s", path.name)
            return load(path)
        built = build()
        tmp = path.with_suffix(path.suffix + ".tmp")
        save(built, tmp)
        os.replace(tmp, path)
        log.info("built %s", path.name)
        return built


def index_path(cache_dir: str | Path, products, taxonomy, config: SearchConfig, synonyms=None) -> Path:
    fp = _digest([catalog_digest(taxonomy, products, synonyms), config.index_key()])
    return Path(cache_dir) / (fp + (".vec" if config.retriever.kind == "dense" else ".bm25"))


def run_search(
    config: SearchConfig,
    indices: IndexSet,
    query: str,
    query_id: str | None = None,
    *,
    clock: Callable[[], float] = time.perf_counter,
) -> SearchOutcome:
    if not isinstance(query, str) or not query.strip():
        raise ConfigError("query is blank")
    prepared = indices.get(config)
    comps = indices.components
    timings = StageTimings()
    degraded = {"rewrite": False, "rerank": False}
    start = clock()

    text = query
    if config.rewrite.enabled:
        t0 = clock()
        result = rewrite_with_status(comps.rewriter(config.rewrite), query)
        text, degraded["rewrite"] = result.text, result.degraded
        timings.rewrite_ms = (clock() - t0) * 1e3

    if prepared.vectors is not None:
        t0 = clock()
        qvec = embed_texts(prepared.provider, [text], role="query")[0]
        t1 = clock()
        candidates = dense_search(prepared.vectors, qvec, config.top_k, provider_name=prepared.provider.name)
        t2 = clock()
        timings.embed_ms, timings.retrieve_ms = (t1 - t0) * 1e3, (t2 - t1) * 1e3
    else:
        t0 = clock()
        candidates = bm25_search(prepared.bm25, text, config.top_k)
        timings.retrieve_ms = (clock() - t0) * 1e3

    scored = 0
    if config.rerank.enabled:
        t0 = clock()
        rq = text if config.rerank_query == "rewritten" else query
        rr = rerank(comps.reranker(config.rerank), rq, candidates, prepared.docs, fallback=config.rerank_fallback)
        candidates, scored, degraded["rerank"] = rr.ranked, rr.scored, rr.degraded
        timings.rerank_ms = (clock() - t0) * 1e3

    timings.total_ms = (clock() - start) * 1e3
    return SearchOutcome(
        query_id=query_id,
        query=query,
        rewritten_query=text,
        results=list(candidates[: config.final_k]),
        candidates=[pid for pid, _ in candidates],
        scored_candidates=scored,
        timings=timings,
        degraded=degraded,
        fingerprint=_digest([config.fingerprint(), prepared.fingerprint]),
        names=indices.names,
    )
