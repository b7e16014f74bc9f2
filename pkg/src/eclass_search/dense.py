"""Embedding providers and an exact cosine top-k vector store."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import struct
import time
from collections.abc import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import httpx
import numpy as np

from .catalog import ComposedDocument, DataLevel
from .errors import ConfigError, DataError, ProvenanceError, ProviderError
from .lexical import tokenize

log = logging.getLogger(__name__)

VECTOR_MAGIC = b"ESVI"
VECTOR_VERSION = 1
NORM_TOL = 1e-6
RETRYABLE_STATUS = {408, 425, 429, 500, 502, 503, 504}


def cosine(u: Sequence[float] | np.ndarray, v: Sequence[float] | np.ndarray) -> float:
    a = np.asarray(u, dtype=np.float64)
    b = np.asarray(v, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ConfigError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na, nb = math.sqrt(float(a @ a)), math.sqrt(float(b @ b))
    if na == 0.0 or nb == 0.0:
        raise DataError("cosine is undefined for the zero vector")
    return max(-1.0, min(1.0, float(a @ b) / (na * nb)))


@lru_cache(maxsize=1 << 16)
def _token_hash(token: str, seed: int) -> tuple[int, int]:
    salt = seed.to_bytes(8, "little", signed=True)
    raw = token.encode("utf-8")
    bucket = int.from_bytes(hashlib.blake2b(raw, digest_size=8, key=b"bucket" + salt).digest(), "little")
    sign = hashlib.blake2b(raw, digest_size=1, key=b"sign" + salt).digest()[0] & 1
    return bucket, 1 if sign else -1


def hashing_embed(
    text: str,
    d: int,
    synonyms: Mapping[str, str] | None = None,
    seed: int = 0,
) -> np.ndarray:
    """Signed feature-hashing bag-of-tokens embedding, L2-normalized.

    Returns the zero vector when ``text`` has no tokens; callers that index or
    search must reject it.
    """
    if d < 8:
        raise ConfigError(f"embedding dimension must be >= 8, got {d}")
    vec = np.zeros(d, dtype=np.float64)
    for token in tokenize(text):
        if synonyms:
            token = synonyms.get(token, token)
        bucket, sign = _token_hash(token, seed)
        vec[bucket % d] += sign
    norm = float(np.linalg.norm(vec))
    if norm > 0.0:
        vec /= norm
    return vec


def synonym_digest(synonyms: Mapping[str, str] | None) -> str:
    if not synonyms:
        return ""
    blob = json.dumps(sorted(synonyms.items()), separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:12]


class EmbeddingProvider:
    name: str
    dimension: int
    kind: str

    def embed(self, texts: Sequence[str], role: str = "document") -> list[np.ndarray]:
        raise NotImplementedError


class HashingProvider(EmbeddingProvider):
    kind = "hashing-offline"

    def __init__(self, dimension: int, synonyms: Mapping[str, str] | None = None, seed: int = 0):
        if dimension < 8:
            raise ConfigError(f"embedding dimension must be >= 8, got {dimension}")
        self.dimension = dimension
        self.synonyms = dict(synonyms or {})
        self.seed = seed
        syn = synonym_digest(self.synonyms)
        self.name = f"hashing-d{dimension}-s{seed}" + (f"-syn{syn}" if syn else "")
        self.calls = 0

    def embed(self, texts: Sequence[str], role: str = "document") -> list[np.ndarray]:
        self.calls += 1
        return [hashing_embed(t, self.dimension, self.synonyms, self.seed) for t in texts]


def post_with_retries(
    client: httpx.Client,
    url: str,
    payload: dict,
    *,
    max_retries: int,
    backoff: float,
    max_backoff: float = 8.0,
) -> dict:
    """POST JSON, retrying transport errors and transient statuses with capped exponential backoff."""
    last: Exception | None = None
    for attempt in range(max_retries + 1):
        try:
            resp = client.post(url, json=payload)
            if resp.status_code in RETRYABLE_STATUS:
                last = ProviderError(f"{url}: HTTP {resp.status_code}")
            elif resp.status_code >= 400:
                raise ProviderError(f"{url}: HTTP {resp.status_code}: {resp.text[:200]}")
            else:
                return resp.json()
        except httpx.HTTPError as exc:
            last = exc
        except json.JSONDecodeError as exc:
            raise ProviderError(f"{url}: invalid JSON response") from exc
        if attempt < max_retries:
            delay = min(max_backoff, backoff * (2**attempt))
            log.warning("request to %s failed (%s); retry %d in %.2fs", url, last, attempt + 1, delay)
            time.sleep(delay)
    raise ProviderError(f"{url}: giving up after {max_retries + 1} attempts: {last}")


@dataclass
class RemoteProvider(EmbeddingProvider):
    """Client for an embeddings endpoint speaking {"model", "input"} -> {"data": [...]}."""

    url: str
    model: str
    dimension: int
    batch_size: int = 32
    concurrency: int = 4
    max_retries: int = 3
    backoff: float = 0.5
    timeout: float = 60.0
    api_key: str | None = None
    query_instruction: str = ""
    document_instruction: str = ""
    transport: httpx.BaseTransport | None = field(default=None, repr=False)
    kind = "remote-http"

    def __post_init__(self) -> None:
        if self.batch_size < 1 or self.concurrency < 1:
            raise ConfigError("batch_size and concurrency must be >= 1")

    @property
    def name(self) -> str:  # type: ignore[override]
        return f"remote-{self.model}-d{self.dimension}"

    @classmethod
    def from_env(cls, model: str, dimension: int, **kwargs) -> RemoteProvider:
        url = os.environ.get("EMBED_URL")
        if not url:
            raise ConfigError("EMBED_URL is not set")
        return cls(url=url, model=model, dimension=dimension, api_key=os.environ.get("API_KEY"), **kwargs)

    def _client(self) -> httpx.Client:
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else None
        return httpx.Client(timeout=self.timeout, headers=headers, transport=self.transport)

    def _embed_batch(self, client: httpx.Client, batch: list[str]) -> list[np.ndarray]:
        body = post_with_retries(
            client, self.url, {"model": self.model, "input": batch},
            max_retries=self.max_retries, backoff=self.backoff,
        )
        try:
            items = sorted(body["data"], key=lambda item: item["index"])
            vectors = [np.asarray(item["embedding"], dtype=np.float64) for item in items]
        except (KeyError, TypeError, ValueError) as exc:
            raise ProviderError(f"{self.url}: unexpected response shape") from exc
        if len(vectors) != len(batch):
            raise ProviderError(f"{self.url}: expected {len(batch)} embeddings, got {len(vectors)}")
        for vec in vectors:
            if vec.shape != (self.dimension,):
                raise ProviderError(f"{self.url}: server returned dimension {vec.shape}, expected {self.dimension}")
            if not np.all(np.isfinite(vec)):
                raise ProviderError(f"{self.url}: non-finite embedding values")
        return vectors

    def embed(self, texts: Sequence[str], role: str = "document") -> list[np.ndarray]:
        prefix = self.query_instruction if role == "query" else self.document_instruction
        inputs = [prefix + t for t in texts]
        batches = [inputs[i : i + self.batch_size] for i in range(0, len(inputs), self.batch_size)]
        with self._client() as client:
            if self.concurrency == 1 or len(batches) == 1:
                results = [self._embed_batch(client, b) for b in batches]
            else:
                with ThreadPoolExecutor(max_workers=self.concurrency) as pool:
                    results = list(pool.map(lambda b: self._embed_batch(client, b), batches))
        return [vec for batch in results for vec in batch]


def embed_texts(provider: EmbeddingProvider, texts: Sequence[str], role: str = "document") -> list[np.ndarray]:
    for i, text in enumerate(texts):
        if not isinstance(text, str) or not text.strip():
            raise DataError(f"text {i} is empty")
    if not texts:
        return []
    vectors = provider.embed(list(texts), role=role)
    if len(vectors) != len(texts):
        raise ProviderError(f"{provider.name}: expected {len(texts)} vectors, got {len(vectors)}")
    for vec in vectors:
        if len(vec) != provider.dimension:
            raise ProviderError(f"{provider.name}: vector of length {len(vec)}, expected {provider.dimension}")
    return vectors


class VectorIndex:
    """Row-normalized embedding matrix with its provenance stamp."""

    def __init__(
        self,
        doc_ids: Sequence[str],
        matrix: np.ndarray,
        provider_name: str,
        dimension: int,
        data_level: DataLevel | str | None = None,
        category_level: int | None = None,
    ):
        matrix = np.asarray(matrix, dtype=np.float64).reshape(len(doc_ids), dimension)
        if len(set(doc_ids)) != len(doc_ids):
            raise DataError("duplicate document ids in vector index")
        self.doc_ids = list(doc_ids)
        self.matrix = matrix
        self.provider_name = provider_name
        self.dimension = dimension
        self.data_level = DataLevel(data_level).value if data_level is not None else None
        self.category_level = category_level
        order = sorted(range(len(self.doc_ids)), key=self.doc_ids.__getitem__)
        self._id_rank = np.empty(len(self.doc_ids), dtype=np.int64)
        self._id_rank[order] = np.arange(len(self.doc_ids))

    def __len__(self) -> int:
        return len(self.doc_ids)

    @property
    def stamp(self) -> dict:
        return {
            "provider": self.provider_name,
            "dimension": self.dimension,
            "data_level": self.data_level,
            "category_level": self.category_level,
        }


def build_vector_index(docs: Sequence[ComposedDocument], provider: EmbeddingProvider) -> VectorIndex:
    ids = [d.product_id for d in docs]
    if len(set(ids)) != len(ids):
        raise DataError("duplicate document ids")
    levels = {(d.data_level, d.category_level) for d in docs}
    if len(levels) > 1:
        raise DataError("documents mix data/category levels")
    data_level, category_level = next(iter(levels)) if levels else (None, None)
    if not docs:
        matrix = np.zeros((0, provider.dimension))
    else:
        vectors = embed_texts(provider, [d.text for d in docs])
        matrix = np.vstack(vectors)
        norms = np.linalg.norm(matrix, axis=1)
        zero = np.flatnonzero(norms == 0.0)
        if zero.size:
            raise DataError(f"document {ids[zero[0]]} embeds to the zero vector")
        matrix = matrix / norms[:, None]
    return VectorIndex(ids, matrix, provider.name, provider.dimension, data_level, category_level)


def dense_search(
    index: VectorIndex,
    query_vec: Sequence[float] | np.ndarray,
    top_k: int,
    provider_name: str | None = None,
) -> list[tuple[str, float]]:
    """Exact top-k by cosine; ties go to the smaller doc id."""
    if top_k < 1:
        raise ConfigError(f"top_k must be >= 1, got {top_k}")
    if provider_name is not None and provider_name != index.provider_name:
        raise ProvenanceError(f"query embedded by {provider_name}, index built by {index.provider_name}")
    q = np.asarray(query_vec, dtype=np.float64)
    if q.shape != (index.dimension,):
        raise ProvenanceError(f"query dimension {q.shape} does not match index dimension {index.dimension}")
    if len(index) == 0:
        return []
    norm = float(np.linalg.norm(q))
    if norm == 0.0:
        raise DataError("query embeds to the zero vector")
    scores = index.matrix @ (q / norm)
    n = len(scores)
    if top_k < n:
        kth = np.partition(-scores, top_k - 1)[top_k - 1]
        pool = np.flatnonzero(-scores <= kth)
    else:
        pool = np.arange(n)
    order = pool[np.lexsort((index._id_rank[pool], -scores[pool]))][:top_k]
    return [(index.doc_ids[i], float(scores[i])) for i in order]


def save_vector_index(index: VectorIndex, path: str | Path) -> None:
    header = dict(index.stamp, doc_ids=index.doc_ids, rows=len(index))
    head = json.dumps(header, ensure_ascii=False, separators=(",", ":"), sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(VECTOR_MAGIC + struct.pack("<HQ", VECTOR_VERSION, len(head)))
        fh.write(head)
        fh.write(np.ascontiguousarray(index.matrix, dtype="<f8").tobytes())


def load_vector_index(path: str | Path, expect: Mapping[str, object] | None = None) -> VectorIndex:
    """Load a persisted index; ``expect`` entries must match the stored stamp."""
    with open(path, "rb") as fh:
        prefix = fh.read(len(VECTOR_MAGIC) + struct.calcsize("<HQ"))
        if not prefix.startswith(VECTOR_MAGIC):
            raise DataError(f"{path}: not a vector index file")
        version, length = struct.unpack("<HQ", prefix[len(VECTOR_MAGIC):])
        if version != VECTOR_VERSION:
            raise DataError(f"{path}: unsupported vector index version {version}")
        header = json.loads(fh.read(length).decode("utf-8"))
        dim, rows = int(header["dimension"]), int(header["rows"])
        matrix = np.frombuffer(fh.read(rows * dim * 8), dtype="<f8").astype(np.float64)
    if matrix.size != rows * dim:
        raise DataError(f"{path}: truncated matrix")
    index = VectorIndex(
        header["doc_ids"], matrix.reshape(rows, dim), header["provider"], dim,
        header["data_level"], header["category_level"],
    )
    for key, value in (expect or {}).items():
        if index.stamp.get(key) != value:
            raise ProvenanceError(f"{path}: stamp {key}={index.stamp.get(key)!r}, expected {value!r}")
    return index
