"""BM25 inverted index over composed documents."""

from __future__ import annotations

import json
import math
import re
import struct
from collections import Counter
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

from .catalog import ComposedDocument
from .errors import ConfigError, DataError

_TOKEN_RE = re.compile(r"[^\W_]+")

BM25_MAGIC = b"ESBM"
BM25_VERSION = 1


def tokenize(text: str) -> list[str]:
    """Lowercased maximal runs of Unicode letters and digits."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 1.2
    b: float = 0.75
    dedupe_query: bool = True

    def __post_init__(self) -> None:
        if not self.k1 >= 0:
            raise ConfigError(f"k1 must be >= 0, got {self.k1}")
        if not 0 <= self.b <= 1:
            raise ConfigError(f"b must be in [0, 1], got {self.b}")


@dataclass
class Bm25Index:
    params: Bm25Params
    postings: dict[str, list[tuple[str, int]]] = field(default_factory=dict)
    doc_lengths: dict[str, int] = field(default_factory=dict)
    avg_doc_length: float = 0.0

    @property
    def doc_count(self) -> int:
        return len(self.doc_lengths)

    def idf(self, term: str) -> float:
        df = len(self.postings.get(term, ()))
        n = self.doc_count
        return math.log(1.0 + (n - df + 0.5) / (df + 0.5))


def build_bm25_index(docs: Sequence[ComposedDocument], params: Bm25Params | None = None) -> Bm25Index:
    index = Bm25Index(params or Bm25Params())
    for doc in docs:
        if doc.product_id in index.doc_lengths:
            raise DataError(f"duplicate document id {doc.product_id}")
        tokens = tokenize(doc.text)
        index.doc_lengths[doc.product_id] = len(tokens)
        for term, tf in Counter(tokens).items():
            index.postings.setdefault(term, []).append((doc.product_id, tf))
    if index.doc_lengths:
        index.avg_doc_length = sum(index.doc_lengths.values()) / len(index.doc_lengths)
    return index


def _query_terms(query: str, params: Bm25Params) -> list[str]:
    terms = tokenize(query)
    if params.dedupe_query:
        terms = list(dict.fromkeys(terms))
    return terms


def bm25_search(index: Bm25Index, query: str, top_k: int) -> list[tuple[str, float]]:
    if top_k < 1:
        raise ConfigError(f"top_k must be >= 1, got {top_k}")
    if index.doc_count == 0:
        return []
    k1, b = index.params.k1, index.params.b
    avgdl = index.avg_doc_length or 1.0
    scores: dict[str, float] = {}
    for term in _query_terms(query, index.params):
        plist = index.postings.get(term)
        if not plist:
            continue
        idf = index.idf(term)
        for doc_id, tf in plist:
            norm = k1 * (1.0 - b + b * index.doc_lengths[doc_id] / avgdl)
            scores[doc_id] = scores.get(doc_id, 0.0) + idf * tf * (k1 + 1.0) / (tf + norm)
    ranked = sorted(((d, s) for d, s in scores.items() if s > 0.0), key=lambda x: (-x[1], x[0]))
    return ranked[:top_k]


def save_bm25_index(index: Bm25Index, path: str | Path) -> None:
    payload = {
        "params": {"k1": index.params.k1, "b": index.params.b, "dedupe_query": index.params.dedupe_query},
        "doc_lengths": index.doc_lengths,
        "postings": {t: [[d, tf] for d, tf in plist] for t, plist in sorted(index.postings.items())},
    }
    body = json.dumps(payload, ensure_ascii=False, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(BM25_MAGIC + struct.pack("<HQ", BM25_VERSION, len(body)))
        fh.write(body)


def load_bm25_index(path: str | Path) -> Bm25Index:
    with open(path, "rb") as fh:
        head = fh.read(len(BM25_MAGIC) + struct.calcsize("<HQ"))
        if not head.startswith(BM25_MAGIC):
            raise DataError(f"{path}: not a BM25 index file")
        version, length = struct.unpack("<HQ", head[len(BM25_MAGIC):])
        if version != BM25_VERSION:
            raise DataError(f"{path}: unsupported BM25 index version {version}")
        payload = json.loads(fh.read(length).decode("utf-8"))
    index = Bm25Index(Bm25Params(**payload["params"]))
    index.doc_lengths = {d: int(n) for d, n in payload["doc_lengths"].items()}
    index.postings = {t: [(d, int(tf)) for d, tf in plist] for t, plist in payload["postings"].items()}
    if index.doc_lengths:
        index.avg_doc_length = sum(index.doc_lengths.values()) / len(index.doc_lengths)
    return index
