"""Evaluation datasets and judgment supplements."""

from __future__ import annotations

import io
import json
from collections.abc import Collection, Mapping, Sequence
from dataclasses import dataclass, replace
from typing import IO

from ..errors import DatasetError

COHORTS = ("expert", "trainee")


@dataclass(frozen=True)
class EvalSample:
    query_id: str
    query_text: str
    relevant_ids: frozenset[str]
    cohort: str = "expert"
    assessment_depth: int | None = None

    def to_json(self) -> dict:
        out = {
            "query_id": self.query_id,
            "query_text": self.query_text,
            "relevant_ids": sorted(self.relevant_ids),
            "cohort": self.cohort,
        }
        if self.assessment_depth is not None:
            out["assessment_depth"] = self.assessment_depth
        return out


def _text(source: IO[bytes] | IO[str] | bytes | str) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if isinstance(source, str):
        return source
    data = source.read()
    return data.decode("utf-8") if isinstance(data, bytes) else data


def load_dataset(
    source: IO[bytes] | IO[str] | bytes | str,
    known_ids: Collection[str] | None = None,
) -> list[EvalSample]:
    samples: list[EvalSample] = []
    seen: set[str] = set()
    for lineno, line in enumerate(io.StringIO(_text(source)), start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"line {lineno}: malformed JSON: {exc.msg}") from exc
        if not isinstance(raw, dict):
            raise DatasetError(f"line {lineno}: sample must be an object")
        qid, text = raw.get("query_id"), raw.get("query_text")
        if not isinstance(qid, str) or not isinstance(text, str) or not text.strip():
            raise DatasetError(f"line {lineno}: query_id and non-blank query_text are required")
        if qid in seen:
            raise DatasetError(f"line {lineno}: duplicate query_id {qid}")
        rel = raw.get("relevant_ids")
        if not isinstance(rel, list) or not rel or not all(isinstance(r, str) for r in rel):
            raise DatasetError(f"line {lineno}: query {qid}: relevant_ids must be a non-empty list of ids")
        cohort = raw.get("cohort", "expert")
        if cohort not in COHORTS:
            raise DatasetError(f"line {lineno}: query {qid}: unknown cohort {cohort!r}")
        if known_ids is not None:
            unknown = sorted(set(rel) - set(known_ids))
            if unknown:
                raise DatasetError(f"line {lineno}: query {qid}: unknown product ids {unknown[:5]}")
        depth = raw.get("assessment_depth")
        seen.add(qid)
        samples.append(EvalSample(qid, text, frozenset(rel), cohort, depth))
    if not samples:
        raise DatasetError("no samples")
    return samples


def dump_dataset(samples: Sequence[EvalSample]) -> str:
    return "".join(json.dumps(s.to_json(), ensure_ascii=False, separators=(",", ":")) + "\n" for s in samples)


def load_supplement(source: IO[bytes] | IO[str] | bytes | str) -> dict[str, frozenset[str]]:
    try:
        raw = json.loads(_text(source))
    except json.JSONDecodeError as exc:
        raise DatasetError(f"malformed supplement JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise DatasetError("supplement must map query_id to a list of product ids")
    out = {}
    for qid, ids in raw.items():
        if not isinstance(ids, list) or not all(isinstance(i, str) for i in ids):
            raise DatasetError(f"supplement for {qid} must be a list of product ids")
        out[qid] = frozenset(ids)
    return out


def merge_judgments(
    dataset: Sequence[EvalSample],
    supplement: Mapping[str, Collection[str]],
    known_ids: Collection[str] | None = None,
) -> list[EvalSample]:
    """Union supplementary relevant ids into a copy of ``dataset``."""
    by_id = {s.query_id: s for s in dataset}
    unknown = sorted(set(supplement) - set(by_id))
    if unknown:
        raise DatasetError(f"supplement references unknown query ids {unknown[:5]}")
    if known_ids is not None:
        known = set(known_ids)
        for qid, ids in supplement.items():
            bad = sorted(set(ids) - known)
            if bad:
                raise DatasetError(f"supplement for {qid}: unknown product ids {bad[:5]}")
    return [
        replace(s, relevant_ids=s.relevant_ids | frozenset(supplement[s.query_id])) if s.query_id in supplement else s
        for s in dataset
    ]
