"""Run configuration grids over an evaluation dataset."""

from __future__ import annotations

import json
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import DatasetError
from ..metrics import MetricVector, aggregate, evaluate_query
from ..pipeline import IndexSet, SearchConfig, run_search
from .datasets import COHORTS, EvalSample

DEFAULT_KS = (5, 20)


@dataclass(frozen=True)
class QueryRecord:
    fingerprint: str
    query_id: str
    cohort: str
    candidates: tuple[str, ...]
    scored_candidates: int
    latency_ms: float

    def to_json(self) -> dict:
        return {
            "fingerprint": self.fingerprint,
            "query_id": self.query_id,
            "cohort": self.cohort,
            "candidates": list(self.candidates),
            "scored_candidates": self.scored_candidates,
            "latency_ms": self.latency_ms,
        }


@dataclass
class ReportRow:
    fingerprint: str
    label: str
    cohort: str
    metrics: dict[int, MetricVector]
    mean_latency_ms: float
    n: int


@dataclass
class MetricReport:
    ks: tuple[int, ...] = DEFAULT_KS
    rows: list[ReportRow] = field(default_factory=list)
    configs: dict[str, SearchConfig] = field(default_factory=dict)
    records: list[QueryRecord] = field(default_factory=list)

    def row(self, label_or_fp: str, cohort: str) -> ReportRow:
        for r in self.rows:
            if cohort == r.cohort and label_or_fp in (r.label, r.fingerprint):
                return r
        raise KeyError((label_or_fp, cohort))


def config_label(config: SearchConfig) -> str:
    if config.label:
        return config.label
    r = config.retriever
    retr = "bm25" if r.kind == "bm25" else f"{r.provider}{r.dimension}" + ("syn" if r.use_synonyms else "")
    parts = [config.data_level.value, f"cl{config.category_level}", retr, f"top{config.top_k}"]
    if config.rewrite.enabled:
        parts.append(f"qr-{config.rewrite.kind}")
    if config.rerank.enabled:
        parts.append("rr")
    return "_".join(parts)


def _mean_row(fp: str, label: str, cohort: str, recs: Sequence[QueryRecord],
              samples: dict[str, EvalSample], ks: Sequence[int]) -> ReportRow:
    metrics = {
        k: aggregate(evaluate_query(list(r.candidates), samples[r.query_id].relevant_ids, k) for r in recs)
        for k in ks
    }
    latency = sum(r.latency_ms for r in recs) / len(recs)
    return ReportRow(fp, label, cohort, metrics, latency, len(recs))


def run_experiment(
    grid: Sequence[SearchConfig],
    dataset: Sequence[EvalSample],
    indices: IndexSet,
    *,
    ks: Sequence[int] = DEFAULT_KS,
    workers: int = 1,
    timing: bool = True,
    include_combined: bool = False,
) -> MetricReport:
    """Evaluate each config on every cohort present in ``dataset``.

    With ``timing=False`` the latency column is zero so repeated runs with
    offline providers are byte-identical.
    """
    if not dataset:
        raise DatasetError("no samples")
    samples = {s.query_id: s for s in dataset}
    cohorts = [c for c in COHORTS if any(s.cohort == c for s in dataset)]
    report = MetricReport(ks=tuple(ks))
    clock = None if timing else (lambda: 0.0)
    for config in grid:
        indices.get(config)

        def one(sample: EvalSample) -> QueryRecord:
            kw = {} if clock is None else {"clock": clock}
            out = run_search(config, indices, sample.query_text, sample.query_id, **kw)
            return QueryRecord(out.fingerprint, sample.query_id, sample.cohort, tuple(out.candidates),
                               out.scored_candidates, out.timings.total_ms)

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                recs = list(pool.map(one, dataset))
        else:
            recs = [one(s) for s in dataset]
        fp = recs[0].fingerprint
        label = config_label(config)
        report.configs[fp] = config
        report.records.extend(recs)
        for cohort in cohorts:
            report.rows.append(_mean_row(fp, label, cohort, [r for r in recs if r.cohort == cohort], samples, ks))
        if include_combined and len(cohorts) > 1:
            report.rows.append(_mean_row(fp, label, "combined", recs, samples, ks))
    return report


def write_results(report: MetricReport, out_dir: str | Path) -> list[Path]:
    """Write the aggregate tables plus per-config outcome files keyed by fingerprint."""
    from .report import emit_report

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for fmt, name in (("csv", "report.csv"), ("markdown", "report.md")):
        path = out / name
        path.write_bytes(emit_report(report, fmt))
        written.append(path)
    for fp, config in report.configs.items():
        d = out / fp
        d.mkdir(exist_ok=True)
        cfg_path = d / "config.json"
        cfg_path.write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        rec_path = d / "outcomes.jsonl"
        rec_path.write_text(
            "".join(json.dumps(r.to_json(), separators=(",", ":")) + "\n" for r in report.records if r.fingerprint == fp),
            encoding="utf-8",
        )
        written += [cfg_path, rec_path]
    return written
