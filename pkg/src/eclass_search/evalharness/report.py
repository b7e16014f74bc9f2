"""CSV and Markdown rendering of metric reports."""

from __future__ import annotations

import csv
import io
from collections.abc import Sequence

from ..errors import ConfigError
from .experiment import DEFAULT_KS, MetricReport, ReportRow


def report_columns(ks: Sequence[int] = DEFAULT_KS) -> list[str]:
    cols = ["fingerprint", "label", "cohort"]
    cols += [f"hit_rate@{k}" for k in ks]
    cols += [f"hits@{k}" for k in ks]
    cols += ["mrr", "recall", "r_precision"]
    cols += [f"precision@{k}" for k in ks]
    cols += [f"r_precision@{k}" for k in ks]
    cols += ["mean_latency_ms", "n"]
    return cols


def _row_values(row: ReportRow, ks: Sequence[int]) -> list[object]:
    first = row.metrics[ks[0]] if ks else None
    vals: list[object] = [row.fingerprint, row.label, row.cohort]
    vals += [row.metrics[k].hit_rate_at_k for k in ks]
    vals += [row.metrics[k].hits_at_k for k in ks]
    vals += [first.mrr, first.recall, first.r_precision] if first else [0.0, 0.0, 0.0]
    vals += [row.metrics[k].precision_at_k for k in ks]
    vals += [row.metrics[k].r_precision_at_k for k in ks]
    vals += [row.mean_latency_ms, row.n]
    return vals


def _fmt(value: object) -> str:
    # repr() of a float round-trips exactly
    return repr(value) if isinstance(value, float) else str(value)


def emit_report(report: MetricReport, fmt: str = "csv") -> bytes:
    ks = report.ks
    cols = report_columns(ks)
    rows = [_row_values(r, ks) for r in report.rows]
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(cols)
        for vals in rows:
            writer.writerow([_fmt(v) for v in vals])
        return buf.getvalue().encode("utf-8")
    if fmt == "markdown":
        lines = ["| " + " | ".join(cols) + " |", "|" + "|".join("---" for _ in cols) + "|"]
        for vals in rows:
            cells = [f"{v:.4f}" if isinstance(v, float) else str(v) for v in vals]
            lines.append("| " + " | ".join(c.replace("|", "\\|") for c in cells) + " |")
        return ("\n".join(lines) + "\n").encode("utf-8")
    raise ConfigError(f"unknown report format {fmt!r}")


def parse_report_csv(data: bytes) -> list[dict[str, object]]:
    reader = csv.DictReader(io.StringIO(data.decode("utf-8")))
    out = []
    for rec in reader:
        parsed: dict[str, object] = {}
        for key, value in rec.items():
            if key in ("fingerprint", "label", "cohort"):
                parsed[key] = value
            elif key == "n":
                parsed[key] = int(value)
            else:
                parsed[key] = float(value)
        out.append(parsed)
    return out
