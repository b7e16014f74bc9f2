"""Matplotlib figures for ablation reports.

Figures are written as PNG with fixed metadata so reruns are byte-identical.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import replace
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .experiment import MetricReport, ReportRow  # noqa: E402

STYLE = {
    "figure.figsize": (6.4, 3.6),
    "figure.dpi": 100,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.fontsize": 8,
    "legend.frameon": False,
    "axes.spines.top": False,
    "axes.spines.right": False,
}
_PNG_META = {"Software": None}


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, format="png", metadata=_PNG_META)
    plt.close(fig)
    return path


def _sweeps(report: MetricReport, field: str, cohort: str) -> dict[str, list[tuple[int, ReportRow]]]:
    """Group rows whose configs differ only in ``field``."""
    groups: dict[str, list[tuple[int, ReportRow]]] = defaultdict(list)
    for row in report.rows:
        if row.cohort != cohort:
            continue
        cfg = report.configs[row.fingerprint]
        x = getattr(cfg, field)
        rest = replace(cfg, **{field: 200 if field == "top_k" else 0, "label": None, "final_k": 1})
        groups[rest.fingerprint()].append((x, row))
    return {k: sorted(v, key=lambda t: t[0]) for k, v in groups.items() if len({x for x, _ in v}) > 1}


def _series_label(report: MetricReport, row: ReportRow, field: str) -> str:
    cfg = report.configs[row.fingerprint]
    r = cfg.retriever
    parts = [cfg.data_level.value, "bm25" if r.kind == "bm25" else f"d{r.dimension}"]
    if field != "category_level":
        parts.append(f"cl{cfg.category_level}")
    if cfg.rewrite.enabled:
        parts.append("qr")
    if cfg.rerank.enabled:
        parts.append("rr")
    return " ".join(parts)


def plot_overview(report: MetricReport, path: Path, k: int) -> Path:
    labels = sorted({r.label for r in report.rows}, key=[r.label for r in report.rows].index)
    cohorts = sorted({r.cohort for r in report.rows}, key=[r.cohort for r in report.rows].index)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(max(6.4, 0.5 * len(labels) + 2), 3.6))
        width = 0.8 / max(1, len(cohorts))
        for j, cohort in enumerate(cohorts):
            vals = [report.row(lbl, cohort).metrics[k].hit_rate_at_k for lbl in labels]
            ax.bar([i + j * width for i in range(len(labels))], vals, width, label=cohort)
        ax.set_xticks([i + width * (len(cohorts) - 1) / 2 for i in range(len(labels))])
        ax.set_xticklabels(labels, rotation=60, ha="right", fontsize=7)
        ax.set_ylim(0, 1.05)
        ax.set_ylabel(f"Hit_Rate@{k}")
        ax.legend()
        return _save(fig, path)


def plot_category_levels(report: MetricReport, path: Path, k: int, cohort: str) -> Path | None:
    sweeps = _sweeps(report, "category_level", cohort)
    if not sweeps:
        return None
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for points in sweeps.values():
            xs = [x for x, _ in points]
            ax.plot(xs, [r.metrics[k].hit_rate_at_k for _, r in points], marker="o",
                    label=_series_label(report, points[0][1], "category_level"))
        ax.set_xlabel("category level")
        ax.set_xticks(range(0, 5))
        ax.set_ylabel(f"Hit_Rate@{k}")
        ax.set_ylim(0, 1.05)
        ax.set_title(f"{cohort} queries")
        ax.legend()
        return _save(fig, path)


def plot_top_k(report: MetricReport, path: Path, k: int, cohort: str) -> Path | None:
    sweeps = _sweeps(report, "top_k", cohort)
    if not sweeps:
        return None
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        lat = ax.twinx()
        lat.spines["right"].set_visible(True)
        lat.grid(False)
        for points in sweeps.values():
            xs = [x for x, _ in points]
            name = _series_label(report, points[0][1], "top_k")
            line, = ax.plot(xs, [r.metrics[k].r_precision_at_k for _, r in points], marker="o", label=name)
            lat.plot(xs, [r.mean_latency_ms for _, r in points], ls="--", color=line.get_color())
        ax.set_xlabel("top_k")
        ax.set_ylabel(f"R-Precision@{k}")
        ax.set_ylim(0, 1.05)
        lat.set_ylabel("mean latency (ms, dashed)")
        ax.set_title(f"{cohort} queries")
        ax.legend(loc="lower right")
        return _save(fig, path)


def render_figures(report: MetricReport, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not report.rows:
        return []
    k_small, k_large = report.ks[0], report.ks[-1]
    written = [plot_overview(report, out / "overview.png", k_small)]
    for cohort in dict.fromkeys(r.cohort for r in report.rows):
        for path in (
            plot_category_levels(report, out / f"category_levels_{cohort}.png", k_small, cohort),
            plot_top_k(report, out / f"top_k_{cohort}.png", k_large, cohort),
        ):
            if path is not None:
                written.append(path)
    return written
