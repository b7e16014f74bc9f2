"""Evaluation datasets, synthetic benchmarks, experiment grids and reports."""

from .datasets import EvalSample, dump_dataset, load_dataset, load_supplement, merge_judgments
from .experiment import MetricReport, QueryRecord, ReportRow, config_label, run_experiment, write_results
from .report import emit_report, parse_report_csv, report_columns
from .synthetic import BenchSpec, SyntheticBench, generate_synthetic

__all__ = [
    "BenchSpec",
    "EvalSample",
    "MetricReport",
    "QueryRecord",
    "ReportRow",
    "SyntheticBench",
    "config_label",
    "dump_dataset",
    "emit_report",
    "generate_synthetic",
    "load_dataset",
    "load_supplement",
    "merge_judgments",
    "parse_report_csv",
    "report_columns",
    "run_experiment",
    "write_results",
]
