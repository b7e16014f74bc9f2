"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 provider/transport error.
"""

from __future__ import annotations

import argparse
import json
import logging
import signal
import sys
from collections.abc import Sequence
from dataclasses import replace
from pathlib import Path

from .catalog import DataLevel
from .errors import ConfigError, DataError, ProviderError
from .evalharness import (
    BenchSpec,
    dump_dataset,
    generate_synthetic,
    load_dataset,
    load_supplement,
    merge_judgments,
    run_experiment,
    write_results,
)
from .evalharness.datasets import COHORTS
from .pipeline import RetrieverConfig, SearchConfig, index_path, load_config, load_grid, run_search
from .store import Store, ingest, read_file, write_store

log = logging.getLogger("eclass_search")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_PROVIDER = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit with 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _category_level(value: str) -> int:
    try:
        level = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid category level {value!r}") from None
    if not 0 <= level <= 4:
        raise argparse.ArgumentTypeError(f"category level must be 0..4, got {level}")
    return level


def _ks(value: str) -> tuple[int, ...]:
    try:
        ks = tuple(int(v) for v in value.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid k list {value!r}") from None
    if not ks or min(ks) < 1:
        raise argparse.ArgumentTypeError("k values must be >= 1")
    return ks


def cmd_ingest(args: argparse.Namespace) -> int:
    store = ingest(args.taxonomy, args.catalog, args.out, args.synonyms)
    print(store.summary())
    return EXIT_OK


def cmd_index(args: argparse.Namespace) -> int:
    store = Store(args.store)
    retriever = RetrieverConfig(
        kind=args.retriever,
        provider=args.provider,
        dimension=args.dim,
        model=args.model,
        seed=args.seed,
        use_synonyms=args.use_synonyms,
        k1=args.k1,
        b=args.b,
    )
    config = SearchConfig(data_level=args.data_level, category_level=args.category_level, retriever=retriever)
    path = index_path(store.index_dir, store.products, store.taxonomy, config, store.synonyms)
    hit = path.exists()
    indices = store.prepare([config])
    prepared = indices.get(config)
    rows = len(prepared.vectors) if prepared.vectors is not None else prepared.bm25.doc_count
    print(f"{'cache hit' if hit else 'built'} {path} rows={rows}")
    return EXIT_OK


def _search_config(args: argparse.Namespace) -> SearchConfig:
    config = load_config(args.config)
    changes = {}
    if getattr(args, "top_k", None) is not None:
        changes["top_k"] = args.top_k
        changes["final_k"] = min(config.final_k, args.top_k)
    if getattr(args, "final_k", None) is not None:
        changes["final_k"] = args.final_k
    return replace(config, **changes) if changes else config


def cmd_search(args: argparse.Namespace) -> int:
    if not args.query.strip():
        raise UsageError("query is blank")
    store = Store(args.store)
    config = _search_config(args)
    indices = store.prepare([config])
    outcome = run_search(config, indices, args.query)
    if args.json:
        print(json.dumps(outcome.to_json(), ensure_ascii=False, indent=2))
        return EXIT_OK
    print(f"{'rank':>4}  {'article_number':<16} {'score':>10}  name")
    for rank, (pid, score) in enumerate(outcome.results, start=1):
        print(f"{rank:>4}  {pid:<16} {score:>10.6f}  {outcome.names.get(pid, '')}")
    t = outcome.timings
    print(
        f"timings rewrite_ms={t.rewrite_ms:.2f} embed_ms={t.embed_ms:.2f} retrieve_ms={t.retrieve_ms:.2f} "
        f"rerank_ms={t.rerank_ms:.2f} total_ms={t.total_ms:.2f}"
    )
    return EXIT_OK


def _run_eval(args: argparse.Namespace, grid: list[SearchConfig]) -> int:
    store = Store(args.store)
    known = {p.article_number for p in store.products}
    dataset = load_dataset(read_file(args.dataset), known)
    if args.supplement:
        dataset = merge_judgments(dataset, load_supplement(read_file(args.supplement)), known)
    if args.cohort:
        dataset = [s for s in dataset if s.cohort == args.cohort]
        if not dataset:
            raise DataError(f"no samples in cohort {args.cohort}")
    indices = store.prepare(grid)
    report = run_experiment(
        grid, dataset, indices, ks=args.ks, workers=args.workers,
        timing=not args.no_timing, include_combined=args.combined,
    )
    written = write_results(report, args.out)
    if not args.no_figures:
        from .evalharness.figures import render_figures

        written += render_figures(report, Path(args.out) / "figures")
    print(f"rows={len(report.rows)} configs={len(grid)} queries={len(dataset)} out={args.out}")
    for path in written:
        log.info("wrote %s", path)
    return EXIT_OK


def _interrupt(signum, frame):
    raise KeyboardInterrupt


def cmd_eval(args: argparse.Namespace) -> int:
    if bool(args.config) == bool(args.grid):
        raise UsageError("eval needs exactly one of --config or --grid")
    grid = [load_config(args.config)] if args.config else load_grid(args.grid)
    return _run_eval(args, grid)


def cmd_ablate(args: argparse.Namespace) -> int:
    return _run_eval(args, load_grid(args.grid))


def cmd_synth(args: argparse.Namespace) -> int:
    spec = BenchSpec(
        seed=args.seed,
        n_segments=args.segments,
        fanout=(args.main_groups, args.groups),
        n_commodity_classes=args.classes,
        products_per_class=args.products_per_class,
        queries_per_class=args.queries_per_class,
        query_length=args.query_length,
        mismatch_rate=args.mismatch_rate,
        definition_rate=args.definition_rate,
        keyword_rate=args.keyword_rate,
        synonym_rate=args.synonym_rate,
    )
    bench = generate_synthetic(spec)
    out = Path(args.out)
    write_store(out, bench.taxonomy, bench.products, bench.synonyms)
    (out / "dataset.jsonl").write_text(dump_dataset(bench.dataset), encoding="utf-8")
    print(f"{Store(out).summary()} queries={len(bench.dataset)} out={out}")
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    from .server import SearchService, make_server

    host, _, port = args.listen.rpartition(":")
    if not port.isdigit():
        raise UsageError(f"--listen must be host:port, got {args.listen!r}")
    store = Store(args.store)
    config = load_config(args.config)
    service = SearchService(config, store.prepare([config]))
    server = make_server(service, host or "127.0.0.1", int(port))
    signal.signal(signal.SIGTERM, _interrupt)
    print(f"listening on http://{server.server_address[0]}:{server.server_address[1]}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="eclass-search", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("ingest", help="validate a taxonomy + catalog into a store directory")
    s.add_argument("--taxonomy", required=True)
    s.add_argument("--catalog", required=True)
    s.add_argument("--synonyms", help="JSON map of user token -> catalog token")
    s.add_argument("--out", required=True, help="store directory")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("index", help="build (or reuse) a persisted index")
    s.add_argument("--store", required=True)
    s.add_argument("--data-level", choices=[d.value for d in DataLevel], default="basic")
    s.add_argument("--category-level", type=_category_level, default=1)
    s.add_argument("--retriever", choices=["dense", "bm25"], default="dense")
    s.add_argument("--provider", choices=["hashing", "remote"], default="hashing")
    s.add_argument("--dim", type=int, default=512)
    s.add_argument("--model")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--use-synonyms", action="store_true")
    s.add_argument("--k1", type=float, default=1.2)
    s.add_argument("--b", type=float, default=0.75)
    s.set_defaults(func=cmd_index)

    s = sub.add_parser("search", help="run one query")
    s.add_argument("--store", required=True)
    s.add_argument("--config", required=True, help="search config JSON")
    s.add_argument("--top-k", type=int)
    s.add_argument("--final-k", type=int)
    s.add_argument("--json", action="store_true", help="emit the full outcome as JSON")
    s.add_argument("query")
    s.set_defaults(func=cmd_search)

    for name, func, doc in (
        ("eval", cmd_eval, "evaluate one config (or a grid) on a dataset"),
        ("ablate", cmd_ablate, "evaluate a config grid and render figures"),
    ):
        s = sub.add_parser(name, help=doc)
        s.add_argument("--store", required=True)
        s.add_argument("--dataset", required=True, help="JSON-lines evaluation samples")
        s.add_argument("--supplement", help="JSON map of query_id -> extra relevant ids")
        if name == "eval":
            s.add_argument("--config")
            s.add_argument("--grid")
        else:
            s.add_argument("--grid", required=True)
        s.add_argument("--out", required=True, help="results directory")
        s.add_argument("--ks", type=_ks, default=(5, 20), help="comma-separated cutoffs (default 5,20)")
        s.add_argument("--cohort", choices=list(COHORTS))
        s.add_argument("--combined", action="store_true", help="also report the pooled cohort")
        s.add_argument("--workers", type=int, default=1)
        s.add_argument("--no-timing", action="store_true", help="report zero latency for reproducible files")
        s.add_argument("--no-figures", action="store_true", default=(name == "eval"))
        if name == "eval":
            s.add_argument("--figures", dest="no_figures", action="store_false")
        s.set_defaults(func=func)

    s = sub.add_parser("synth", help="generate a synthetic benchmark store")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--segments", type=int, default=2)
    s.add_argument("--main-groups", type=int, default=2)
    s.add_argument("--groups", type=int, default=2)
    s.add_argument("--classes", type=int, default=40)
    s.add_argument("--products-per-class", type=int, default=25)
    s.add_argument("--queries-per-class", type=int, default=3)
    s.add_argument("--query-length", type=int, default=3)
    s.add_argument("--mismatch-rate", type=float, default=0.8)
    s.add_argument("--definition-rate", type=float, default=0.68)
    s.add_argument("--keyword-rate", type=float, default=0.53)
    s.add_argument("--synonym-rate", type=float, default=1.0)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("serve", help="serve /health and /search over HTTP")
    s.add_argument("--store", required=True)
    s.add_argument("--config", required=True)
    s.add_argument("--listen", default="127.0.0.1:8080")
    s.set_defaults(func=cmd_serve)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help, or a usage error from _Parser
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ProviderError as exc:
        print(f"provider error: {exc}", file=sys.stderr)
        return EXIT_PROVIDER


if __name__ == "__main__":
    sys.exit(main())
