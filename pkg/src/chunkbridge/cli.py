"""Command-line interface.

Subcommands: build, query, bench, stats. stdout carries only the
machine-readable payload (JSON, or the bench table); diagnostics go to
stderr. Exit codes: 0 success, 1 runtime failure, 2 malformed input
(message names the offending line), 3 filter capacity exhausted, 4 index
file corruption (CRC/structure), 64 usage errors.

Config fields can be set per invocation with flags or with environment
variables named CHUNKBRIDGE_<FIELD> (e.g. CHUNKBRIDGE_K=8); flags win.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .bench import FalseNegativeError, fpr_report, run_ablation, run_speed_comparison
from .config import MAX_EXPANSION_DEPTH, Config
from .cuckoo import CapacityError
from .embed import EmbeddingError
from .indexfile import CorruptIndexError, load_index, save_index
from .ingest import (
    BuildError,
    InputFormatError,
    build_index,
    read_corpus_jsonl,
    read_entities_jsonl,
    read_relations_tsv,
)
from .report import render_figures, render_table, write_csv
from .retrieve import retrieve_context

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_BAD_INPUT = 2
EXIT_CAPACITY = 3
EXIT_CORRUPT = 4
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    """argparse parser whose usage errors exit with code 64."""

    def error(self, message: str):
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _depth(value: str) -> int:
    try:
        depth = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"depth must be an integer, got {value!r}")
    if not 1 <= depth <= MAX_EXPANSION_DEPTH:
        raise argparse.ArgumentTypeError(
            f"depth must be in 1..{MAX_EXPANSION_DEPTH}, got {depth}"
        )
    return depth


def _positive(value: str) -> int:
    try:
        n = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {value!r}")
    if n < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {n}")
    return n


def _build_parser() -> _Parser:
    parser = _Parser(prog="chunkbridge", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_build = sub.add_parser("build", parents=[], help="build an index from a JSONL corpus")
    p_build.add_argument("--corpus", required=True, help="JSONL file of {doc_id, text}")
    p_build.add_argument("--out", required=True, help="output index path")
    p_build.add_argument("--entities", help="optional entities.jsonl sidecar")
    p_build.add_argument("--relations", help="optional relations.tsv sidecar")
    p_build.add_argument("--chunk-len", type=_positive, dest="chunk_len")
    p_build.add_argument("--embed-dim", type=_positive, dest="embed_dim")
    p_build.add_argument("--k", type=_positive)
    p_build.add_argument("--depth", type=_depth, dest="max_depth")
    p_build.add_argument("--min-entity-count", type=_positive, dest="min_entity_count")
    p_build.add_argument("--initial-buckets", type=_positive, dest="initial_buckets")
    p_build.add_argument("--max-kicks", type=_positive, dest="max_kicks")
    p_build.add_argument("--seed", type=int, dest="rng_seed")
    p_build.add_argument("--json", action="store_true", help="accepted; output is JSON already")
    p_build.set_defaults(func=_cmd_build)

    p_query = sub.add_parser("query", help="run one query against an index")
    p_query.add_argument("--index", required=True)
    p_query.add_argument("--k", type=_positive)
    p_query.add_argument("--depth", type=_depth, dest="max_depth")
    p_query.add_argument("--json", action="store_true", help="accepted; output is JSON already")
    p_query.add_argument("query", help="the question text")
    p_query.set_defaults(func=_cmd_query)

    p_bench = sub.add_parser("bench", help="run a benchmark against an index")
    p_bench.add_argument("--index", required=True)
    p_bench.add_argument("--mode", required=True, choices=("speed", "ablation", "fpr"))
    p_bench.add_argument("--queries", help="text file, one query per line (speed/ablation)")
    p_bench.add_argument("--rounds", type=_positive, default=5, help="ablation rounds")
    p_bench.add_argument("--sorting", choices=("on", "off"), default="on")
    p_bench.add_argument("--iterations", type=_positive, default=10)
    p_bench.add_argument("--warmup", type=int, default=2)
    p_bench.add_argument("--samples", type=_positive, help="fpr non-member sample size")
    p_bench.add_argument("--k", type=_positive)
    p_bench.add_argument("--depth", type=_depth, dest="max_depth")
    p_bench.add_argument("--out-dir", help="directory for CSV and figures (default: <index>.bench.<mode>)")
    p_bench.add_argument("--json", action="store_true", help="emit JSON instead of the table")
    p_bench.set_defaults(func=_cmd_bench)

    p_stats = sub.add_parser("stats", help="print index statistics")
    p_stats.add_argument("--index", required=True)
    p_stats.add_argument("--json", action="store_true", help="accepted; output is JSON already")
    p_stats.set_defaults(func=_cmd_stats)

    return parser


def _config_from(args: argparse.Namespace) -> Config:
    cfg = Config.from_env()
    for name in (
        "chunk_len",
        "embed_dim",
        "k",
        "max_depth",
        "min_entity_count",
        "initial_buckets",
        "max_kicks",
        "rng_seed",
    ):
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    cfg.validate()
    return cfg


def _cmd_build(args: argparse.Namespace) -> int:
    config = _config_from(args)
    documents = read_corpus_jsonl(args.corpus)
    entities = read_entities_jsonl(args.entities) if args.entities else None
    relations = read_relations_tsv(args.relations) if args.relations else None
    print(f"building index from {len(documents)} documents...", file=sys.stderr)
    bundle, report = build_index(documents, config, entities=entities, relations=relations)
    save_index(bundle, args.out)
    print(f"wrote {args.out}", file=sys.stderr)
    print(json.dumps(report.to_dict(), indent=2))
    return EXIT_OK


def _cmd_query(args: argparse.Namespace) -> int:
    bundle = load_index(args.index)
    result = retrieve_context(args.query, bundle, k=args.k, max_depth=args.max_depth)
    print(json.dumps(result.to_dict(), indent=2))
    return EXIT_OK


def _read_queries(path: str) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        queries = [line.strip() for line in fh if line.strip()]
    if not queries:
        raise InputFormatError(path, 1, "no queries in file")
    return queries


def _cmd_bench(args: argparse.Namespace) -> int:
    bundle = load_index(args.index)
    if args.mode in ("speed", "ablation") and not args.queries:
        raise InputFormatError("<args>", 0, f"--queries is required for mode {args.mode}")
    if args.mode == "speed":
        queries = _read_queries(args.queries)
        report = run_speed_comparison(
            queries,
            bundle,
            k=args.k,
            max_depth=args.max_depth,
            iterations=args.iterations,
            warmup=max(0, args.warmup),
        )
    elif args.mode == "ablation":
        queries = _read_queries(args.queries)
        report = run_ablation(
            queries, bundle, rounds=args.rounds, sorting=args.sorting == "on"
        )
    else:
        members = [e for e in bundle.dictionary.entities() if bundle.filter.contains(e)]
        if not members:
            raise BuildError("index has no filter-resident entities to measure")
        n = args.samples if args.samples is not None else len(members)
        dictionary = bundle.dictionary
        non_members = []
        i = 0
        while len(non_members) < n:
            candidate = f"absent probe {i}"
            if candidate not in dictionary:
                non_members.append(candidate)
            i += 1
        report = fpr_report(bundle.filter, members, non_members)

    out_dir = args.out_dir or f"{args.index}.bench.{args.mode}"
    write_csv(report, _ensure_dir_csv(out_dir))
    figures = render_figures(report, out_dir)
    print(f"wrote {out_dir}/report.csv and {len(figures)} figure(s)", file=sys.stderr)
    if args.json:
        print(json.dumps(report.to_dict(), indent=2))
    else:
        print(render_table(report))
    return EXIT_OK


def _ensure_dir_csv(out_dir: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    return os.path.join(out_dir, "report.csv")


def _cmd_stats(args: argparse.Namespace) -> int:
    bundle = load_index(args.index)
    payload = {
        "config": bundle.config.to_dict(),
        "chunks": len(bundle.store),
        "embedding_dim": bundle.store.dim,
        "dictionary_entities": len(bundle.dictionary),
        "filter": bundle.filter.stats().to_dict(),
        "forest": bundle.forest.shape(),
    }
    print(json.dumps(payload, indent=2))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except InputFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except CorruptIndexError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CORRUPT
    except FalseNegativeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (BuildError, EmbeddingError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
