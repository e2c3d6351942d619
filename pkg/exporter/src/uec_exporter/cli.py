"""Command-line entry point for the exporter.

    uec-export store --job job.json --out store.uecs
    uec-export pairs --positives pos.tsv --corpus ids.txt --out pairs.tsv

Exit codes: 0 success, 1 usage error, 2 data/encoder error.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ExporterError, JobError
from .export import export_pairs, export_store
from .job import ExportJob


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _read_positives(path: str) -> list[tuple[str, str]]:
    positives = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ExporterError(
                    f"{path}:{lineno}: expected query_id<TAB>doc_id, got {len(parts)} fields"
                )
            positives.append((parts[0], parts[1]))
    return positives


def _read_corpus_ids(path: str) -> list[str]:
    with open(path, "r", encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip()]


def _cmd_store(args) -> int:
    job = ExportJob.from_path(args.job)
    count = export_store(job, args.out)
    print(f"exported {count} embeddings ({job.encoder_id}) -> {args.out}")
    return 0


def _cmd_pairs(args) -> int:
    positives = _read_positives(args.positives)
    corpus = _read_corpus_ids(args.corpus)
    count = export_pairs(
        positives, corpus, args.out,
        negatives_per_positive=args.negatives_per_positive,
        seed=args.seed,
    )
    print(f"wrote {count} labeled pairs -> {args.out}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="uec-export", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("store", help="encode texts and write a UECS store")
    p.add_argument("--job", required=True, help="JSON job document")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_store)

    p = sub.add_parser("pairs", help="write a labeled pair TSV with sampled negatives")
    p.add_argument("--positives", required=True, help="TSV of query_id<TAB>doc_id")
    p.add_argument("--corpus", required=True, help="file of candidate doc ids, one per line")
    p.add_argument("--negatives-per-positive", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_pairs)

    return parser


def dispatch(argv: list[str]) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except (ExporterError, JobError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main(argv: list[str] | None = None) -> int:
    code = dispatch(sys.argv[1:] if argv is None else argv)
    if argv is None:
        sys.exit(code)
    return code
