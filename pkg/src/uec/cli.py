"""Command-line entry point: fit, probabilize, convolve, search, eval, synth, ablate, profile.

Every subcommand is a thin composition of library calls; resolved
hyperparameters are echoed to stderr for reproducibility. Exit codes:
0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import store_io
from .convolution import CoefficientConfig, DEFAULT_TEMPERATURE
from .core import EnsembleInput
from .errors import StoreFormatError, UecError, UsageError
from .evaluation import (
    SynthSpec,
    ablation_run,
    classify_probe,
    coefficient_profile,
    convolve_ensemble,
    format_profile_csv,
    format_report_table,
    ndcg_at_k,
    nauc_abstention,
    recall_at_k,
    spearman,
    synth_generate,
)
from .laplace import LaplaceFitConfig, PairExample, fit_laplace, probabilize_store
from .retrieval import build_index, search_batch
from .similarity import DEFAULT_BETA, SimilarityConfig

log = logging.getLogger("uec")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _echo_config(command: str, **params) -> None:
    rendered = " ".join(f"{k}={v}" for k, v in params.items())
    log.info("config: command=%s %s", command, rendered)


def _read_pairs_tsv(path: str) -> list[tuple[str, str, int]]:
    pairs = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise StoreFormatError(
                    f"{path}:{lineno}: expected 3 tab-separated fields, got {len(parts)}"
                )
            qid, did, label_text = parts
            if label_text not in ("0", "1"):
                raise StoreFormatError(f"{path}:{lineno}: label must be 0 or 1")
            pairs.append((qid, did, int(label_text)))
    return pairs


def _read_labels_tsv(path: str) -> dict[str, str]:
    labels = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise StoreFormatError(
                    f"{path}:{lineno}: expected 2 tab-separated fields, got {len(parts)}"
                )
            labels[parts[0]] = parts[1]
    return labels


# --- subcommand implementations ----------------------------------------------


def _cmd_fit(args) -> int:
    store = store_io.read_store(args.store)
    cfg = LaplaceFitConfig(
        prior_precision=args.prior_precision,
        max_iterations=args.max_iterations,
        gradient_tolerance=args.gradient_tolerance,
    )
    _echo_config("fit", pairs=args.pairs, store=args.store,
                 prior_precision=cfg.prior_precision,
                 max_iterations=cfg.max_iterations,
                 gradient_tolerance=cfg.gradient_tolerance)
    lookup = store.as_dict()
    data = []
    for qid, did, label in _read_pairs_tsv(args.pairs):
        if qid not in lookup or did not in lookup:
            raise UecError(f"pair ({qid!r}, {did!r}) references ids missing from the store")
        data.append(PairExample(lookup[qid].mean, lookup[did].mean, label))
    posterior = fit_laplace(data, cfg, dim=store.dim, model_name=store.model_name)
    store_io.write_posterior(posterior, args.out)
    print(f"fit {len(data)} pairs -> {args.out}")
    return 0


def _cmd_probabilize(args) -> int:
    _echo_config("probabilize", store=args.store, posterior=args.posterior)
    store = store_io.read_store(args.store)
    posterior = store_io.read_posterior(args.posterior)
    store_io.write_store(probabilize_store(store, posterior), args.out)
    print(f"probabilized {len(store)} records -> {args.out}")
    return 0


def _coeff_config(args) -> CoefficientConfig:
    mode_map = {
        "bayes": "bayes_inverse_trace",
        "full": "full_form",
        "uniform": "uniform",
        "fixed": "fixed",
    }
    mode = mode_map[args.mode]
    weights = None
    if mode == "fixed":
        if not args.weights:
            raise UsageError("--weights is required with --mode fixed")
        weights = tuple(float(x) for x in args.weights.split(","))
    elif args.weights:
        raise UsageError("--weights only applies to --mode fixed")
    return CoefficientConfig(mode=mode, temperature=args.temperature, fixed_weights=weights)


def _cmd_convolve(args) -> int:
    cfg = _coeff_config(args)
    _echo_config("convolve", stores=args.stores, mode=cfg.mode,
                 temperature=cfg.temperature, weights=cfg.fixed_weights)
    inputs = EnsembleInput(tuple(store_io.read_store(p) for p in args.stores))
    store_io.write_store(convolve_ensemble(inputs, cfg), args.out)
    print(f"convolved {inputs.n_models} stores -> {args.out}")
    return 0


def _cmd_search(args) -> int:
    sim_cfg = SimilarityConfig(
        beta=args.beta,
        mode="uncertainty_probit" if args.similarity == "probit" else "mean_dot",
        normalize_inputs=not args.no_normalize,
    )
    workers = args.workers if args.workers else (os.cpu_count() or 1)
    _echo_config("search", index=args.index, queries=args.queries, k=args.k,
                 beta=sim_cfg.beta, similarity=sim_cfg.mode,
                 normalize=sim_cfg.normalize_inputs, workers=workers)
    index = build_index(store_io.read_store(args.index), sim_cfg)
    queries = store_io.read_store(args.queries)
    results = search_batch(index, queries, args.k, workers=workers)
    store_io.write_run(results, args.run)
    print(f"searched {len(queries)} queries over {index.size} docs -> {args.run}")
    return 0


def _cmd_eval(args) -> int:
    _echo_config("eval", task=args.task, metrics=args.metrics, k=args.k)
    if args.task == "retrieval":
        if not (args.run and args.qrels):
            raise UsageError("eval --task retrieval requires --run and --qrels")
        run = store_io.read_run(args.run)
        qrels = store_io.read_qrels(args.qrels)
        wanted = args.metrics or [f"ndcg@{args.k}", f"recall@{args.k}", f"nauc@{args.k}"]
        report = {}
        for metric in wanted:
            name, _, k_text = metric.partition("@")
            k = int(k_text) if k_text else args.k
            if name == "ndcg":
                report[f"ndcg@{k}"] = ndcg_at_k(run, qrels, k)
            elif name == "recall":
                report[f"recall@{k}"] = recall_at_k(run, qrels, k)
            elif name == "nauc":
                from .evaluation import ndcg_per_query
                values, _ = ndcg_per_query(run, qrels, k)
                per_query = [
                    (qid, values[qid], run[qid][0][1] if run[qid] else 0.0)
                    for qid in values
                ]
                report[f"nauc@{k}"] = nauc_abstention(per_query)
            else:
                raise UsageError(f"unknown retrieval metric {metric!r}")
    elif args.task == "sts":
        if not args.scores:
            raise UsageError("eval --task sts requires --scores (pred<TAB>gold)")
        pred, gold = [], []
        with open(args.scores, "r", encoding="utf-8", newline="") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.rstrip("\r\n")
                if not line:
                    continue
                parts = line.split("\t")
                if len(parts) != 2:
                    raise StoreFormatError(
                        f"{args.scores}:{lineno}: expected 2 fields, got {len(parts)}"
                    )
                pred.append(float(parts[0]))
                gold.append(float(parts[1]))
        report = {"spearman": spearman(pred, gold)}
    else:  # classification
        needed = (args.train_store, args.train_labels, args.test_store, args.test_labels)
        if not all(needed):
            raise UsageError(
                "eval --task classification requires --train-store, --train-labels, "
                "--test-store, --test-labels"
            )
        train = store_io.read_store(args.train_store)
        test = store_io.read_store(args.test_store)
        train_labels = _read_labels_tsv(args.train_labels)
        test_labels = _read_labels_tsv(args.test_labels)
        accuracy, macro_f1 = classify_probe(
            np.stack([rec.embedding.mean for rec in train.records]),
            [train_labels[rec.id] for rec in train.records],
            np.stack([rec.embedding.mean for rec in test.records]),
            [test_labels[rec.id] for rec in test.records],
        )
        report = {"accuracy": accuracy, "macro_f1": macro_f1}

    print(json.dumps(report, indent=2))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2)
    return 0


def _spec_from_args(args) -> SynthSpec:
    overrides = {}
    if args.spec:
        with open(args.spec, "r", encoding="utf-8") as fh:
            overrides = json.load(fh)
    if args.seed is not None:
        overrides["seed"] = args.seed
    return SynthSpec(**overrides)


def _cmd_synth(args) -> int:
    spec = _spec_from_args(args)
    _echo_config("synth", **vars(spec))
    docs, queries, qrels = synth_generate(spec)
    os.makedirs(args.out, exist_ok=True)
    for m, store in enumerate(docs.stores):
        store_io.write_store(store, os.path.join(args.out, f"docs_model{m}.uecs"))
    for m, store in enumerate(queries.stores):
        store_io.write_store(store, os.path.join(args.out, f"queries_model{m}.uecs"))
    store_io.write_qrels(qrels, os.path.join(args.out, "qrels.tsv"))
    with open(os.path.join(args.out, "synth_spec.json"), "w", encoding="utf-8") as fh:
        json.dump(vars(spec), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"synthesized {spec.n_models} models x ({len(docs.stores[0])} docs, "
          f"{len(queries.stores[0])} queries) -> {args.out}")
    return 0


def _load_synth_dir(path: str) -> tuple[EnsembleInput, EnsembleInput, dict]:
    doc_stores, query_stores = [], []
    m = 0
    while os.path.exists(os.path.join(path, f"docs_model{m}.uecs")):
        doc_stores.append(store_io.read_store(os.path.join(path, f"docs_model{m}.uecs")))
        query_stores.append(store_io.read_store(os.path.join(path, f"queries_model{m}.uecs")))
        m += 1
    if not doc_stores:
        raise UecError(f"no docs_model*.uecs stores found in {path!r}")
    qrels = store_io.read_qrels(os.path.join(path, "qrels.tsv"))
    return EnsembleInput(tuple(doc_stores)), EnsembleInput(tuple(query_stores)), qrels


def _cmd_ablate(args) -> int:
    _echo_config("ablate", data=args.data, temperature=args.temperature,
                 beta=args.beta, k=args.k)
    docs, queries, qrels = _load_synth_dir(args.data)
    report = ablation_run(docs, queries, qrels,
                          temperature=args.temperature, beta=args.beta, k=args.k)
    print(format_report_table(report))
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    return 0


def _cmd_profile(args) -> int:
    cfg = CoefficientConfig(mode="bayes_inverse_trace", temperature=args.temperature)
    _echo_config("profile", queries=args.queries, temperature=args.temperature)
    queries = EnsembleInput(tuple(store_io.read_store(p) for p in args.queries))
    domains, model_names, matrix = coefficient_profile(queries, cfg)
    csv_text = format_profile_csv(domains, model_names, matrix)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(csv_text)
    print(csv_text, end="")
    return 0


# --- parser wiring -------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="uec", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a Laplace posterior from labeled pairs")
    p.add_argument("--pairs", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--prior-precision", type=float, default=1.0)
    p.add_argument("--max-iterations", type=int, default=100)
    p.add_argument("--gradient-tolerance", type=float, default=1e-8)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("probabilize", help="turn a deterministic store Gaussian")
    p.add_argument("--store", required=True)
    p.add_argument("--posterior", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_probabilize)

    p = sub.add_parser("convolve", help="fuse aligned stores with per-record weights")
    p.add_argument("stores", nargs="+")
    p.add_argument("--mode", choices=("bayes", "full", "uniform", "fixed"), default="bayes")
    p.add_argument("--weights", default=None, help="comma-separated, fixed mode only")
    p.add_argument("--temperature", type=float, default=DEFAULT_TEMPERATURE)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_convolve)

    p = sub.add_parser("search", help="brute-force top-k retrieval")
    p.add_argument("--index", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--beta", type=float, default=DEFAULT_BETA)
    p.add_argument("--similarity", choices=("probit", "dot"), default="probit")
    p.add_argument("--no-normalize", action="store_true")
    p.add_argument("--workers", type=int, default=0, help="0 = available parallelism")
    p.add_argument("--run", required=True)
    p.set_defaults(func=_cmd_search)

    p = sub.add_parser("eval", help="evaluate a task")
    p.add_argument("--task", choices=("retrieval", "sts", "classification"), required=True)
    p.add_argument("--run")
    p.add_argument("--qrels")
    p.add_argument("--scores")
    p.add_argument("--train-store")
    p.add_argument("--train-labels")
    p.add_argument("--test-store")
    p.add_argument("--test-labels")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--metrics", nargs="*", default=None)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("synth", help="generate the synthetic specialist corpus")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--spec", default=None, help="JSON file of SynthSpec overrides")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("ablate", help="run the 2x2 uncertainty ablation")
    p.add_argument("--data", required=True)
    p.add_argument("--temperature", type=float, default=DEFAULT_TEMPERATURE)
    p.add_argument("--beta", type=float, default=DEFAULT_BETA)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_ablate)

    p = sub.add_parser("profile", help="per-domain mean coefficient table")
    p.add_argument("--queries", nargs="+", required=True)
    p.add_argument("--temperature", type=float, default=DEFAULT_TEMPERATURE)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_profile)

    return parser


def dispatch(argv: list[str]) -> int:
    logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                        format="%(name)s %(levelname)s %(message)s")
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except UecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main(argv: list[str] | None = None) -> int:
    code = dispatch(sys.argv[1:] if argv is None else argv)
    if argv is None:
        sys.exit(code)
    return code
