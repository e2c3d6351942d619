"""Metrics, baselines, the synthetic specialist benchmark, and the ablation runner.

Retrieval quality is NDCG@k / Recall@k; confidence calibration is the
normalized abstention AUC (nAUC); STS uses Spearman rank correlation and
classification a logistic probe. The synthetic generator builds a
multi-domain corpus where each model is reliable on exactly one domain,
so uncertainty-driven weighting has a provable edge over uniform
averaging at desk scale.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .convolution import (
    CoefficientConfig,
    coefficients_for,
    convolve,
)
from .core import (
    EmbeddingRecord,
    EmbeddingStore,
    EnsembleInput,
    GaussianEmbedding,
)
from .errors import DimensionMismatchError, UecError, UndefinedCorrelationError
from .laplace import newton_logistic
from .retrieval import QueryResult, build_index, search_batch
from .similarity import SimilarityConfig

log = logging.getLogger(__name__)

Qrels = dict[str, dict[str, int]]
RunRanking = dict[str, list[tuple[str, float]]]

_trapezoid = getattr(np, "trapezoid", None) or np.trapz


# --- ranking metrics ---------------------------------------------------------


def _gain(grade: int) -> float:
    return float(2**grade - 1)


def ndcg_per_query(run: RunRanking, qrels: Qrels, k: int) -> tuple[dict[str, float], int]:
    """Per-query NDCG@k; returns (values, skipped-query count)."""
    if k < 1:
        raise UecError("k must be >= 1")
    values: dict[str, float] = {}
    skipped = 0
    for qid, ranking in run.items():
        judged = qrels.get(qid)
        if not judged or not any(g > 0 for g in judged.values()):
            skipped += 1
            continue
        dcg = 0.0
        for rank, (did, _score) in enumerate(ranking[:k], start=1):
            grade = judged.get(did, 0)
            if grade > 0:
                dcg += _gain(grade) / math.log2(rank + 1)
        ideal_grades = sorted((g for g in judged.values() if g > 0), reverse=True)
        idcg = sum(
            _gain(g) / math.log2(rank + 1)
            for rank, g in enumerate(ideal_grades[:k], start=1)
        )
        values[qid] = dcg / idcg
    if skipped:
        log.warning("ndcg@%d: skipped %d queries without positive judgments", k, skipped)
    return values, skipped


def ndcg_at_k(run: RunRanking, qrels: Qrels, k: int) -> float:
    values, _ = ndcg_per_query(run, qrels, k)
    if not values:
        raise UecError("no judged queries to evaluate")
    return float(np.mean(list(values.values())))


def recall_per_query(run: RunRanking, qrels: Qrels, k: int) -> tuple[dict[str, float], int]:
    """Proportional recall@k: |relevant in top-k| / |relevant|."""
    if k < 1:
        raise UecError("k must be >= 1")
    values: dict[str, float] = {}
    skipped = 0
    for qid, ranking in run.items():
        judged = qrels.get(qid)
        relevant = {did for did, g in (judged or {}).items() if g > 0}
        if not relevant:
            skipped += 1
            continue
        retrieved = {did for did, _ in ranking[:k]}
        values[qid] = len(relevant & retrieved) / len(relevant)
    if skipped:
        log.warning("recall@%d: skipped %d queries without positive judgments", k, skipped)
    return values, skipped


def recall_at_k(run: RunRanking, qrels: Qrels, k: int) -> float:
    values, _ = recall_per_query(run, qrels, k)
    if not values:
        raise UecError("no judged queries to evaluate")
    return float(np.mean(list(values.values())))


# --- abstention curves -------------------------------------------------------


@dataclass(frozen=True)
class AbstentionCurve:
    points: tuple[tuple[float, float], ...]  # (abstention_rate, mean metric)
    auc_actual: float
    auc_baseline: float
    auc_oracle: float


def _curve(metrics: np.ndarray, drop_order: np.ndarray) -> np.ndarray:
    n = metrics.size
    remaining = float(metrics.sum())
    count = n
    values = np.empty(n)
    for i in range(n):
        values[i] = remaining / count
        remaining -= metrics[drop_order[i]]
        count -= 1
    return values


def abstention_curve(per_query_metric: list[tuple[str, float, float]]) -> AbstentionCurve:
    """Curve of mean metric vs abstention rate, lowest-confidence-first.

    Rates are {0, 1/N, ..., (N-1)/N}; ties in confidence or metric keep
    input order (stable sort). AUC is trapezoidal.
    """
    if len(per_query_metric) < 2:
        raise UecError("abstention curves need at least 2 queries")
    metrics = np.array([m for _, m, _ in per_query_metric], dtype=np.float64)
    conf = np.array([c for _, _, c in per_query_metric], dtype=np.float64)
    n = metrics.size
    rates = np.arange(n) / n

    actual_vals = _curve(metrics, np.argsort(conf, kind="stable"))
    oracle_vals = _curve(metrics, np.argsort(metrics, kind="stable"))
    baseline_vals = np.full(n, metrics.mean())

    return AbstentionCurve(
        points=tuple(zip(rates.tolist(), actual_vals.tolist())),
        auc_actual=float(_trapezoid(actual_vals, rates)),
        auc_baseline=float(_trapezoid(baseline_vals, rates)),
        auc_oracle=float(_trapezoid(oracle_vals, rates)),
    )


def nauc_abstention(per_query_metric: list[tuple[str, float, float]]) -> float:
    """(AUC_actual - AUC_baseline) / (AUC_oracle - AUC_baseline).

    Returns 0 by convention when the oracle cannot beat the baseline
    (all metrics identical).
    """
    curve = abstention_curve(per_query_metric)
    denom = curve.auc_oracle - curve.auc_baseline
    if abs(denom) < 1e-15:
        return 0.0
    return (curve.auc_actual - curve.auc_baseline) / denom


# --- STS and classification --------------------------------------------------


def spearman(pred, gold) -> float:
    """Spearman rho with average-rank tie handling."""
    p = np.asarray(pred, dtype=np.float64)
    g = np.asarray(gold, dtype=np.float64)
    if p.shape != g.shape or p.ndim != 1:
        raise DimensionMismatchError("pred and gold must be equal-length vectors")
    if p.size < 2:
        raise UecError("spearman needs at least 2 points")
    rp = rankdata(p, method="average")
    rg = rankdata(g, method="average")
    if rp.std() == 0.0 or rg.std() == 0.0:
        raise UndefinedCorrelationError("constant input: rank variance is zero")
    rp = rp - rp.mean()
    rg = rg - rg.mean()
    return float((rp @ rg) / math.sqrt((rp @ rp) * (rg @ rg)))


def accuracy_macro_f1(y_true, y_pred) -> tuple[float, float]:
    """Accuracy and macro-averaged F1; per-class F1 is 0 when undefined."""
    y_true = list(y_true)
    y_pred = list(y_pred)
    if len(y_true) != len(y_pred) or not y_true:
        raise UecError("label lists must be nonempty and equal length")
    classes = sorted(set(y_true) | set(y_pred))
    accuracy = sum(t == p for t, p in zip(y_true, y_pred)) / len(y_true)
    f1s = []
    for cls in classes:
        tp = sum(1 for t, p in zip(y_true, y_pred) if t == cls and p == cls)
        fp = sum(1 for t, p in zip(y_true, y_pred) if t != cls and p == cls)
        fn = sum(1 for t, p in zip(y_true, y_pred) if t == cls and p != cls)
        f1s.append(2 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) else 0.0)
    return accuracy, float(np.mean(f1s))


def classify_probe(
    train_means,
    train_labels,
    test_means,
    test_labels,
    ridge: float = 1e-2,
) -> tuple[float, float]:
    """Logistic probe (one-vs-rest, same Newton core as the Laplace fit).

    A bias column is appended; predictions are argmax over per-class logits.
    Returns (accuracy, macro F1) on the test set.
    """
    x_train = np.asarray(train_means, dtype=np.float64)
    x_test = np.asarray(test_means, dtype=np.float64)
    if x_train.ndim != 2 or x_test.ndim != 2 or x_train.shape[1] != x_test.shape[1]:
        raise DimensionMismatchError("train/test features must share a dimension")
    train_labels = list(train_labels)
    test_labels = list(test_labels)
    classes = sorted(set(train_labels))
    if len(classes) < 2:
        raise UecError("classification probe needs at least 2 classes in train")
    xt = np.hstack([x_train, np.ones((x_train.shape[0], 1))])
    xs = np.hstack([x_test, np.ones((x_test.shape[0], 1))])
    logits = np.empty((xs.shape[0], len(classes)))
    for j, cls in enumerate(classes):
        y = np.array([1.0 if lbl == cls else 0.0 for lbl in train_labels])
        w = newton_logistic(xt, y, ridge, max_iterations=200, gradient_tolerance=1e-8)
        logits[:, j] = xs @ w
    predictions = [classes[j] for j in logits.argmax(axis=1)]
    return accuracy_macro_f1(test_labels, predictions)


def task_arithmetic_baseline(a, b, c, alpha: float) -> np.ndarray:
    """Deterministic embedding-space fusion: a + alpha * (b - c)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    if not (a.shape == b.shape == c.shape) or a.ndim != 1:
        raise DimensionMismatchError("task arithmetic needs three equal-length vectors")
    return a + alpha * (b - c)


TASK_ARITHMETIC_ALPHA_GRID = (0.0001, 0.001, 0.01, 0.1, 1.0)


def weighted_ensemble_grid(n_models: int, step: float = 0.1):
    """Simplex grid of fixed weights (each entry a positive multiple of step)."""
    units = round(1.0 / step)

    def rec(prefix, remaining, slots):
        if slots == 1:
            if remaining >= 1:
                yield prefix + [remaining]
            return
        for take in range(1, remaining - slots + 2):
            yield from rec(prefix + [take], remaining - take, slots - 1)

    for combo in rec([], units, n_models):
        yield tuple(u * step for u in combo)


# --- synthetic specialist benchmark ------------------------------------------


@dataclass(frozen=True)
class SynthSpec:
    n_models: int = 3
    n_domains: int = 3
    queries_per_domain: int = 25
    docs_per_query: int = 2
    dim: int = 32
    specialist_noise: float = 0.05
    offdomain_noise: float = 0.5
    difficulty_min: float = 0.5
    difficulty_max: float = 6.0
    seed: int = 7

    def __post_init__(self):
        for field_name in ("n_models", "n_domains", "queries_per_domain",
                           "docs_per_query", "dim"):
            if getattr(self, field_name) < 1:
                raise UecError(f"{field_name} must be >= 1")
        if not 0 < self.specialist_noise < self.offdomain_noise:
            raise UecError("need 0 < specialist_noise < offdomain_noise")
        if not 0 < self.difficulty_min <= self.difficulty_max:
            raise UecError("need 0 < difficulty_min <= difficulty_max")


def specialist_model(spec: SynthSpec, domain: int) -> int:
    return domain % spec.n_models


def synth_generate(spec: SynthSpec) -> tuple[EnsembleInput, EnsembleInput, Qrels]:
    """Deterministic multi-domain corpus with one specialist model per domain.

    Ground-truth unit vectors get Gaussian perturbations whose scale
    depends on whether the model is the domain specialist; the variance
    field records the generating noise scale squared, so inverse-trace
    weighting provably prefers specialists. A per-query difficulty factor
    multiplies every model's noise scale, so query hardness varies and
    variance-aware confidence has signal to rank.
    """
    rng = np.random.default_rng(spec.seed)
    k, d = spec.n_models, spec.dim

    def unit(vec):
        return vec / np.linalg.norm(vec)

    def noise_scale(model: int, domain: int) -> float:
        return spec.specialist_noise if model == specialist_model(spec, domain) else spec.offdomain_noise

    query_records: list[list[EmbeddingRecord]] = [[] for _ in range(k)]
    doc_records: list[list[EmbeddingRecord]] = [[] for _ in range(k)]
    qrels: Qrels = {}

    for domain in range(spec.n_domains):
        for qi in range(spec.queries_per_domain):
            truth = unit(rng.standard_normal(d))
            difficulty = rng.uniform(spec.difficulty_min, spec.difficulty_max)
            qid = f"dom{domain}:q{qi}"
            for model in range(k):
                scale = noise_scale(model, domain) * difficulty
                mean = truth + scale * rng.standard_normal(d)
                query_records[model].append(
                    EmbeddingRecord(qid, GaussianEmbedding(mean, np.full(d, scale**2)))
                )
            for dj in range(spec.docs_per_query):
                target = truth if dj == 0 else unit(rng.standard_normal(d))
                did = f"dom{domain}:q{qi}:d{dj}"
                for model in range(k):
                    scale = noise_scale(model, domain) * difficulty
                    mean = target + scale * rng.standard_normal(d)
                    doc_records[model].append(
                        EmbeddingRecord(did, GaussianEmbedding(mean, np.full(d, scale**2)))
                    )
            qrels[qid] = {f"{qid}:d0": 1}

    docs = EnsembleInput(tuple(
        EmbeddingStore(f"model{m}", d, tuple(doc_records[m])) for m in range(k)
    ))
    queries = EnsembleInput(tuple(
        EmbeddingStore(f"model{m}", d, tuple(query_records[m])) for m in range(k)
    ))
    return docs, queries, qrels


# --- pipeline, ablations, coefficient profiles --------------------------------


def convolve_ensemble(
    inputs: EnsembleInput, cfg: CoefficientConfig, model_name: str = "ensemble"
) -> EmbeddingStore:
    """Per-record coefficients + Gaussian convolution over aligned stores."""
    records = []
    for rid, embs in inputs.iter_aligned():
        pi = coefficients_for(embs, cfg)
        records.append(EmbeddingRecord(rid, convolve(embs, pi)))
    return EmbeddingStore(model_name, inputs.dim, tuple(records))


def results_to_run(results: list[QueryResult]) -> RunRanking:
    return {res.query_id: list(res.hits) for res in results}


def retrieval_report(
    doc_store: EmbeddingStore,
    query_store: EmbeddingStore,
    qrels: Qrels,
    sim_cfg: SimilarityConfig,
    k: int = 10,
) -> dict[str, float]:
    """NDCG@k, Recall@k, and nAUC@k (over per-query NDCG@k) for one config."""
    index = build_index(doc_store, sim_cfg)
    results = search_batch(index, query_store, k)
    run = results_to_run(results)
    ndcg_values, _ = ndcg_per_query(run, qrels, k)
    recall_values, _ = recall_per_query(run, qrels, k)
    confidence = {res.query_id: res.confidence for res in results}
    per_query = [
        (qid, ndcg_values[qid], confidence[qid]) for qid in ndcg_values
    ]
    return {
        f"ndcg@{k}": float(np.mean(list(ndcg_values.values()))),
        f"recall@{k}": float(np.mean(list(recall_values.values()))),
        f"nauc@{k}": nauc_abstention(per_query),
    }


ABLATION_CONFIGS = (
    ("full", True, True),
    ("-unc_sim", False, True),
    ("-unc_conv", True, False),
    ("-unc_sim,-unc_conv", False, False),
)


def ablation_run(
    docs: EnsembleInput,
    queries: EnsembleInput,
    qrels: Qrels,
    temperature: float = 1.5,
    beta: float = 0.01,
    k: int = 10,
) -> dict[str, dict[str, float]]:
    """The four on/off combinations of uncertainty similarity and convolution."""
    report: dict[str, dict[str, float]] = {}
    for name, unc_sim, unc_conv in ABLATION_CONFIGS:
        coeff_cfg = (
            CoefficientConfig(mode="bayes_inverse_trace", temperature=temperature)
            if unc_conv
            else CoefficientConfig(mode="uniform")
        )
        sim_cfg = SimilarityConfig(
            beta=beta,
            mode="uncertainty_probit" if unc_sim else "mean_dot",
        )
        doc_store = convolve_ensemble(docs, coeff_cfg)
        query_store = convolve_ensemble(queries, coeff_cfg)
        report[name] = retrieval_report(doc_store, query_store, qrels, sim_cfg, k)
    return report


def domain_of(record_id: str) -> str:
    """Domain label from a record id ('dom:rest'); bare ids map to 'other'."""
    if ":" in record_id:
        return record_id.split(":", 1)[0]
    return "other"


def coefficient_profile(
    queries: EnsembleInput, cfg: CoefficientConfig
) -> tuple[list[str], list[str], np.ndarray]:
    """Per-domain mean coefficient per model.

    Returns (domain labels, model names, matrix of shape (L, K)); each row
    sums to 1.
    """
    sums: dict[str, np.ndarray] = {}
    counts: dict[str, int] = {}
    for rid, embs in queries.iter_aligned():
        pi = coefficients_for(embs, cfg).pi
        dom = domain_of(rid)
        if dom in sums:
            sums[dom] = sums[dom] + pi
            counts[dom] += 1
        else:
            sums[dom] = pi.copy()
            counts[dom] = 1
    domains = sorted(sums)
    matrix = np.stack([sums[dom] / counts[dom] for dom in domains])
    model_names = [store.model_name for store in queries.stores]
    return domains, model_names, matrix


def format_profile_csv(domains, model_names, matrix) -> str:
    lines = ["domain," + ",".join(model_names)]
    for dom, row in zip(domains, matrix):
        lines.append(dom + "," + ",".join(repr(float(x)) for x in row))
    return "\n".join(lines) + "\n"


def format_report_table(report: dict[str, dict[str, float]]) -> str:
    """Human-readable table for an ablation or comparison report."""
    metric_names = sorted({m for row in report.values() for m in row})
    width = max(len(name) for name in report) + 2
    lines = ["".join([" " * width] + [f"{m:>12}" for m in metric_names])]
    for name, row in report.items():
        cells = [f"{row.get(m, float('nan')):>12.4f}" for m in metric_names]
        lines.append(f"{name:<{width}}" + "".join(cells))
    return "\n".join(lines)
