"""Brute-force exact top-k retrieval over convolved Gaussian embeddings.

Documents live in dense matrices sorted by ascending doc id; per-query
scores come from one or three BLAS passes (mean-dot vs probit), and a
stable descending sort makes tie order (ascending doc id) and run files
deterministic.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import EmbeddingStore, GaussianEmbedding, l2_normalize
from .errors import DimensionMismatchError, UecError
from .similarity import PROBIT_COEFF, SimilarityConfig


@dataclass(frozen=True)
class QueryResult:
    query_id: str
    hits: tuple[tuple[str, float], ...]  # (doc_id, score), best first
    confidence: float  # score of the rank-1 hit


@dataclass(frozen=True)
class Index:
    doc_ids: tuple[str, ...]
    means: np.ndarray  # (N, D)
    means_sq: np.ndarray  # (N, D), elementwise square of means
    variances: np.ndarray  # (N, D)
    sim_cfg: SimilarityConfig

    @property
    def size(self) -> int:
        return len(self.doc_ids)

    @property
    def dim(self) -> int:
        return self.means.shape[1]


def build_index(store: EmbeddingStore, sim_cfg: SimilarityConfig) -> Index:
    """Materialize score matrices, normalizing up front when configured."""
    if len(store) == 0:
        raise UecError("cannot build an index over an empty store")
    records = sorted(store.records, key=lambda rec: rec.id)
    embs = [rec.embedding for rec in records]
    if sim_cfg.normalize_inputs:
        embs = [l2_normalize(e) for e in embs]
    means = np.stack([e.mean for e in embs])
    variances = np.stack([e.var for e in embs])
    return Index(
        doc_ids=tuple(rec.id for rec in records),
        means=means,
        means_sq=means**2,
        variances=variances,
        sim_cfg=sim_cfg,
    )


def _query_arrays(index: Index, queries: list[GaussianEmbedding]) -> tuple[np.ndarray, np.ndarray]:
    for q in queries:
        if q.dim != index.dim:
            raise DimensionMismatchError(
                f"query dim {q.dim} does not match index dim {index.dim}"
            )
    if index.sim_cfg.normalize_inputs:
        queries = [l2_normalize(q) for q in queries]
    qm = np.stack([q.mean for q in queries]).T  # (D, Q)
    qv = np.stack([q.var for q in queries]).T
    return qm, qv


def score_matrix(index: Index, queries: list[GaussianEmbedding]) -> np.ndarray:
    """(N, Q) score matrix for a batch of queries."""
    cfg = index.sim_cfg
    qm, qv = _query_arrays(index, queries)
    mu = index.means @ qm
    if cfg.mode == "mean_dot":
        return mu
    qsq = qm**2
    if cfg.include_var_product:
        sig = index.means_sq @ qv + index.variances @ (qsq + qv)
    else:
        sig = index.means_sq @ qv + index.variances @ qsq
    return mu / np.sqrt(1.0 + PROBIT_COEFF * cfg.beta * sig)


def _topk_from_scores(index: Index, query_id: str, scores: np.ndarray, k: int) -> QueryResult:
    # stable sort on -scores: docs are stored in ascending-id order, so
    # equal scores fall out in ascending doc id
    order = np.argsort(-scores, kind="stable")[:k]
    hits = tuple((index.doc_ids[i], float(scores[i])) for i in order)
    return QueryResult(query_id=query_id, hits=hits, confidence=hits[0][1])


def search_topk(index: Index, query: GaussianEmbedding, k: int, query_id: str = "q") -> QueryResult:
    """Exact top-k for one query; ties break by ascending doc id."""
    if k < 1:
        raise UecError("k must be >= 1")
    scores = score_matrix(index, [query])[:, 0]
    return _topk_from_scores(index, query_id, scores, k)


def search_batch(
    index: Index,
    queries: EmbeddingStore,
    k: int,
    workers: int | None = None,
) -> list[QueryResult]:
    """Search every query in store order; output order is deterministic."""
    if k < 1:
        raise UecError("k must be >= 1")
    recs = list(queries.records)
    if not recs:
        return []

    def run_chunk(chunk):
        scores = score_matrix(index, [r.embedding for r in chunk])
        return [
            _topk_from_scores(index, r.id, scores[:, j], k)
            for j, r in enumerate(chunk)
        ]

    if workers is None or workers <= 1 or len(recs) < 2 * (workers or 1):
        return run_chunk(recs)
    chunks = [recs[i::workers] for i in range(workers)]
    chunks = [c for c in chunks if c]
    with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        partials = list(pool.map(run_chunk, chunks))
    by_id = {res.query_id: res for part in partials for res in part}
    return [by_id[r.id] for r in recs]
