"""Diagonal last-layer Laplace posterior fit on binary-labeled pairs.

The logistic head scores a pair through the elementwise feature product,
so the logit is w^T (q * p). The MAP weights come from an exact-Hessian
Newton iteration with step halving; the posterior variance is the inverse
of the diagonal Hessian at the MAP.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .core import EmbeddingStore, EmbeddingRecord, GaussianEmbedding
from .errors import DimensionMismatchError, FitConvergenceError, UecError


@dataclass(frozen=True)
class PairExample:
    query_features: np.ndarray
    passage_features: np.ndarray
    label: int

    def __post_init__(self):
        q = np.asarray(self.query_features, dtype=np.float64)
        p = np.asarray(self.passage_features, dtype=np.float64)
        if q.shape != p.shape or q.ndim != 1:
            raise DimensionMismatchError("pair features must be equal-length vectors")
        if self.label not in (0, 1):
            raise UecError(f"label must be 0 or 1, got {self.label!r}")
        object.__setattr__(self, "query_features", q)
        object.__setattr__(self, "passage_features", p)


@dataclass(frozen=True)
class LaplaceFitConfig:
    prior_precision: float = 1.0
    max_iterations: int = 100
    gradient_tolerance: float = 1e-8

    def __post_init__(self):
        if self.prior_precision <= 0:
            raise UecError("prior_precision must be positive")
        if self.max_iterations < 1:
            raise UecError("max_iterations must be >= 1")
        if self.gradient_tolerance <= 0:
            raise UecError("gradient_tolerance must be positive")


@dataclass(frozen=True)
class LaplacePosterior:
    """MAP head weights plus per-weight posterior variances (diag H^-1)."""

    map_weights: np.ndarray
    post_var: np.ndarray
    prior_precision: float
    n_examples: int
    model_name: str = ""

    def __post_init__(self):
        w = np.asarray(self.map_weights, dtype=np.float64)
        v = np.asarray(self.post_var, dtype=np.float64)
        if w.shape != v.shape or w.ndim != 1:
            raise DimensionMismatchError("map_weights and post_var must align")
        if np.any(v <= 0):
            raise UecError("posterior variances must be strictly positive")
        # data can only add precision on top of the prior
        if np.any(v > 1.0 / self.prior_precision + 1e-12):
            raise UecError("posterior variance exceeds the prior variance 1/lambda")
        object.__setattr__(self, "map_weights", w)
        object.__setattr__(self, "post_var", v)

    @property
    def dim(self) -> int:
        return self.map_weights.size

    def to_json(self) -> str:
        doc = {
            "model_name": self.model_name,
            "dim": self.dim,
            "lambda": self.prior_precision,
            "map_weights": self.map_weights.tolist(),
            "post_var": self.post_var.tolist(),
            "n_examples": self.n_examples,
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "LaplacePosterior":
        doc = json.loads(text)
        post = cls(
            map_weights=np.asarray(doc["map_weights"], dtype=np.float64),
            post_var=np.asarray(doc["post_var"], dtype=np.float64),
            prior_precision=float(doc["lambda"]),
            n_examples=int(doc["n_examples"]),
            model_name=doc.get("model_name", ""),
        )
        if post.dim != int(doc["dim"]):
            raise UecError("posterior document dim field does not match vectors")
        return post


def pair_features(q, p) -> np.ndarray:
    """Feature map for a query-passage pair: the elementwise product."""
    q = np.asarray(q, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    if q.shape != p.shape:
        raise DimensionMismatchError(
            f"feature lengths differ: {q.shape} vs {p.shape}"
        )
    return q * p


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _feature_matrix(data: list[PairExample]) -> tuple[np.ndarray, np.ndarray]:
    phi = np.stack([pair_features(ex.query_features, ex.passage_features) for ex in data])
    y = np.array([ex.label for ex in data], dtype=np.float64)
    return phi, y


def newton_logistic(
    phi: np.ndarray,
    y: np.ndarray,
    lam: float,
    max_iterations: int = 100,
    gradient_tolerance: float = 1e-8,
) -> np.ndarray:
    """Ridge-logistic MAP via Newton with exact Hessian and step halving.

    Minimizes sum_n CE(sigmoid(w.phi_n), y_n) + (lam/2)||w||^2. The
    objective decreases monotonically; convergence is declared when the
    gradient inf-norm drops below ``gradient_tolerance``.
    """
    n, d = phi.shape
    w = np.zeros(d)

    def objective(wv):
        logits = phi @ wv
        ce = np.logaddexp(0.0, logits) - y * logits
        return float(ce.sum() + 0.5 * lam * wv @ wv)

    obj = objective(w)
    for _ in range(max_iterations):
        logits = phi @ w
        p = _sigmoid(logits)
        grad = phi.T @ (p - y) + lam * w
        grad_norm = float(np.abs(grad).max(initial=0.0))
        if grad_norm <= gradient_tolerance:
            return w
        s = p * (1.0 - p)
        hess = phi.T @ (phi * s[:, None]) + lam * np.eye(d)
        step = np.linalg.solve(hess, grad)
        # step halving keeps the objective monotone; the relative slack
        # accepts full Newton steps near the optimum where rounding noise
        # in the objective would otherwise stall convergence
        t = 1.0
        for _ in range(50):
            candidate = w - t * step
            cand_obj = objective(candidate)
            if cand_obj <= obj + 1e-12 * (1.0 + abs(obj)):
                break
            t *= 0.5
        w = candidate
        obj = cand_obj
    final_grad = phi.T @ (_sigmoid(phi @ w) - y) + lam * w
    final_norm = float(np.abs(final_grad).max(initial=0.0))
    if final_norm <= gradient_tolerance:
        return w
    raise FitConvergenceError(max_iterations, final_norm)


def fit_map(data: list[PairExample], cfg: LaplaceFitConfig) -> np.ndarray:
    """MAP weights of the pair-relevance logistic head."""
    if not data:
        # prior-only MAP: the ridge term alone is minimized at zero
        return np.zeros(0)
    phi, y = _feature_matrix(data)
    return newton_logistic(
        phi, y, cfg.prior_precision, cfg.max_iterations, cfg.gradient_tolerance
    )


def fit_map_dim(data: list[PairExample], cfg: LaplaceFitConfig, dim: int) -> np.ndarray:
    """fit_map with an explicit dimension so empty data yields the prior MAP."""
    if not data:
        return np.zeros(dim)
    w = fit_map(data, cfg)
    if w.size != dim:
        raise DimensionMismatchError(f"data has dim {w.size}, expected {dim}")
    return w


def diag_posterior_variance(
    data: list[PairExample], map_weights: np.ndarray, prior_precision: float
) -> np.ndarray:
    """v_d = 1 / (lambda + sum_n p_n(1-p_n) phi_{n,d}^2)."""
    if prior_precision <= 0:
        raise UecError("prior_precision must be positive")
    w = np.asarray(map_weights, dtype=np.float64)
    if not data:
        return np.full(w.size, 1.0 / prior_precision)
    phi, _ = _feature_matrix(data)
    if phi.shape[1] != w.size:
        raise DimensionMismatchError(
            f"features have dim {phi.shape[1]}, weights have dim {w.size}"
        )
    p = _sigmoid(phi @ w)
    s = p * (1.0 - p)
    h_diag = prior_precision + (s[:, None] * phi**2).sum(axis=0)
    return 1.0 / h_diag


def fit_laplace(
    data: list[PairExample],
    cfg: LaplaceFitConfig | None = None,
    dim: int | None = None,
    model_name: str = "",
) -> LaplacePosterior:
    """Full fit: MAP weights plus diagonal posterior variance."""
    cfg = cfg or LaplaceFitConfig()
    if dim is None:
        if not data:
            raise UecError("cannot infer dimension from empty data")
        dim = np.asarray(data[0].query_features).size
    w = fit_map_dim(data, cfg, dim)
    v = diag_posterior_variance(data, w, cfg.prior_precision)
    return LaplacePosterior(
        map_weights=w,
        post_var=v,
        prior_precision=cfg.prior_precision,
        n_examples=len(data),
        model_name=model_name,
    )


def embed_to_gaussian(posterior: LaplacePosterior, h) -> GaussianEmbedding:
    """Deterministic embedding h becomes Gaussian with var_d = h_d^2 v_d.

    This is the per-term decomposition of h^T diag(v) h, so the total
    variance tr(Sigma) equals the scalar head variance exactly.
    """
    h = np.asarray(h, dtype=np.float64)
    if h.shape != posterior.map_weights.shape:
        raise DimensionMismatchError(
            f"embedding has dim {h.size}, posterior has dim {posterior.dim}"
        )
    return GaussianEmbedding(h, h**2 * posterior.post_var)


def probabilize_store(store: EmbeddingStore, posterior: LaplacePosterior) -> EmbeddingStore:
    """Apply embed_to_gaussian across a store of deterministic embeddings."""
    if posterior.dim != store.dim:
        raise DimensionMismatchError(
            f"store dim {store.dim} does not match posterior dim {posterior.dim}"
        )
    records = tuple(
        EmbeddingRecord(rec.id, embed_to_gaussian(posterior, rec.embedding.mean))
        for rec in store.records
    )
    return EmbeddingStore(store.model_name, store.dim, records)
