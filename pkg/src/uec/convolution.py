"""Uncertainty-driven ensemble coefficients and Gaussian convolution.

Coefficients are computed per input record from the per-model total
variances: pi_k proportional to (1/trace_k)^tau, which at tau=1 is the
exact minimizer of the quadratic simplex objective sum_k pi_k^2 c_k.
A projected-gradient oracle for that objective ships alongside for
testing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import GaussianEmbedding
from .errors import DegenerateUncertaintyError, DimensionMismatchError, UecError

COEFFICIENT_MODES = ("bayes_inverse_trace", "full_form", "uniform", "fixed")

# sharpening exponents used throughout the experiments
DEFAULT_TEMPERATURE = 1.5
MMTEB_TEMPERATURE = 1.8


@dataclass(frozen=True)
class CoefficientConfig:
    mode: str = "bayes_inverse_trace"
    temperature: float = DEFAULT_TEMPERATURE
    fixed_weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.mode not in COEFFICIENT_MODES:
            raise UecError(f"unknown coefficient mode {self.mode!r}")
        if self.temperature <= 0:
            raise UecError("temperature must be positive")
        if self.mode == "fixed":
            if self.fixed_weights is None:
                raise UecError("fixed mode requires fixed_weights")
            w = np.asarray(self.fixed_weights, dtype=np.float64)
            if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
                raise UecError("fixed_weights must be nonnegative and sum to 1")
            object.__setattr__(self, "fixed_weights", tuple(float(x) for x in w))
        elif self.fixed_weights is not None:
            raise UecError("fixed_weights only apply to fixed mode")


@dataclass(frozen=True)
class Coefficients:
    pi: np.ndarray
    provenance: CoefficientConfig

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=np.float64)
        if pi.ndim != 1 or pi.size < 1:
            raise UecError("pi must be a vector of length >= 1")
        if np.any(pi < 0) or abs(pi.sum() - 1.0) > 1e-12:
            raise UecError("pi must lie on the probability simplex")
        pi = pi.copy()
        pi.flags.writeable = False
        object.__setattr__(self, "pi", pi)

    @property
    def n_models(self) -> int:
        return self.pi.size


def _inverse_power_simplex(costs: np.ndarray, tau: float) -> np.ndarray:
    # log-space keeps large tau and wide cost ranges stable
    log_w = -tau * np.log(costs)
    log_w -= log_w.max()
    w = np.exp(log_w)
    return w / w.sum()


def bayes_coefficients(traces, tau: float = 1.0) -> Coefficients:
    """Inverse-variance weights: pi_k proportional to (1/trace_k)^tau."""
    t = np.asarray(traces, dtype=np.float64)
    if t.ndim != 1 or t.size < 1:
        raise UecError("traces must be a vector of length >= 1")
    if np.any(t <= 0) or not np.all(np.isfinite(t)):
        raise DegenerateUncertaintyError("all traces must be positive and finite")
    cfg = CoefficientConfig(mode="bayes_inverse_trace", temperature=tau)
    return Coefficients(_inverse_power_simplex(t, tau), cfg)


def full_coefficients(traces, mean_sq_norms, tau: float = 1.0) -> Coefficients:
    """Weights from the full cost c_k = trace_k + ||mu_k||^2."""
    t = np.asarray(traces, dtype=np.float64)
    n = np.asarray(mean_sq_norms, dtype=np.float64)
    if t.shape != n.shape or t.ndim != 1:
        raise DimensionMismatchError("traces and mean_sq_norms must align")
    c = t + n
    if np.any(c <= 0) or not np.all(np.isfinite(c)):
        raise DegenerateUncertaintyError("all costs trace_k + ||mu_k||^2 must be positive")
    cfg = CoefficientConfig(mode="full_form", temperature=tau)
    return Coefficients(_inverse_power_simplex(c, tau), cfg)


def uniform_coefficients(k: int) -> Coefficients:
    if k < 1:
        raise UecError("need at least one model")
    cfg = CoefficientConfig(mode="uniform")
    return Coefficients(np.full(k, 1.0 / k), cfg)


def coefficients_for(
    embeddings: list[GaussianEmbedding], cfg: CoefficientConfig
) -> Coefficients:
    """Per-record coefficients for one aligned set of K model embeddings."""
    k = len(embeddings)
    if cfg.mode == "uniform":
        return uniform_coefficients(k)
    if cfg.mode == "fixed":
        w = np.asarray(cfg.fixed_weights, dtype=np.float64)
        if w.size != k:
            raise DimensionMismatchError(
                f"fixed_weights has {w.size} entries for {k} models"
            )
        return Coefficients(w / w.sum(), cfg)
    traces = np.array([e.var.sum() for e in embeddings])
    if cfg.mode == "bayes_inverse_trace":
        return bayes_coefficients(traces, cfg.temperature)
    norms = np.array([float(e.mean @ e.mean) for e in embeddings])
    return full_coefficients(traces, norms, cfg.temperature)


def convolve(embeddings: list[GaussianEmbedding], pi: Coefficients) -> GaussianEmbedding:
    """Weighted combination of independent Gaussians.

    mean = sum_k pi_k mu_k, var = sum_k pi_k^2 var_k per dimension.
    """
    if len(embeddings) != pi.n_models:
        raise DimensionMismatchError(
            f"{len(embeddings)} embeddings for {pi.n_models} coefficients"
        )
    dims = {e.dim for e in embeddings}
    if len(dims) != 1:
        raise DimensionMismatchError(f"embeddings have mixed dims {sorted(dims)}")
    means = np.stack([e.mean for e in embeddings])
    variances = np.stack([e.var for e in embeddings])
    w = pi.pi
    return GaussianEmbedding(w @ means, (w * w) @ variances)


def surrogate_loss(
    pi: Coefficients,
    x_embs: list[GaussianEmbedding],
    xp_embs: list[GaussianEmbedding],
) -> float:
    """Expected squared distance of a positive pair under the ensemble.

    sum_k pi_k (||mu_k(x) - mu_k(x')||^2 + tr Sigma_k(x) + tr Sigma_k(x')).
    """
    if len(x_embs) != len(xp_embs) or len(x_embs) != pi.n_models:
        raise DimensionMismatchError("surrogate_loss needs K embeddings per side")
    total = 0.0
    for w, ex, exp_ in zip(pi.pi, x_embs, xp_embs):
        if ex.dim != exp_.dim:
            raise DimensionMismatchError("pair embeddings must share dim")
        delta = ex.mean - exp_.mean
        total += w * (float(delta @ delta) + float(ex.var.sum()) + float(exp_.var.sum()))
    return total


def _project_simplex(v: np.ndarray) -> np.ndarray:
    # Euclidean projection onto the probability simplex (sort-based)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    rho = np.nonzero(u * np.arange(1, v.size + 1) > css)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def quadratic_simplex_oracle(costs, resolution: float = 1e-6) -> np.ndarray:
    """Minimize sum_k pi_k^2 c_k over the simplex by projected gradient.

    Independent test oracle: its analytic optimum is pi_k proportional
    to 1/c_k, but this routine never uses that fact.
    """
    c = np.asarray(costs, dtype=np.float64)
    if np.any(c <= 0):
        raise DegenerateUncertaintyError("costs must be positive")
    k = c.size
    pi = np.full(k, 1.0 / k)
    lr = 0.5 / c.max()
    for _ in range(200_000):
        grad = 2.0 * c * pi
        nxt = _project_simplex(pi - lr * grad)
        if np.abs(nxt - pi).max() < resolution * 1e-3:
            return nxt
        pi = nxt
    return pi
