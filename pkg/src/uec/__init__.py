"""Uncertainty-driven embedding convolution.

Turns deterministic text embeddings into Gaussian probabilistic
embeddings via a post-hoc diagonal Laplace fit, fuses multiple models
with inverse-variance coefficients, scores pairs with an
uncertainty-aware probit similarity, and evaluates retrieval / STS /
classification with abstention-aware metrics.
"""

from .core import (
    EmbeddingRecord,
    EmbeddingStore,
    EnsembleInput,
    GaussianEmbedding,
    l2_normalize,
    trace,
)
from .convolution import (
    CoefficientConfig,
    Coefficients,
    bayes_coefficients,
    coefficients_for,
    convolve,
    full_coefficients,
    quadratic_simplex_oracle,
    surrogate_loss,
    uniform_coefficients,
)
from .laplace import (
    LaplaceFitConfig,
    LaplacePosterior,
    PairExample,
    diag_posterior_variance,
    embed_to_gaussian,
    fit_laplace,
    fit_map,
    pair_features,
    probabilize_store,
)
from .similarity import (
    DotMoments,
    SimilarityConfig,
    dot_moments,
    mc_moments_oracle,
    probit_score,
    score_pair,
)
from .retrieval import Index, QueryResult, build_index, search_batch, search_topk
from .evaluation import (
    SynthSpec,
    ablation_run,
    convolve_ensemble,
    nauc_abstention,
    ndcg_at_k,
    recall_at_k,
    retrieval_report,
    spearman,
    synth_generate,
)

__all__ = [name for name in dir() if not name.startswith("_")]

__version__ = "0.1.0"
