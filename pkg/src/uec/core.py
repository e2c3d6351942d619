"""Gaussian embeddings with diagonal covariance and the stores that hold them.

All in-memory math is float64; persisted stores are float32 (see store_io).
Every type here is immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateEmbeddingError, DimensionMismatchError, UecError


def _as_readonly_f64(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 1:
        raise UecError(f"{name} must be a 1-d vector of length >= 1")
    if not np.all(np.isfinite(arr)):
        raise UecError(f"{name} contains non-finite values")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class GaussianEmbedding:
    """An embedding as a Gaussian: mean vector and per-dimension variance.

    ``var == 0`` everywhere represents a deterministic embedding.
    """

    mean: np.ndarray
    var: np.ndarray

    def __post_init__(self):
        mean = _as_readonly_f64(self.mean, "mean")
        var = _as_readonly_f64(self.var, "var")
        if mean.shape != var.shape:
            raise DimensionMismatchError(
                f"mean has length {mean.size}, var has length {var.size}"
            )
        if np.any(var < 0):
            raise UecError("variance components must be nonnegative")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "var", var)

    @property
    def dim(self) -> int:
        return self.mean.size

    @classmethod
    def deterministic(cls, mean) -> "GaussianEmbedding":
        mean = np.asarray(mean, dtype=np.float64)
        return cls(mean, np.zeros_like(mean))

    def __eq__(self, other):
        if not isinstance(other, GaussianEmbedding):
            return NotImplemented
        return np.array_equal(self.mean, other.mean) and np.array_equal(
            self.var, other.var
        )


def l2_normalize(e: GaussianEmbedding) -> GaussianEmbedding:
    """Scale the mean to unit norm; variance scales by 1/||mean||^2.

    The variance transform treats ||mean|| as a constant (first-order
    delta method), which preserves relative uncertainty ordering.
    """
    norm = float(np.linalg.norm(e.mean))
    if norm == 0.0:
        raise DegenerateEmbeddingError("cannot normalize a zero-mean embedding")
    return GaussianEmbedding(e.mean / norm, e.var / (norm * norm))


def trace(e: GaussianEmbedding) -> float:
    """Total variance: tr(Sigma) for a diagonal covariance."""
    return float(e.var.sum())


@dataclass(frozen=True)
class EmbeddingRecord:
    id: str
    embedding: GaussianEmbedding

    def __post_init__(self):
        if not self.id:
            raise UecError("record id must be nonempty")


@dataclass(frozen=True)
class EmbeddingStore:
    """An ordered, id-addressable collection of same-dimension embeddings."""

    model_name: str
    dim: int
    records: tuple[EmbeddingRecord, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        if self.dim < 1:
            raise UecError("store dim must be >= 1")
        seen = set()
        for rec in self.records:
            if rec.embedding.dim != self.dim:
                raise DimensionMismatchError(
                    f"record {rec.id!r} has dim {rec.embedding.dim}, "
                    f"store dim is {self.dim}"
                )
            if rec.id in seen:
                raise UecError(f"duplicate record id {rec.id!r}")
            seen.add(rec.id)

    def __len__(self) -> int:
        return len(self.records)

    def ids(self) -> list[str]:
        return [rec.id for rec in self.records]

    def get(self, record_id: str) -> GaussianEmbedding:
        for rec in self.records:
            if rec.id == record_id:
                return rec.embedding
        raise KeyError(record_id)

    def as_dict(self) -> dict[str, GaussianEmbedding]:
        return {rec.id: rec.embedding for rec in self.records}


@dataclass(frozen=True)
class EnsembleInput:
    """K stores aligned by record id, one per embedding model."""

    stores: tuple[EmbeddingStore, ...]

    def __post_init__(self):
        object.__setattr__(self, "stores", tuple(self.stores))
        if len(self.stores) < 1:
            raise UecError("an ensemble needs at least one store")
        ref = self.stores[0]
        ref_ids = set(ref.ids())
        for store in self.stores[1:]:
            if store.dim != ref.dim:
                raise DimensionMismatchError(
                    f"store {store.model_name!r} has dim {store.dim}, "
                    f"expected {ref.dim}"
                )
            if set(store.ids()) != ref_ids:
                raise UecError(
                    f"store {store.model_name!r} does not cover the same ids "
                    f"as {ref.model_name!r}"
                )

    @property
    def n_models(self) -> int:
        return len(self.stores)

    @property
    def dim(self) -> int:
        return self.stores[0].dim

    def ids(self) -> list[str]:
        # record order of the first store is canonical
        return self.stores[0].ids()

    def embeddings_for(self, record_id: str) -> list[GaussianEmbedding]:
        return [store.get(record_id) for store in self.stores]

    def iter_aligned(self):
        """Yield (id, [embedding per model]) in canonical order."""
        maps = [store.as_dict() for store in self.stores]
        for rid in self.ids():
            yield rid, [m[rid] for m in maps]
