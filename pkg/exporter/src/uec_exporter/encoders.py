"""Encoder registry: builtin hash n-gram encoder plus optional ST models.

Encoder ids:

    hash:<dim>[:<salt>]   deterministic character n-gram hashing encoder;
                          different salts act as different models
    st:<model-name>       any sentence-transformers checkpoint (requires
                          the optional sentence-transformers dependency)

The hash encoder is exactly deterministic across runs and platforms.
Pretrained encoders are deterministic only up to their own numeric
nondeterminism; callers should not expect bitwise-identical re-exports
from them.
"""

from __future__ import annotations

import re
import zlib

import numpy as np

from .errors import EncoderError

_NGRAM = 3


class HashNgramEncoder:
    """Bag of hashed character trigrams and word unigrams, signed counts.

    Feature hashing with a sign bit keeps the expected inner product of
    unrelated texts near zero, so cosine behaves like a crude but honest
    lexical similarity.
    """

    def __init__(self, dim: int, salt: str = ""):
        if dim < 1:
            raise EncoderError(f"hash encoder dim must be >= 1, got {dim}")
        self.dim = dim
        self.salt = salt

    def _tokens(self, text: str) -> list[str]:
        normalized = re.sub(r"\s+", " ", text.strip().lower())
        words = normalized.split(" ") if normalized else []
        padded = f" {normalized} "
        trigrams = [padded[i : i + _NGRAM] for i in range(len(padded) - _NGRAM + 1)]
        return words + trigrams

    def encode(self, texts: list[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim), dtype=np.float64)
        for row, text in enumerate(texts):
            tokens = self._tokens(text)
            if not tokens:
                raise EncoderError(f"cannot encode empty text at position {row}")
            for token in tokens:
                digest = zlib.crc32(f"{self.salt}\x00{token}".encode("utf-8"))
                bucket = digest % self.dim
                sign = 1.0 if (digest >> 16) & 1 else -1.0
                out[row, bucket] += sign
        return out


class SentenceTransformerEncoder:
    """Thin adapter over a sentence-transformers checkpoint."""

    def __init__(self, model_name: str):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise EncoderError(
                "sentence-transformers is not installed; "
                "install the 'st' extra to use pretrained encoders"
            ) from exc
        try:
            self._model = SentenceTransformer(model_name)
        except Exception as exc:
            raise EncoderError(f"failed to load encoder {model_name!r}: {exc}") from exc
        self.dim = int(self._model.get_sentence_embedding_dimension())

    def encode(self, texts: list[str]) -> np.ndarray:
        try:
            vectors = self._model.encode(
                texts, convert_to_numpy=True, normalize_embeddings=False
            )
        except Exception as exc:
            raise EncoderError(f"text encoding failure: {exc}") from exc
        return np.asarray(vectors, dtype=np.float64)


def resolve_encoder(encoder_id: str):
    """Build an encoder from its id string."""
    if encoder_id.startswith("hash:"):
        parts = encoder_id.split(":")
        if len(parts) not in (2, 3):
            raise EncoderError(f"bad hash encoder id {encoder_id!r}; use hash:<dim>[:<salt>]")
        try:
            dim = int(parts[1])
        except ValueError as exc:
            raise EncoderError(f"bad hash encoder dim in {encoder_id!r}") from exc
        salt = parts[2] if len(parts) == 3 else ""
        return HashNgramEncoder(dim, salt)
    if encoder_id.startswith("st:"):
        return SentenceTransformerEncoder(encoder_id[3:])
    raise EncoderError(
        f"unknown encoder id {encoder_id!r}; expected hash:<dim>[:<salt>] or st:<model>"
    )
