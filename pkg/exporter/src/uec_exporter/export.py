"""Emit UECS stores and labeled pair files.

The UECS writer here is an independent implementation of the wire
format (magic "UECS", version 1, little-endian, header CRC-32,
float32 vectors); conformance with the consuming engine is by format,
not by shared code. Exported stores always carry var = 0: the exporter
produces deterministic embeddings and never computes uncertainties.
"""

from __future__ import annotations

import os
import random
import struct
import zlib

import numpy as np

from .encoders import resolve_encoder
from .errors import EncoderError, ExporterError
from .job import ExportJob

MAGIC = b"UECS"
VERSION = 1


def _atomic_write(path: str, write_body) -> None:
    tmp = f"{path}.tmp.{os.getpid()}"
    try:
        with open(tmp, "wb") as fh:
            write_body(fh)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def encode_job(job: ExportJob) -> np.ndarray:
    """Run the job's encoder over its texts in batch_size chunks."""
    encoder = resolve_encoder(job.encoder_id)
    texts = [text for _id, text in job.input_texts]
    batches = [
        encoder.encode(texts[i : i + job.batch_size])
        for i in range(0, len(texts), job.batch_size)
    ]
    vectors = np.vstack(batches)
    if not np.all(np.isfinite(vectors)):
        raise EncoderError("encoder produced non-finite values")
    if job.normalize:
        norms = np.linalg.norm(vectors, axis=1, keepdims=True)
        zero_rows = np.flatnonzero(norms[:, 0] == 0.0)
        if zero_rows.size:
            bad_id = job.input_texts[int(zero_rows[0])][0]
            raise EncoderError(f"cannot normalize zero embedding for id {bad_id!r}")
        vectors = vectors / norms
    return vectors


def export_store(job: ExportJob, path: str) -> int:
    """Encode the job's texts and write a var=0 UECS store; returns count."""
    vectors = encode_job(job).astype(np.float32)
    if not np.all(np.isfinite(vectors)):
        raise ExporterError("embeddings overflow float32; refusing to serialize")
    dim = vectors.shape[1]
    zeros = np.zeros(dim, dtype=np.float32).tobytes()
    name = job.encoder_id.encode("utf-8")
    header = (
        MAGIC
        + struct.pack("<II", VERSION, dim)
        + struct.pack("<Q", len(job.input_texts))
        + struct.pack("<I", len(name))
        + name
    )

    def body(fh):
        fh.write(header)
        fh.write(struct.pack("<I", zlib.crc32(header)))
        for (text_id, _text), row in zip(job.input_texts, vectors):
            encoded_id = text_id.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded_id)))
            fh.write(encoded_id)
            fh.write(row.tobytes())
            fh.write(zeros)

    _atomic_write(path, body)
    return len(job.input_texts)


def export_pairs(
    positives: list[tuple[str, str]],
    corpus: list[str],
    path: str,
    negatives_per_positive: int = 1,
    seed: int = 0,
) -> int:
    """Write a labeled pair TSV: each positive plus sampled negatives.

    Lines are query_id <TAB> doc_id <TAB> label with label 1 for the
    given positives and 0 for negatives sampled from ``corpus``; a
    negative never equals its positive's doc id. Returns the line count.
    """
    if negatives_per_positive < 0:
        raise ExporterError("negatives_per_positive must be >= 0")
    if not positives:
        raise ExporterError("at least one positive pair is required")
    corpus_ids = list(dict.fromkeys(corpus))
    rng = random.Random(seed)
    lines = []
    for query_id, doc_id in positives:
        lines.append(f"{query_id}\t{doc_id}\t1")
        candidates = [c for c in corpus_ids if c != doc_id]
        if len(candidates) < negatives_per_positive:
            raise ExporterError(
                f"corpus too small to draw {negatives_per_positive} negatives "
                f"distinct from {doc_id!r}"
            )
        for negative in rng.sample(candidates, negatives_per_positive):
            lines.append(f"{query_id}\t{negative}\t0")

    text = "\n".join(lines) + "\n"
    _atomic_write(path, lambda fh: fh.write(text.encode("utf-8")))
    return len(lines)
