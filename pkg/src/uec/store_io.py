"""Persistence: UECS binary embedding stores, TSV qrels/run files, JSON posteriors.

UECS layout (all little-endian):

    magic    4 bytes  ASCII "UECS"
    version  u32      = 1
    dim      u32
    count    u64
    name     u32 length + UTF-8 bytes
    crc      u32      CRC-32 of every header byte above
    records  count times: (u32 length + UTF-8 id,
                           dim float32 means, dim float32 vars)

Floats are 32-bit on disk and widened to 64-bit in memory; the round-trip
contract is exact at 32-bit precision. The header CRC makes any
single-byte header corruption detectable. Writes go through a temp file
with fsync and an atomic rename.
"""

from __future__ import annotations

import json
import os
import struct
import zlib
from typing import BinaryIO

from .core import EmbeddingRecord, EmbeddingStore, GaussianEmbedding
from .laplace import LaplacePosterior
from .errors import StoreFormatError, UecError

import numpy as np

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


def write_store(store: EmbeddingStore, path: str) -> None:
    """Serialize a store; refuses NaN/Inf or negative variance."""
    rows = []
    for rec in store.records:
        # overflow during narrowing is caught by the finiteness check below
        with np.errstate(over="ignore"):
            means = rec.embedding.mean.astype(np.float32)
            variances = rec.embedding.var.astype(np.float32)
        if not (np.all(np.isfinite(means)) and np.all(np.isfinite(variances))):
            raise UecError(
                f"record {rec.id!r} has NaN/Inf after float32 narrowing; refusing to serialize"
            )
        if np.any(variances < 0):
            raise UecError(f"record {rec.id!r} has negative variance; refusing to serialize")
        rows.append((rec.id.encode("utf-8"), means, variances))

    name = store.model_name.encode("utf-8")
    header = (
        MAGIC
        + struct.pack("<II", VERSION, store.dim)
        + struct.pack("<Q", len(store.records))
        + struct.pack("<I", len(name))
        + name
    )

    def body(fh: BinaryIO):
        fh.write(header)
        fh.write(struct.pack("<I", zlib.crc32(header)))
        for rid, means, variances in rows:
            fh.write(struct.pack("<I", len(rid)))
            fh.write(rid)
            fh.write(means.tobytes())
            fh.write(variances.tobytes())

    _atomic_write(path, body)


def _read_exact(fh: BinaryIO, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise StoreFormatError(
            f"truncated file while reading {what} at byte offset {fh.tell() - len(data)}"
        )
    return data


def read_store(path: str) -> EmbeddingStore:
    """Parse and validate a UECS file; each failure mode is a distinct diagnostic."""
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4, "magic")
        if magic != MAGIC:
            raise StoreFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
        version, dim = struct.unpack("<II", _read_exact(fh, 8, "version/dim"))
        if version != VERSION:
            raise StoreFormatError(f"unsupported version {version}, expected {VERSION}")
        (count,) = struct.unpack("<Q", _read_exact(fh, 8, "count"))
        (name_len,) = struct.unpack("<I", _read_exact(fh, 4, "model name length"))
        if name_len > 1 << 20:
            raise StoreFormatError(f"implausible model name length {name_len}")
        name_bytes = _read_exact(fh, name_len, "model name")
        (crc_stored,) = struct.unpack("<I", _read_exact(fh, 4, "header checksum"))
        header = (
            MAGIC
            + struct.pack("<II", version, dim)
            + struct.pack("<Q", count)
            + struct.pack("<I", name_len)
            + name_bytes
        )
        if zlib.crc32(header) != crc_stored:
            raise StoreFormatError("header checksum mismatch: corrupted header")
        if dim < 1:
            raise StoreFormatError(f"invalid dim {dim}")
        try:
            model_name = name_bytes.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise StoreFormatError(f"model name is not valid UTF-8: {exc}") from exc

        vec_bytes = 4 * dim
        records = []
        for i in range(count):
            (id_len,) = struct.unpack("<I", _read_exact(fh, 4, f"record {i} id length"))
            if id_len > 1 << 20:
                raise StoreFormatError(f"implausible id length {id_len} in record {i}")
            try:
                rid = _read_exact(fh, id_len, f"record {i} id").decode("utf-8")
            except UnicodeDecodeError as exc:
                raise StoreFormatError(f"record {i} id is not valid UTF-8: {exc}") from exc
            means = np.frombuffer(
                _read_exact(fh, vec_bytes, f"record {i} means"), dtype="<f4"
            ).astype(np.float64)
            variances = np.frombuffer(
                _read_exact(fh, vec_bytes, f"record {i} vars"), dtype="<f4"
            ).astype(np.float64)
            if not (np.all(np.isfinite(means)) and np.all(np.isfinite(variances))):
                raise StoreFormatError(f"record {rid!r} contains NaN/Inf")
            if np.any(variances < 0):
                raise StoreFormatError(f"record {rid!r} has negative variance")
            records.append(EmbeddingRecord(rid, GaussianEmbedding(means, variances)))
        if fh.read(1):
            raise StoreFormatError(f"trailing bytes after {count} records")
    try:
        return EmbeddingStore(model_name, dim, tuple(records))
    except UecError as exc:
        raise StoreFormatError(f"store-level invariant violated: {exc}") from exc


# --- qrels / run files (tab-separated text) ---------------------------------


def _lines(path: str):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if line:
                yield lineno, line


def read_qrels(path: str) -> dict[str, dict[str, int]]:
    """qrels TSV: query_id <TAB> doc_id <TAB> grade. CRLF and LF both accepted."""
    qrels: dict[str, dict[str, int]] = {}
    for lineno, line in _lines(path):
        parts = line.split("\t")
        if len(parts) != 3:
            raise StoreFormatError(
                f"{path}:{lineno}: expected 3 tab-separated fields, got {len(parts)}"
            )
        qid, did, grade_text = parts
        try:
            grade = int(grade_text)
        except ValueError as exc:
            raise StoreFormatError(f"{path}:{lineno}: bad grade {grade_text!r}") from exc
        if grade < 0:
            raise StoreFormatError(f"{path}:{lineno}: negative grade {grade}")
        per_query = qrels.setdefault(qid, {})
        if did in per_query:
            raise StoreFormatError(
                f"{path}:{lineno}: duplicate judgment for ({qid!r}, {did!r})"
            )
        per_query[did] = grade
    return qrels


def write_qrels(qrels: dict[str, dict[str, int]], path: str) -> None:
    def body(fh: BinaryIO):
        for qid in qrels:
            for did, grade in qrels[qid].items():
                fh.write(f"{qid}\t{did}\t{grade}\n".encode("utf-8"))

    _atomic_write(path, body)


def write_run(results, path: str) -> None:
    """Run TSV: query_id <TAB> doc_id <TAB> rank <TAB> score (rank 1-based)."""
    def body(fh: BinaryIO):
        for res in results:
            for rank, (did, score) in enumerate(res.hits, start=1):
                fh.write(f"{res.query_id}\t{did}\t{rank}\t{score!r}\n".encode("utf-8"))

    _atomic_write(path, body)


def read_run(path: str) -> dict[str, list[tuple[str, float]]]:
    """Parse a run file back into query_id -> ranked (doc_id, score) list."""
    run: dict[str, list[tuple[str, float]]] = {}
    for lineno, line in _lines(path):
        parts = line.split("\t")
        if len(parts) != 4:
            raise StoreFormatError(
                f"{path}:{lineno}: expected 4 tab-separated fields, got {len(parts)}"
            )
        qid, did, rank_text, score_text = parts
        try:
            rank = int(rank_text)
            score = float(score_text)
        except ValueError as exc:
            raise StoreFormatError(f"{path}:{lineno}: bad rank/score") from exc
        ranking = run.setdefault(qid, [])
        if rank != len(ranking) + 1:
            raise StoreFormatError(
                f"{path}:{lineno}: rank {rank} out of order for query {qid!r}"
            )
        ranking.append((did, score))
    return run


# --- posterior / config JSON -------------------------------------------------


def write_posterior(posterior: LaplacePosterior, path: str) -> None:
    text = posterior.to_json()
    _atomic_write(path, lambda fh: fh.write(text.encode("utf-8")))


def read_posterior(path: str) -> LaplacePosterior:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            return LaplacePosterior.from_json(fh.read())
        except (KeyError, ValueError, json.JSONDecodeError) as exc:
            raise StoreFormatError(f"bad posterior document {path}: {exc}") from exc
