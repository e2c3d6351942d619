import json
import struct

import numpy as np
import pytest

from uec_exporter import (
    EncoderError,
    ExportJob,
    ExporterError,
    HashNgramEncoder,
    JobError,
    encode_job,
    export_pairs,
    export_store,
    resolve_encoder,
)
from uec_exporter.cli import dispatch


class TestExportJob:
    def test_from_json_pairs_and_objects(self):
        doc = {
            "encoder_id": "hash:32",
            "batch_size": 8,
            "normalize": False,
            "texts": [["a", "one"], {"id": "b", "text": "two"}],
        }
        job = ExportJob.from_json(json.dumps(doc))
        assert job.encoder_id == "hash:32"
        assert job.batch_size == 8
        assert job.normalize is False
        assert job.input_texts == (("a", "one"), ("b", "two"))

    def test_defaults(self):
        job = ExportJob.from_json('{"encoder_id": "hash:8", "texts": [["a", "x"]]}')
        assert job.batch_size == 32 and job.normalize is True

    def test_rejects_duplicate_ids(self):
        with pytest.raises(JobError, match="duplicate"):
            ExportJob("hash:8", (("a", "x"), ("a", "y")))

    def test_rejects_empty_id(self):
        with pytest.raises(JobError, match="nonempty"):
            ExportJob("hash:8", (("", "x"),))

    def test_rejects_empty_texts(self):
        with pytest.raises(JobError):
            ExportJob("hash:8", ())

    def test_rejects_bad_batch_size(self):
        with pytest.raises(JobError):
            ExportJob("hash:8", (("a", "x"),), batch_size=0)

    def test_rejects_malformed_json(self):
        with pytest.raises(JobError):
            ExportJob.from_json("{not json")
        with pytest.raises(JobError):
            ExportJob.from_json('{"texts": []}')
        with pytest.raises(JobError):
            ExportJob.from_json('{"encoder_id": "hash:8", "texts": ["loose string"]}')


class TestHashEncoder:
    def test_shape_and_determinism(self):
        enc = resolve_encoder("hash:64:salty")
        a = enc.encode(["the cat sat", "a dog barked"])
        b = enc.encode(["the cat sat", "a dog barked"])
        assert a.shape == (2, 64)
        np.testing.assert_array_equal(a, b)

    def test_whitespace_and_case_normalization(self):
        enc = HashNgramEncoder(32)
        a = enc.encode(["The  Cat \n sat"])
        b = enc.encode(["the cat sat"])
        np.testing.assert_array_equal(a, b)

    def test_salt_changes_embedding(self):
        a = resolve_encoder("hash:64:a").encode(["same text"])
        b = resolve_encoder("hash:64:b").encode(["same text"])
        assert not np.array_equal(a, b)

    def test_similar_texts_score_higher_than_unrelated(self):
        enc = HashNgramEncoder(256)
        v = enc.encode([
            "the quick brown fox jumps",
            "the quick brown fox leaps",
            "parliamentary budget accounting procedures",
        ])
        v = v / np.linalg.norm(v, axis=1, keepdims=True)
        assert v[0] @ v[1] > v[0] @ v[2]

    def test_empty_text_rejected(self):
        with pytest.raises(EncoderError, match="empty text"):
            HashNgramEncoder(16).encode(["   "])

    def test_bad_ids_rejected(self):
        for bad in ("hash:", "hash:abc", "hash:0", "hash:4:a:b:c", "mystery:8"):
            with pytest.raises(EncoderError):
                resolve_encoder(bad)


class TestEncodeJob:
    def test_batching_does_not_change_output(self):
        texts = tuple((f"t{i}", f"sentence number {i} about topic {i % 3}") for i in range(10))
        small = encode_job(ExportJob("hash:64", texts, batch_size=3))
        big = encode_job(ExportJob("hash:64", texts, batch_size=100))
        np.testing.assert_array_equal(small, big)

    def test_normalize_gives_unit_rows(self):
        job = ExportJob("hash:64", (("a", "some words here"),), normalize=True)
        vectors = encode_job(job)
        np.testing.assert_allclose(np.linalg.norm(vectors, axis=1), 1.0, atol=1e-12)


class TestExportStore:
    def test_wire_format_fields(self, tmp_path):
        path = str(tmp_path / "s.uecs")
        job = ExportJob("hash:16:x", (("id-1", "alpha"), ("id-2", "beta")))
        assert export_store(job, path) == 2
        data = open(path, "rb").read()
        assert data[:4] == b"UECS"
        version, dim = struct.unpack_from("<II", data, 4)
        (count,) = struct.unpack_from("<Q", data, 12)
        assert (version, dim, count) == (1, 16, 2)

    def test_primary_reader_accepts_output(self, tmp_path):
        from uec.store_io import read_store

        path = str(tmp_path / "s.uecs")
        texts = tuple((f"doc{i}", f"text number {i}") for i in range(7))
        export_store(ExportJob("hash:32:m", texts), path)
        store = read_store(path)
        assert store.model_name == "hash:32:m"
        assert store.dim == 32
        assert store.ids() == [f"doc{i}" for i in range(7)]
        for rec in store.records:
            np.testing.assert_array_equal(rec.embedding.var, np.zeros(32))
            assert np.linalg.norm(rec.embedding.mean) == pytest.approx(1.0, abs=1e-6)

    def test_reexport_is_byte_identical(self, tmp_path):
        job = ExportJob("hash:32", (("a", "hello world"), ("b", "goodbye world")))
        p1, p2 = str(tmp_path / "a.uecs"), str(tmp_path / "b.uecs")
        export_store(job, p1)
        export_store(job, p2)
        assert open(p1, "rb").read() == open(p2, "rb").read()


class TestExportPairs:
    def test_one_positive_one_negative(self, tmp_path):
        path = str(tmp_path / "pairs.tsv")
        count = export_pairs([("q1", "d1")], ["d1", "d2"], path, seed=0)
        assert count == 2
        lines = open(path, encoding="utf-8").read().splitlines()
        assert lines[0] == "q1\td1\t1"
        assert lines[1] == "q1\td2\t0"

    def test_seed_determinism(self, tmp_path):
        positives = [(f"q{i}", f"d{i}") for i in range(5)]
        corpus = [f"d{i}" for i in range(30)]
        p1, p2 = str(tmp_path / "a.tsv"), str(tmp_path / "b.tsv")
        export_pairs(positives, corpus, p1, negatives_per_positive=3, seed=42)
        export_pairs(positives, corpus, p2, negatives_per_positive=3, seed=42)
        assert open(p1).read() == open(p2).read()

    def test_negative_never_equals_its_positive(self, tmp_path):
        positives = [(f"q{i}", f"d{i}") for i in range(10)]
        corpus = [f"d{i}" for i in range(12)]
        path = str(tmp_path / "pairs.tsv")
        export_pairs(positives, corpus, path, negatives_per_positive=4, seed=7)
        by_query = {}
        for line in open(path, encoding="utf-8").read().splitlines():
            qid, did, label = line.split("\t")
            by_query.setdefault(qid, {}).setdefault(label, set()).add(did)
        for qid, groups in by_query.items():
            assert groups["1"] == {qid.replace("q", "d")}
            assert not (groups["0"] & groups["1"])

    def test_insufficient_corpus(self, tmp_path):
        with pytest.raises(ExporterError, match="too small"):
            export_pairs([("q1", "d1")], ["d1"], str(tmp_path / "p.tsv"), seed=0)

    def test_primary_fit_reader_accepts_output(self, tmp_path):
        from uec.cli import _read_pairs_tsv

        path = str(tmp_path / "pairs.tsv")
        export_pairs([("q1", "d1"), ("q2", "d2")], ["d1", "d2", "d3"], path, seed=1)
        pairs = _read_pairs_tsv(path)
        assert len(pairs) == 4
        assert all(label in (0, 1) for _q, _d, label in pairs)


class TestCli:
    def test_store_subcommand(self, tmp_path):
        job_path = tmp_path / "job.json"
        job_path.write_text(json.dumps({
            "encoder_id": "hash:16",
            "texts": [["a", "first text"], ["b", "second text"]],
        }))
        out = tmp_path / "out.uecs"
        assert dispatch(["store", "--job", str(job_path), "--out", str(out)]) == 0
        from uec.store_io import read_store

        assert len(read_store(str(out))) == 2

    def test_pairs_subcommand(self, tmp_path):
        positives = tmp_path / "pos.tsv"
        positives.write_text("q1\td1\nq2\td2\n")
        corpus = tmp_path / "ids.txt"
        corpus.write_text("d1\nd2\nd3\n")
        out = tmp_path / "pairs.tsv"
        assert dispatch([
            "pairs", "--positives", str(positives), "--corpus", str(corpus),
            "--out", str(out), "--seed", "5",
        ]) == 0
        assert len(out.read_text().splitlines()) == 4

    def test_usage_error_is_one(self):
        assert dispatch(["store"]) == 1
        assert dispatch(["unknown"]) == 1

    def test_data_error_is_two(self, tmp_path):
        job_path = tmp_path / "job.json"
        job_path.write_text('{"encoder_id": "mystery:9", "texts": [["a", "x"]]}')
        assert dispatch(["store", "--job", str(job_path), "--out", str(tmp_path / "o")]) == 2
        assert dispatch(["store", "--job", str(tmp_path / "missing.json"),
                         "--out", str(tmp_path / "o")]) == 2
