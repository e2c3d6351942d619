"""Exported artifacts drive the full engine pipeline on a 100-sentence corpus.

Everything crosses the boundary as files: UECS stores, pair TSVs, qrels,
run files, JSON reports. Two hash-encoder salts play the role of two
embedding models so the convolution step is a real two-model fusion.
"""

import json

import pytest

from uec.cli import dispatch as uec
from uec.store_io import read_qrels, read_run, read_store, write_qrels
from uec_exporter import ExportJob, export_pairs, export_store

SUBJECTS = ["the cat", "a dog", "the pilot", "an engineer", "the violinist",
            "a farmer", "the referee", "a nurse", "the painter", "an actor"]
VERBS = ["watches", "repairs", "describes", "ignores", "measures",
         "paints", "carries", "follows", "records", "studies"]
OBJECTS = ["the old bridge", "a broken clock", "the quiet harbor",
           "a winding road", "the copper kettle", "a paper lantern",
           "the glass tower", "a wooden boat", "the narrow staircase",
           "a silver coin"]


def corpus_sentences():
    sentences = []
    for i in range(100):
        subject = SUBJECTS[i % 10]
        verb = VERBS[(i // 10) % 10]
        obj = OBJECTS[(i * 3 + i // 10) % 10]
        sentences.append((f"d{i:03d}", f"{subject} {verb} {obj} on day {i}"))
    return sentences


def query_sentences(docs):
    # near-duplicates of the first 20 docs: same content words, reordered
    queries = []
    for i in range(20):
        did, text = docs[i]
        words = text.split()
        queries.append((f"q{i:03d}", " ".join(words[::-1])))
    return queries


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("pipeline")
    docs = corpus_sentences()
    queries = query_sentences(docs)
    models = ("hash:128:alpha", "hash:128:beta")

    for m, encoder_id in enumerate(models):
        export_store(ExportJob(encoder_id, tuple(docs)), str(root / f"docs{m}.uecs"))
        export_store(ExportJob(encoder_id, tuple(queries)), str(root / f"queries{m}.uecs"))
        # the fit store must resolve both query and doc ids
        export_store(
            ExportJob(encoder_id, tuple(docs) + tuple(queries)),
            str(root / f"fitstore{m}.uecs"),
        )

    positives = [(f"q{i:03d}", f"d{i:03d}") for i in range(20)]
    export_pairs(
        positives, [did for did, _ in docs], str(root / "pairs.tsv"),
        negatives_per_positive=2, seed=13,
    )
    write_qrels({q: {d: 1} for q, d in positives}, str(root / "qrels.tsv"))
    return root, models


class TestEndToEnd:
    def test_exports_pass_engine_validation(self, workspace):
        root, _models = workspace
        for m in range(2):
            store = read_store(str(root / f"docs{m}.uecs"))
            assert len(store) == 100 and store.dim == 128
        assert len(read_qrels(str(root / "qrels.tsv"))) == 20

    def test_full_pipeline(self, workspace):
        root, _models = workspace

        for m in range(2):
            assert uec([
                "fit", "--pairs", str(root / "pairs.tsv"),
                "--store", str(root / f"fitstore{m}.uecs"),
                "--out", str(root / f"post{m}.json"),
            ]) == 0
            for kind in ("docs", "queries"):
                assert uec([
                    "probabilize", "--store", str(root / f"{kind}{m}.uecs"),
                    "--posterior", str(root / f"post{m}.json"),
                    "--out", str(root / f"{kind}{m}_g.uecs"),
                ]) == 0

        for kind in ("docs", "queries"):
            assert uec([
                "convolve",
                str(root / f"{kind}0_g.uecs"), str(root / f"{kind}1_g.uecs"),
                "--mode", "bayes",
                "--out", str(root / f"{kind}_fused.uecs"),
            ]) == 0

        assert uec([
            "search", "--index", str(root / "docs_fused.uecs"),
            "--queries", str(root / "queries_fused.uecs"),
            "--k", "10", "--run", str(root / "run.tsv"),
        ]) == 0

        assert uec([
            "eval", "--task", "retrieval",
            "--run", str(root / "run.tsv"), "--qrels", str(root / "qrels.tsv"),
            "--k", "10", "--out", str(root / "report.json"),
        ]) == 0

        report = json.loads((root / "report.json").read_text())
        assert set(report) == {"ndcg@10", "recall@10", "nauc@10"}
        # reversed-word queries share every token with their source doc,
        # so lexical-hash retrieval should place it at or near rank 1
        assert report["recall@10"] >= 0.9
        assert report["ndcg@10"] >= 0.8

        run = read_run(str(root / "run.tsv"))
        assert len(run) == 20
        assert all(len(hits) == 10 for hits in run.values())

    def test_probabilized_stores_carry_variance(self, workspace):
        root, _models = workspace
        uec([
            "fit", "--pairs", str(root / "pairs.tsv"),
            "--store", str(root / "fitstore0.uecs"),
            "--out", str(root / "post_check.json"),
        ])
        uec([
            "probabilize", "--store", str(root / "docs0.uecs"),
            "--posterior", str(root / "post_check.json"),
            "--out", str(root / "docs0_check.uecs"),
        ])
        store = read_store(str(root / "docs0_check.uecs"))
        assert any(rec.embedding.var.sum() > 0 for rec in store.records)
