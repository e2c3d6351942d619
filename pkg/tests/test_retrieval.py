import math

import numpy as np
import pytest

from uec.core import EmbeddingRecord, EmbeddingStore, GaussianEmbedding
from uec.errors import DimensionMismatchError, UecError
from uec.retrieval import build_index, search_batch, search_topk
from uec.similarity import SimilarityConfig, score_pair


def gauss(mean, var=None):
    mean = np.asarray(mean, float)
    var = np.zeros_like(mean) if var is None else np.asarray(var, float)
    return GaussianEmbedding(mean, var)


def store_of(pairs, dim, name="docs"):
    return EmbeddingStore(
        name, dim, tuple(EmbeddingRecord(rid, emb) for rid, emb in pairs)
    )


class TestBuildIndex:
    def test_single_record(self):
        idx = build_index(store_of([("d1", gauss([1, 0]))], 2), SimilarityConfig())
        assert idx.size == 1

    def test_empty_store_rejected(self):
        with pytest.raises(UecError):
            build_index(EmbeddingStore("docs", 2, ()), SimilarityConfig())

    def test_prenormalized_means_unit_norm(self):
        rng = np.random.default_rng(0)
        pairs = [
            (f"d{i}", gauss(rng.standard_normal(4) * 3, rng.random(4)))
            for i in range(20)
        ]
        idx = build_index(store_of(pairs, 4), SimilarityConfig(normalize_inputs=True))
        norms = np.linalg.norm(idx.means, axis=1)
        np.testing.assert_allclose(norms, 1.0, atol=1e-6)


class TestSearchTopk:
    def test_self_retrieval(self):
        doc = gauss([0.6, 0.8])
        idx = build_index(store_of([("d1", doc)], 2), SimilarityConfig())
        res = search_topk(idx, doc, k=1)
        assert res.hits[0][0] == "d1"
        assert res.hits[0][1] == pytest.approx(1.0)
        assert res.confidence == res.hits[0][1]

    def test_tie_breaks_by_ascending_doc_id(self):
        doc = gauss([1.0, 0.0])
        idx = build_index(
            store_of([("z", doc), ("a", doc)], 2), SimilarityConfig()
        )
        res = search_topk(idx, doc, k=2)
        assert [h[0] for h in res.hits] == ["a", "z"]

    def test_three_doc_ranking(self):
        e1, e2 = gauss([1.0, 0.0]), gauss([0.0, 1.0])
        mid = gauss([1 / math.sqrt(2), 1 / math.sqrt(2)])
        idx = build_index(
            store_of([("doc1", e1), ("doc2", e2), ("doc3", mid)], 2),
            SimilarityConfig(mode="mean_dot"),
        )
        res = search_topk(idx, e1, k=3)
        assert [h[0] for h in res.hits] == ["doc1", "doc3", "doc2"]
        np.testing.assert_allclose(
            [h[1] for h in res.hits], [1.0, 1 / math.sqrt(2), 0.0], atol=1e-12
        )

    def test_dim_mismatch(self):
        idx = build_index(store_of([("d", gauss([1, 0]))], 2), SimilarityConfig())
        with pytest.raises(DimensionMismatchError):
            search_topk(idx, gauss([1, 0, 0]), k=1)

    def test_k_validated(self):
        idx = build_index(store_of([("d", gauss([1, 0]))], 2), SimilarityConfig())
        with pytest.raises(UecError):
            search_topk(idx, gauss([1, 0]), k=0)


class TestExactness:
    @pytest.mark.parametrize("mode", ["mean_dot", "uncertainty_probit"])
    def test_full_rank_matches_pairwise_score_pair(self, mode):
        rng = np.random.default_rng(17)
        n, d = 60, 6
        cfg = SimilarityConfig(beta=0.05, mode=mode, normalize_inputs=True)
        pairs = [
            (f"d{i:03d}", gauss(rng.standard_normal(d), rng.random(d) * 0.5))
            for i in range(n)
        ]
        idx = build_index(store_of(pairs, d), cfg)
        q = gauss(rng.standard_normal(d), rng.random(d) * 0.5)
        res = search_topk(idx, q, k=n)
        by_id = dict(pairs)
        direct = {rid: score_pair(q, emb, cfg) for rid, emb in pairs}
        # scores agree and the ranking is the full-sort order of score_pair
        for rid, score in res.hits:
            assert score == pytest.approx(direct[rid], abs=1e-12)
        expected_order = sorted(by_id, key=lambda rid: (-direct[rid], rid))
        assert [rid for rid, _ in res.hits] == expected_order

    def test_uniform_variance_inflation_keeps_ranking(self):
        # unit-norm means + isotropic variances make sigma_s^2 identical for
        # every candidate, so probit ranking equals mean-dot ranking at any
        # uniform inflation level
        rng = np.random.default_rng(23)
        n, d = 40, 5
        means = rng.standard_normal((n, d))
        means /= np.linalg.norm(means, axis=1, keepdims=True)
        qm = rng.standard_normal(d)
        q = gauss(qm / np.linalg.norm(qm), np.full(d, 0.1))

        def ranking(doc_var):
            pairs = [(f"d{i:02d}", gauss(means[i], np.full(d, doc_var))) for i in range(n)]
            idx = build_index(store_of(pairs, d), SimilarityConfig(beta=1.0, normalize_inputs=False))
            return [rid for rid, _ in search_topk(idx, q, k=n).hits]

        dot_pairs = [(f"d{i:02d}", gauss(means[i])) for i in range(n)]
        dot_idx = build_index(store_of(dot_pairs, d), SimilarityConfig(mode="mean_dot", normalize_inputs=False))
        dot_ranking = [rid for rid, _ in search_topk(dot_idx, q, k=n).hits]
        assert ranking(0.2) == ranking(2.0) == dot_ranking


class TestSearchBatch:
    def make_corpus(self, n=50, d=4, seed=1):
        rng = np.random.default_rng(seed)
        docs = store_of(
            [(f"d{i:03d}", gauss(rng.standard_normal(d), rng.random(d))) for i in range(n)],
            d,
        )
        queries = store_of(
            [(f"q{i}", gauss(rng.standard_normal(d), rng.random(d))) for i in range(7)],
            d,
            name="queries",
        )
        return docs, queries

    def test_batch_matches_single_query_search(self):
        docs, queries = self.make_corpus()
        idx = build_index(docs, SimilarityConfig(beta=0.1))
        batch = search_batch(idx, queries, k=5)
        for res, rec in zip(batch, queries.records):
            single = search_topk(idx, rec.embedding, k=5, query_id=rec.id)
            assert res.query_id == rec.id
            assert [h[0] for h in res.hits] == [h[0] for h in single.hits]
            np.testing.assert_allclose(
                [h[1] for h in res.hits], [h[1] for h in single.hits], atol=1e-12
            )

    def test_workers_preserve_order_and_results(self):
        docs, queries = self.make_corpus(seed=2)
        idx = build_index(docs, SimilarityConfig(beta=0.1))
        serial = search_batch(idx, queries, k=3, workers=1)
        parallel = search_batch(idx, queries, k=3, workers=4)
        assert [r.query_id for r in parallel] == [r.query_id for r in serial]
        for a, b in zip(serial, parallel):
            assert a.hits == b.hits
