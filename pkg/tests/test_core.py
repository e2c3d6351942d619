import numpy as np
import pytest
from hypothesis import given, strategies as st

from uec.core import (
    EmbeddingRecord,
    EmbeddingStore,
    EnsembleInput,
    GaussianEmbedding,
    l2_normalize,
    trace,
)
from uec.errors import DegenerateEmbeddingError, DimensionMismatchError, UecError


def gauss(mean, var):
    return GaussianEmbedding(np.asarray(mean, float), np.asarray(var, float))


class TestGaussianEmbedding:
    def test_length_mismatch_rejected(self):
        with pytest.raises(DimensionMismatchError):
            gauss([1, 2], [1])

    def test_negative_variance_rejected(self):
        with pytest.raises(UecError):
            gauss([1, 2], [1, -0.5])

    def test_non_finite_rejected(self):
        with pytest.raises(UecError):
            gauss([np.nan, 0], [0, 0])
        with pytest.raises(UecError):
            gauss([1, 0], [np.inf, 0])

    def test_arrays_are_readonly(self):
        e = gauss([1, 2], [0.5, 0.5])
        with pytest.raises(ValueError):
            e.mean[0] = 9.0

    def test_deterministic_constructor(self):
        e = GaussianEmbedding.deterministic([1.0, -2.0])
        assert np.array_equal(e.var, [0.0, 0.0])


class TestL2Normalize:
    def test_already_unit_norm(self):
        e = l2_normalize(gauss([1, 0], [0.1, 0.1]))
        np.testing.assert_allclose(e.mean, [1, 0])
        np.testing.assert_allclose(e.var, [0.1, 0.1])

    def test_three_four_five(self):
        e = l2_normalize(gauss([3, 4], [25, 50]))
        np.testing.assert_allclose(e.mean, [0.6, 0.8])
        np.testing.assert_allclose(e.var, [1.0, 2.0])

    def test_variance_transform_matches_monte_carlo(self):
        # scaling z -> z/||mu|| with ||mu|| held constant
        rng = np.random.default_rng(11)
        mean = np.array([3.0, 4.0])
        var = np.array([25.0, 50.0])
        norm = np.linalg.norm(mean)
        samples = (mean + np.sqrt(var) * rng.standard_normal((200_000, 2))) / norm
        np.testing.assert_allclose(samples.var(axis=0), var / norm**2, rtol=0.02)

    def test_zero_norm_rejected(self):
        with pytest.raises(DegenerateEmbeddingError):
            l2_normalize(gauss([0, 0], [1, 1]))

    @given(
        st.lists(st.floats(-50, 50), min_size=1, max_size=8),
        st.lists(st.floats(0, 10), min_size=1, max_size=8),
    )
    def test_idempotent_and_trace_scaling(self, mean, var):
        d = min(len(mean), len(var))
        mean, var = np.array(mean[:d]), np.array(var[:d])
        if np.linalg.norm(mean) < 1e-6:
            return
        e = gauss(mean, var)
        once = l2_normalize(e)
        twice = l2_normalize(once)
        np.testing.assert_allclose(twice.mean, once.mean, rtol=1e-12, atol=1e-15)
        np.testing.assert_allclose(twice.var, once.var, rtol=1e-12, atol=1e-15)
        expected = trace(e) / float(mean @ mean)
        if expected > 0:
            assert abs(trace(once) - expected) <= 1e-9 * expected


class TestTrace:
    @pytest.mark.parametrize(
        "var,expected",
        [((0.0, 0.0, 0.0), 0.0), ((1.0, 1.0), 2.0), ((0.25, 0.5, 1.25), 2.0)],
    )
    def test_examples(self, var, expected):
        assert trace(gauss(np.ones(len(var)), var)) == expected

    @given(st.lists(st.floats(0, 100), min_size=1, max_size=10), st.randoms())
    def test_permutation_invariant(self, var, rnd):
        var = np.array(var)
        perm = list(range(len(var)))
        rnd.shuffle(perm)
        a = gauss(np.ones_like(var), var)
        b = gauss(np.ones_like(var), var[perm])
        assert trace(a) == pytest.approx(trace(b), rel=1e-12)


class TestStores:
    def test_duplicate_ids_rejected(self):
        rec = EmbeddingRecord("a", gauss([1.0], [0.0]))
        with pytest.raises(UecError):
            EmbeddingStore("m", 1, (rec, rec))

    def test_empty_id_rejected(self):
        with pytest.raises(UecError):
            EmbeddingRecord("", gauss([1.0], [0.0]))

    def test_dim_mismatch_rejected(self):
        rec = EmbeddingRecord("a", gauss([1.0, 2.0], [0.0, 0.0]))
        with pytest.raises(DimensionMismatchError):
            EmbeddingStore("m", 3, (rec,))

    def test_ensemble_requires_same_ids(self):
        a = EmbeddingStore("m1", 1, (EmbeddingRecord("a", gauss([1.0], [0.0])),))
        b = EmbeddingStore("m2", 1, (EmbeddingRecord("b", gauss([1.0], [0.0])),))
        with pytest.raises(UecError):
            EnsembleInput((a, b))

    def test_iter_aligned_follows_first_store_order(self):
        recs1 = tuple(
            EmbeddingRecord(rid, gauss([float(i)], [0.0]))
            for i, rid in enumerate(["b", "a", "c"])
        )
        recs2 = tuple(
            EmbeddingRecord(rid, gauss([float(i)], [0.0]))
            for i, rid in enumerate(["a", "b", "c"])
        )
        ens = EnsembleInput((EmbeddingStore("m1", 1, recs1), EmbeddingStore("m2", 1, recs2)))
        assert [rid for rid, _ in ens.iter_aligned()] == ["b", "a", "c"]
