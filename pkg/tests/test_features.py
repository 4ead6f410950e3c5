from __future__ import annotations

import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from collab_ensemble.errors import EmptyVectorWarning, InputError
from collab_ensemble.features import (
    FeatureVector,
    ItemCatalog,
    KernelConfig,
    analyze,
    build_tfidf,
    format_features,
    gram_matrix,
    kernel,
    kernel_matrix,
    load_stopwords,
    parse_features,
    read_corpus,
    transform_tfidf,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def dense_vectors(dim, min_size=1, max_size=8):
    return st.lists(
        st.lists(finite, min_size=dim, max_size=dim).map(FeatureVector.from_dense),
        min_size=min_size,
        max_size=max_size,
    )


class TestFeatureVector:
    def test_dense_round_trip_drops_zeros(self):
        v = FeatureVector.from_dense([0.0, 1.5, 0.0, -2.0])
        np.testing.assert_array_equal(v.indices, [1, 3])
        np.testing.assert_array_equal(v.to_dense(), [0.0, 1.5, 0.0, -2.0])

    @pytest.mark.parametrize(
        "indices, values, dim",
        [
            ([1, 1], [1.0, 2.0], 3),
            ([2, 1], [1.0, 2.0], 3),
            ([3], [1.0], 3),
            ([-1], [1.0], 3),
            ([0], [math.nan], 3),
            ([0], [math.inf], 3),
            ([0], [1.0], 0),
        ],
    )
    def test_rejects_invalid(self, indices, values, dim):
        with pytest.raises(InputError):
            FeatureVector(indices, values, dim)

    def test_arrays_are_read_only(self):
        v = FeatureVector.from_dense([1.0, 2.0])
        with pytest.raises(ValueError):
            v.values[0] = 5.0

    def test_catalog_rejects_mixed_dimensionality(self):
        with pytest.raises(InputError):
            ItemCatalog({"a": FeatureVector.from_dense([1.0]), "b": FeatureVector.from_dense([1.0, 2.0])}, 1)

    def test_catalog_unknown_item(self):
        cat = ItemCatalog({"a": FeatureVector.from_dense([1.0])}, 1)
        with pytest.raises(InputError, match="'zz'"):
            cat["zz"]


class TestKernel:
    def test_linear_orthogonal(self):
        assert kernel(KernelConfig.linear(), FeatureVector.from_dense([1, 0]), FeatureVector.from_dense([0, 1])) == 0.0

    def test_linear_hand_dot(self):
        a, b = FeatureVector.from_dense([1, 2, 3]), FeatureVector.from_dense([4, 5, 6])
        assert kernel(KernelConfig.linear(), a, b) == 32.0

    @pytest.mark.parametrize("gamma", [1e-3, 0.5, 7.0])
    def test_rbf_self_is_one(self, gamma):
        a = FeatureVector.from_dense([0.3, -1.2, 4.0])
        assert kernel(KernelConfig.rbf(gamma), a, a) == 1.0

    def test_rbf_against_dense_formula(self):
        a, b = FeatureVector.from_dense([1.0, 0.0, 2.0]), FeatureVector.from_dense([0.0, 3.0, 2.0])
        assert kernel(KernelConfig.rbf(0.1), a, b) == pytest.approx(math.exp(-0.1 * 10.0), rel=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(InputError):
            kernel(KernelConfig.linear(), FeatureVector.from_dense([1.0]), FeatureVector.from_dense([1.0, 2.0]))

    @pytest.mark.parametrize("kind, gamma", [("rbf", None), ("rbf", 0.0), ("rbf", -1.0), ("linear", 1.0), ("poly", None)])
    def test_config_validation(self, kind, gamma):
        with pytest.raises(InputError):
            KernelConfig(kind, gamma)

    @given(dense_vectors(4, 2, 2), st.floats(0.01, 5))
    def test_symmetry(self, pair, gamma):
        a, b = pair
        for cfg in (KernelConfig.linear(), KernelConfig.rbf(gamma)):
            assert kernel(cfg, a, b) == kernel(cfg, b, a)

    @given(dense_vectors(3, 2, 2), st.floats(0.01, 2))
    def test_rbf_range(self, pair, gamma):
        a, b = pair
        k = kernel(KernelConfig.rbf(gamma), a, b)
        assert 0.0 <= k <= 1.0
        if a == b:
            assert k == 1.0
        elif 1e-15 < gamma * float(np.sum((a.to_dense() - b.to_dense()) ** 2)) < 700:
            # outside this band exp(-z) rounds to exactly 1.0 or 0.0
            assert 0.0 < k < 1.0


class TestGramMatrix:
    def test_single_item_rbf(self):
        np.testing.assert_array_equal(gram_matrix(KernelConfig.rbf(1.0), [FeatureVector.from_dense([3.0, 1.0])]), [[1.0]])

    def test_two_identical_linear(self):
        x = FeatureVector.from_dense([1.0, 1.0])
        np.testing.assert_array_equal(gram_matrix(KernelConfig.linear(), [x, x]), [[2.0, 2.0], [2.0, 2.0]])

    def test_orthonormal_identity(self):
        items = [FeatureVector.from_dense(r) for r in np.eye(3)]
        np.testing.assert_array_equal(gram_matrix(KernelConfig.linear(), items), np.eye(3))

    @given(dense_vectors(3, 1, 8), st.floats(0.01, 3))
    def test_psd_and_matches_pairwise(self, items, gamma):
        for cfg in (KernelConfig.linear(), KernelConfig.rbf(gamma)):
            K = gram_matrix(cfg, items)
            np.testing.assert_array_equal(K, K.T)
            assert np.linalg.eigvalsh(K).min() >= -1e-9 * max(1.0, np.abs(K).max())
            pairwise = np.array([[kernel(cfg, a, b) for b in items] for a in items])
            np.testing.assert_allclose(K, pairwise, rtol=1e-9, atol=1e-9)
            if cfg.kind == "rbf":
                np.testing.assert_array_equal(np.diag(K), 1.0)

    def test_kernel_matrix_rectangular(self):
        a = [FeatureVector.from_dense([1.0, 2.0]), FeatureVector.from_dense([0.0, 1.0])]
        b = [FeatureVector.from_dense([3.0, 0.0])]
        np.testing.assert_array_equal(kernel_matrix(KernelConfig.linear(), a, b), [[3.0], [0.0]])


class TestTfidf:
    def test_single_doc_gives_empty_catalog(self):
        index = build_tfidf([("d1", "apples and oranges")])
        assert len(index.catalog) == 0
        assert index.empty_docs == ("d1",)

    def test_two_one_word_docs(self):
        index = build_tfidf([("d1", "apple"), ("d2", "banana")])
        assert index.idf == pytest.approx([math.log(2)] * 2)
        for d in ("d1", "d2"):
            v = index.catalog[d]
            assert len(v) == 1
            assert v.values[0] == 1.0

    def test_shared_term_dropped(self):
        index = build_tfidf([("d1", "apple pear"), ("d2", "apple plum")])
        assert "appl" not in index.vocabulary
        assert set(index.vocabulary) == {"pear", "plum"}

    def test_hand_weights(self):
        # d1: cat x2, dog x1; d2: bird; d3: dog. cat df=1, dog df=2.
        index = build_tfidf([("d1", "cat cat dog"), ("d2", "bird"), ("d3", "dog")])
        w_cat, w_dog = 2 * math.log(3), math.log(3 / 2)
        norm = math.hypot(w_cat, w_dog)
        v = index.catalog["d1"].to_dense()
        assert v[index.vocabulary["cat"]] == pytest.approx(w_cat / norm, rel=1e-14)
        assert v[index.vocabulary["dog"]] == pytest.approx(w_dog / norm, rel=1e-14)

    def test_stopwords_and_stemming(self):
        stop = load_stopwords()
        assert {"the", "and", "of"} <= stop
        assert analyze("The Running runners RAN, and ran!", stop) == ["run", "runner", "ran", "ran"]

    def test_caller_stopwords(self):
        index = build_tfidf([("d1", "the apple"), ("d2", "a banana")], stopwords={"a"})
        assert "the" in index.vocabulary

    def test_empty_document_flagged(self):
        index = build_tfidf([("d1", "apple"), ("d2", "the and of"), ("d3", "banana")])
        assert index.empty_docs == ("d2",)
        assert "d2" not in index.catalog

    def test_transform_matches_training_doc(self):
        corpus = [("d1", "stock prices fell sharply"), ("d2", "football match won"), ("d3", "prices of football tickets")]
        index = build_tfidf(corpus)
        for doc_id, text in corpus:
            v = transform_tfidf(index, text)
            np.testing.assert_allclose(v.to_dense(), index.catalog[doc_id].to_dense(), atol=1e-12)

    def test_transform_ignores_unknown_terms(self):
        index = build_tfidf([("d1", "apple"), ("d2", "banana")])
        v = transform_tfidf(index, "apple apple zebra")
        np.testing.assert_array_equal(v.to_dense()[[index.vocabulary["appl"], index.vocabulary["banana"]]], [1.0, 0.0])

    def test_transform_stopwords_only_warns(self):
        index = build_tfidf([("d1", "apple"), ("d2", "banana")])
        with pytest.warns(EmptyVectorWarning):
            v = transform_tfidf(index, "the and of")
        assert len(v) == 0

    @given(st.lists(st.text(alphabet="abcde ", min_size=1, max_size=30), min_size=2, max_size=8))
    def test_unit_norm(self, texts):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            index = build_tfidf([(f"d{k}", t) for k, t in enumerate(texts)], stopwords=set())
        for doc_id in index.catalog.ids:
            assert abs(index.catalog[doc_id].norm() - 1.0) <= 1e-12
        assert len(index.catalog) + len(index.empty_docs) == len(texts)


class TestFeatureFile:
    def test_round_trip(self):
        cat = ItemCatalog(
            {"b": FeatureVector.from_dense([0.1, 0.0, 1 / 3]), "a": FeatureVector.from_dense([0.0, 2.5, 0.0])}, 3
        )
        back = parse_features(format_features(cat).splitlines())
        assert back.ids == cat.ids
        for i in cat.ids:
            assert back[i] == cat[i]

    @pytest.mark.parametrize(
        "text, line",
        [
            ("#dim 3\na 2:1.0 1:1.0\n", 2),
            ("#dim 3\na 0:1.0\nb 3:1.0\n", 3),
            ("#dim 3\na 0:x\n", 2),
            ("a 0:1.0\n", 1),
            ("#dim 3\na 0:1\na 1:1\n", 3),
        ],
    )
    def test_errors_name_line(self, text, line):
        with pytest.raises(InputError, match=f"line {line}"):
            parse_features(text.splitlines())

    def test_read_corpus(self, tmp_path):
        p = tmp_path / "c.tsv"
        p.write_text("d1\tsport,news\tA match\nd2\t\tno categories\n", encoding="utf-8")
        corpus, cats = read_corpus(p)
        assert corpus == [("d1", "A match"), ("d2", "no categories")]
        assert cats == {"d1": frozenset({"sport", "news"}), "d2": frozenset()}
