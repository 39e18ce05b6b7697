import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from tdreview.errors import DimensionMismatchError, EmptyVocabularyError
from tdreview.textfeat import (
    BowVectorizer,
    SparseVector,
    VocabConfig,
    Vocabulary,
    build_vocabulary,
    tokenize,
    vectorize,
)


def test_tokenize_empty():
    assert tokenize("") == []


def test_tokenize_case_and_punct():
    assert tokenize("Vignette, vignette!") == ["vignette", "vignette"]


def test_tokenize_stop_words():
    assert tokenize("install via CRAN which I reported") == ["install", "via", "cran", "reported"]


def test_tokenize_keeps_internal_apostrophe_and_underscore():
    assert tokenize("the user's snake_case x", stop_words=False) == ["the", "user's", "snake_case"]
    assert tokenize("a b", stop_words=False, min_length=1) == ["a", "b"]


def test_single_doc_vocabulary():
    v = build_vocabulary([["a", "b", "b"]])
    assert v.index == {"a": 0, "b": 1}
    assert v.df == {"a": 1, "b": 1}


def test_min_df_threshold():
    v = build_vocabulary([["x", "y"], ["y"], ["z", "y"]], VocabConfig(min_df=2))
    assert list(v.index) == ["y"]


def test_empty_vocabulary():
    with pytest.raises(EmptyVocabularyError):
        build_vocabulary([["a"], ["b"]], VocabConfig(min_df=2))
    with pytest.raises(EmptyVocabularyError):
        build_vocabulary([])


def test_max_features_tiebreak():
    docs = [["b", "a", "c"], ["b", "a"], ["d"]]
    v = build_vocabulary(docs, VocabConfig(max_features=2))
    assert v.index == {"a": 0, "b": 1}
    v = build_vocabulary(docs, VocabConfig(max_features=3))
    assert v.index == {"a": 0, "b": 1, "c": 2}


def test_df_matches_brute_force():
    rng = random.Random(5)
    alphabet = list("abcdefgh")
    docs = [[rng.choice(alphabet) for _ in range(rng.randint(1, 9))] for _ in range(5)]
    v = build_vocabulary(docs)
    for tok in v.index:
        assert v.df[tok] == sum(1 for d in docs if tok in d)
    assert sorted(v.index) == list(v.index)
    assert sorted(v.index.values()) == list(range(len(v)))


def test_vectorize_oov_and_counts():
    v = Vocabulary({"a": 0, "b": 1}, {"a": 1, "b": 1}, 1)
    assert vectorize(["zz"], v).items() == []
    assert vectorize(["b", "b"], v, "counts").items() == [(1, 2.0)]


def test_tfidf_weights_and_norm():
    docs = [["a", "b"], ["a"], ["c"]]
    v = build_vocabulary(docs)
    vec = vectorize(["a", "b", "b"], v, "tfidf")
    idf_a = math.log(4 / 3) + 1
    idf_b = math.log(4 / 2) + 1
    raw = np.array([idf_a, 2 * idf_b])
    assert np.allclose(vec.weights, raw / np.linalg.norm(raw), atol=1e-15)
    assert math.isclose(math.sqrt(sum(w * w for w in vec.weights)), 1.0, abs_tol=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.sampled_from(list("abcdefxyz")), max_size=30), st.randoms(use_true_random=False))
def test_vectorize_properties(tokens, rnd):
    v = build_vocabulary([list("abcdef"), list("abc"), list("a")])
    shuffled = tokens[:]
    rnd.shuffle(shuffled)
    for scheme in ("counts", "tfidf"):
        a, b = vectorize(tokens, v, scheme), vectorize(shuffled, v, scheme)
        assert a == b
        assert all(w > 0 for w in a.weights)
        assert list(a.indices) == sorted(set(a.indices))
        if scheme == "tfidf" and len(a):
            assert math.isclose(a.norm(), 1.0, rel_tol=1e-12)


def test_sparse_vector_invariants():
    with pytest.raises(ValueError):
        SparseVector((1, 1), (1.0, 1.0), 3)
    with pytest.raises(ValueError):
        SparseVector((0,), (0.0,), 3)
    with pytest.raises(DimensionMismatchError):
        SparseVector((3,), (1.0,), 3)


def test_vocabulary_serialization_round_trip():
    v = build_vocabulary([["b", "a"], ["a"]], VocabConfig(min_df=1, max_features=5))
    assert Vocabulary.from_dict(v.to_dict()) == v


def test_bow_vectorizer_is_an_estimator():
    texts = ["The vignette is missing", "tests are missing", "thanks"]
    vec = BowVectorizer(scheme="tfidf", min_df=1)
    X = vec.fit_transform(texts)
    assert X.shape == (3, len(vec.vocabulary_))
    assert clone(vec).get_params() == vec.get_params()
    assert list(vec.get_feature_names_out()) == vec.vocabulary_.tokens
    assert np.allclose(np.sqrt(X.multiply(X).sum(axis=1)).A1, 1.0)


def test_determinism():
    docs = [tokenize(t) for t in ["alpha beta", "beta gamma gamma", "delta"]]
    a, b = build_vocabulary(docs), build_vocabulary(docs)
    assert a.to_dict() == b.to_dict()
    assert vectorize(docs[1], a, "tfidf") == vectorize(docs[1], b, "tfidf")
