"""Tokenization, vocabulary and bag-of-words / TF-IDF vectors."""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .errors import DimensionMismatchError, EmptyVocabularyError

STOP_WORDS = frozenset(
    """
    a about above after again against all am an and any are as at be because
    been before being below between both but by can could did do does doing
    down during each few for from further had has have having he her here hers
    herself him himself his how i if in into is it its itself just me more most
    my myself no nor not now of off on once only or other our ours ourselves
    out over own same she should so some such than that the their theirs them
    themselves then there these they this those through to too under until up
    very was we were what when where which while who whom why will with would
    you your yours yourself yourselves it's i'm i've don't
    """.split()
)

_TOKEN = re.compile(r"\w+(?:'\w+)*")


def tokenize(text: str, stop_words: bool = True, min_length: int = 2, lowercase: bool = True) -> list[str]:
    if lowercase:
        text = text.lower()
    tokens = [t for t in _TOKEN.findall(text) if len(t) >= min_length]
    if stop_words:
        tokens = [t for t in tokens if t.lower() not in STOP_WORDS]
    return tokens


@dataclass(frozen=True)
class SparseVector:
    """Sorted (index, weight) pairs over a vocabulary of ``dim`` entries."""

    indices: tuple[int, ...] = ()
    weights: tuple[float, ...] = ()
    dim: int = 0

    def __post_init__(self):
        if len(self.indices) != len(self.weights):
            raise ValueError("indices and weights differ in length")
        if any(b <= a for a, b in zip(self.indices, self.indices[1:])):
            raise ValueError("indices must be strictly increasing")
        if any(w <= 0 for w in self.weights):
            raise ValueError("weights must be positive")
        if self.indices and (self.indices[0] < 0 or self.indices[-1] >= self.dim):
            raise DimensionMismatchError(f"index out of range for dimension {self.dim}")

    def items(self) -> list[tuple[int, float]]:
        return list(zip(self.indices, self.weights))

    def norm(self) -> float:
        return math.sqrt(sum(w * w for w in self.weights))

    def __len__(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class VocabConfig:
    lowercase: bool = True
    min_df: int = 1
    max_features: int | None = None
    stop_words: bool = True
    min_token_length: int = 2


@dataclass
class Vocabulary:
    index: dict[str, int]
    df: dict[str, int]
    n_docs: int
    config: VocabConfig = field(default_factory=VocabConfig)

    def __len__(self) -> int:
        return len(self.index)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    @property
    def tokens(self) -> list[str]:
        return sorted(self.index, key=self.index.__getitem__)

    def idf(self) -> np.ndarray:
        """Smoothed inverse document frequency, ln((1+N)/(1+df)) + 1, per index."""
        df = np.array([self.df[t] for t in self.tokens], dtype=float)
        return np.log((1.0 + self.n_docs) / (1.0 + df)) + 1.0

    def to_dict(self) -> dict:
        return {
            "config": {
                "lowercase": self.config.lowercase,
                "min_df": self.config.min_df,
                "max_features": self.config.max_features,
                "stop_words": self.config.stop_words,
                "min_token_length": self.config.min_token_length,
            },
            "n_docs": self.n_docs,
            "tokens": self.tokens,
            "df": [self.df[t] for t in self.tokens],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Vocabulary":
        tokens = list(d["tokens"])
        return cls(
            index={t: i for i, t in enumerate(tokens)},
            df=dict(zip(tokens, (int(x) for x in d["df"]))),
            n_docs=int(d["n_docs"]),
            config=VocabConfig(**d["config"]),
        )


def build_vocabulary(docs: Sequence[Sequence[str]], config: VocabConfig | None = None) -> Vocabulary:
    """Vocabulary over pre-tokenized documents; indices follow sorted token order."""
    config = config or VocabConfig()
    if not docs:
        raise EmptyVocabularyError("no documents")
    df: Counter = Counter()
    for doc in docs:
        df.update(set(doc))
    kept = [t for t, n in df.items() if n >= config.min_df]
    if config.max_features is not None:
        kept = sorted(kept, key=lambda t: (-df[t], t))[: config.max_features]
    if not kept:
        raise EmptyVocabularyError(f"no token reaches min_df={config.min_df}")
    kept.sort()
    return Vocabulary({t: i for i, t in enumerate(kept)}, {t: df[t] for t in kept}, len(docs), config)


def vectorize(tokens: Iterable[str], vocab: Vocabulary, scheme: str = "counts") -> SparseVector:
    counts = Counter(vocab.index[t] for t in tokens if t in vocab.index)
    if not counts:
        return SparseVector(dim=len(vocab))
    idx = sorted(counts)
    if scheme == "counts":
        return SparseVector(tuple(idx), tuple(float(counts[i]) for i in idx), len(vocab))
    if scheme != "tfidf":
        raise ValueError(f"unknown feature scheme {scheme!r}")
    tokens_by_index = vocab.tokens
    w = [counts[i] * (math.log((1 + vocab.n_docs) / (1 + vocab.df[tokens_by_index[i]])) + 1.0) for i in idx]
    norm = math.sqrt(sum(x * x for x in w))
    return SparseVector(tuple(idx), tuple(x / norm for x in w), len(vocab))


def to_csr(vectors: Sequence[SparseVector], dim: int | None = None) -> sp.csr_matrix:
    """Stack sparse vectors into a CSR matrix of shape (len(vectors), dim)."""
    if dim is None:
        dim = max((v.dim for v in vectors), default=0)
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for v in vectors:
        if v.indices and v.indices[-1] >= dim:
            raise DimensionMismatchError(f"vector index {v.indices[-1]} >= {dim}")
        indices.extend(v.indices)
        data.extend(v.weights)
        indptr.append(len(indices))
    return sp.csr_matrix(
        (np.asarray(data, dtype=float), np.asarray(indices, dtype=np.int64), np.asarray(indptr, dtype=np.int64)),
        shape=(len(vectors), dim),
    )


def from_csr_row(X: sp.csr_matrix, i: int) -> SparseVector:
    start, end = X.indptr[i], X.indptr[i + 1]
    pairs = sorted((int(j), float(w)) for j, w in zip(X.indices[start:end], X.data[start:end]) if w > 0)
    return SparseVector(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs), X.shape[1])


class BowVectorizer(TransformerMixin, BaseEstimator):
    """Text to sparse bag-of-words matrix (raw counts or L2-normalized TF-IDF)."""

    def __init__(
        self,
        scheme: str = "counts",
        lowercase: bool = True,
        min_df: int = 1,
        max_features: int | None = None,
        stop_words: bool = True,
        min_token_length: int = 2,
    ):
        self.scheme = scheme
        self.lowercase = lowercase
        self.min_df = min_df
        self.max_features = max_features
        self.stop_words = stop_words
        self.min_token_length = min_token_length

    def _config(self) -> VocabConfig:
        return VocabConfig(self.lowercase, self.min_df, self.max_features, self.stop_words, self.min_token_length)

    def _tokens(self, text: str) -> list[str]:
        return tokenize(text, self.stop_words, self.min_token_length, self.lowercase)

    def fit(self, texts, y=None):
        self.vocabulary_ = build_vocabulary([self._tokens(t) for t in texts], self._config())
        return self

    def vectors(self, texts) -> list[SparseVector]:
        check_is_fitted(self, "vocabulary_")
        return [vectorize(self._tokens(t), self.vocabulary_, self.scheme) for t in texts]

    def transform(self, texts):
        return to_csr(self.vectors(texts), len(self.vocabulary_))

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "vocabulary_")
        return np.asarray(self.vocabulary_.tokens, dtype=object)

    @classmethod
    def from_vocabulary(cls, vocab: Vocabulary, scheme: str = "counts") -> "BowVectorizer":
        c = vocab.config
        vec = cls(scheme, c.lowercase, c.min_df, c.max_features, c.stop_words, c.min_token_length)
        vec.vocabulary_ = vocab
        return vec
