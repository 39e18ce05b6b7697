"""Native text classifiers and cross-validated confusion matrices.

Both learners score a sample as ``X @ coef_.T + intercept_`` and predict the
argmax, ties going to the lowest label index:

* ``MultinomialBowClassifier``: multinomial naive Bayes with additive
  smoothing; ``coef_`` holds log feature likelihoods, ``intercept_`` log priors.
* ``LinearBowClassifier``: one-vs-rest hinge loss with L2 regularization,
  trained by per-sample subgradient steps over a seeded shuffle.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, ClassifierMixin, clone
from sklearn.utils.validation import check_is_fitted

from .errors import (
    DimensionMismatchError,
    EmptyTrainingSetError,
    SingleClassDataError,
    TooFewExamplesError,
)
from .textfeat import SparseVector, to_csr


def _as_matrix(X, n_features: int | None = None) -> sp.csr_matrix:
    if isinstance(X, sp.spmatrix) or isinstance(X, sp.sparray):
        return sp.csr_matrix(X, dtype=float)
    if isinstance(X, np.ndarray):
        return sp.csr_matrix(np.atleast_2d(X).astype(float))
    X = list(X)
    if X and isinstance(X[0], SparseVector):
        return to_csr(X, n_features if n_features is not None else max(v.dim for v in X))
    return sp.csr_matrix(np.atleast_2d(np.asarray(X, dtype=float)))


def _labels_and_targets(y, labels) -> tuple[list, np.ndarray]:
    y = list(y)
    if not y:
        raise EmptyTrainingSetError("no training examples")
    labels = list(labels) if labels is not None else sorted(set(y))
    if len(set(labels)) != len(labels):
        raise ValueError("labels must be unique")
    pos = {lab: i for i, lab in enumerate(labels)}
    unknown = set(y) - pos.keys()
    if unknown:
        raise ValueError(f"labels not in label list: {sorted(map(str, unknown))}")
    if len(set(y)) < 2:
        raise SingleClassDataError(f"only one class present: {y[0]!r}")
    return labels, np.array([pos[v] for v in y], dtype=np.int64)


class _ScoringClassifier(ClassifierMixin, BaseEstimator):
    def _check_X(self, X) -> sp.csr_matrix:
        check_is_fitted(self, "coef_")
        X = _as_matrix(X, self.n_features_in_)
        if X.shape[1] != self.n_features_in_:
            raise DimensionMismatchError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return X

    def decision_function(self, X) -> np.ndarray:
        X = self._check_X(X)
        return np.asarray(X @ self.coef_.T) + self.intercept_

    def predict(self, X) -> np.ndarray:
        scores = self.decision_function(X)
        return np.asarray(self.classes_, dtype=object)[np.argmax(scores, axis=1)]

    # -- serialization: floats as repr strings round-trip exactly ------------

    def to_dict(self) -> dict:
        check_is_fitted(self, "coef_")
        return {
            "kind": self._kind,
            "params": self.get_params(),
            "classes": [str(c) for c in self.classes_],
            "n_features": int(self.n_features_in_),
            "intercept": [repr(float(v)) for v in self.intercept_],
            "coef": [[repr(float(v)) for v in row] for row in self.coef_],
        }

    @staticmethod
    def from_dict(d: dict) -> "_ScoringClassifier":
        cls = {"probabilistic": MultinomialBowClassifier, "linear": LinearBowClassifier}[d["kind"]]
        params = dict(d["params"])
        params["labels"] = list(params["labels"]) if params.get("labels") is not None else None
        model = cls(**params)
        model.classes_ = np.asarray(d["classes"], dtype=object)
        model.n_features_in_ = int(d["n_features"])
        model.intercept_ = np.array([float(v) for v in d["intercept"]])
        model.coef_ = np.array([[float(v) for v in row] for row in d["coef"]], dtype=float).reshape(
            len(model.classes_), model.n_features_in_
        )
        return model


class MultinomialBowClassifier(_ScoringClassifier):
    _kind = "probabilistic"

    def __init__(self, alpha: float = 1.0, labels: Sequence[str] | None = None):
        self.alpha = alpha
        self.labels = labels

    def fit(self, X, y):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        X = _as_matrix(X)
        labels, t = _labels_and_targets(y, self.labels)
        if X.shape[0] != len(t):
            raise DimensionMismatchError("X and y differ in length")
        n_classes = len(labels)
        Y = sp.csr_matrix((np.ones(len(t)), (np.arange(len(t)), t)), shape=(len(t), n_classes))
        feature_counts = np.asarray((Y.T @ X).todense())
        class_counts = np.bincount(t, minlength=n_classes).astype(float)
        smoothed = feature_counts + self.alpha
        with np.errstate(divide="ignore"):
            self.intercept_ = np.log(class_counts) - np.log(class_counts.sum())
        self.coef_ = np.log(smoothed) - np.log(smoothed.sum(axis=1, keepdims=True))
        self.classes_ = np.asarray(labels, dtype=object)
        self.n_features_in_ = X.shape[1]
        return self


class LinearBowClassifier(_ScoringClassifier):
    _kind = "linear"

    def __init__(
        self,
        epochs: int = 10,
        learning_rate: float = 0.5,
        reg: float = 1e-4,
        seed: int = 0,
        labels: Sequence[str] | None = None,
    ):
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.reg = reg
        self.seed = seed
        self.labels = labels

    def fit(self, X, y):
        if self.epochs < 1 or self.learning_rate <= 0 or self.reg < 0:
            raise ValueError("need epochs >= 1, learning_rate > 0, reg >= 0")
        X = _as_matrix(X)
        labels, t = _labels_and_targets(y, self.labels)
        n, d = X.shape
        if n != len(t):
            raise DimensionMismatchError("X and y differ in length")
        n_classes = len(labels)
        signs = -np.ones((n, n_classes))
        signs[np.arange(n), t] = 1.0
        rows = [(X.indices[X.indptr[i] : X.indptr[i + 1]], X.data[X.indptr[i] : X.indptr[i + 1]]) for i in range(n)]

        W = np.zeros((n_classes, d))
        b = np.zeros(n_classes)
        rng = np.random.default_rng(self.seed)
        step = 0
        for _ in range(self.epochs):
            for i in rng.permutation(n):
                idx, val = rows[i]
                eta = self.learning_rate / (1.0 + self.learning_rate * self.reg * step)
                step += 1
                margin = signs[i] * (W[:, idx] @ val + b)
                if self.reg:
                    W *= 1.0 - eta * self.reg
                hit = np.flatnonzero(margin < 1.0)
                if hit.size:
                    W[np.ix_(hit, idx)] += eta * signs[i, hit, None] * val[None, :]
                    b[hit] += eta * signs[i, hit]
        self.coef_ = W
        self.intercept_ = b
        self.classes_ = np.asarray(labels, dtype=object)
        self.n_features_in_ = d
        return self


# ---------------------------------------------------------------------------
# functional surface


@dataclass(frozen=True)
class ClassifierSpec:
    kind: str = "linear"
    alpha: float = 1.0
    epochs: int = 10
    learning_rate: float = 0.5
    reg: float = 1e-4
    seed: int = 0
    scheme: str | None = None

    def __post_init__(self):
        if self.kind not in ("probabilistic", "linear"):
            raise ValueError(f"unknown classifier kind {self.kind!r}")
        if self.alpha <= 0 or self.epochs < 1 or self.learning_rate <= 0 or self.reg < 0:
            raise ValueError("invalid classifier hyperparameters")
        if self.scheme not in (None, "counts", "tfidf"):
            raise ValueError(f"unknown feature scheme {self.scheme!r}")

    @property
    def feature_scheme(self) -> str:
        if self.scheme:
            return self.scheme
        return "counts" if self.kind == "probabilistic" else "tfidf"

    def estimator(self, labels: Sequence[str] | None = None, seed: int | None = None) -> _ScoringClassifier:
        if self.kind == "probabilistic":
            return MultinomialBowClassifier(alpha=self.alpha, labels=labels)
        return LinearBowClassifier(
            self.epochs, self.learning_rate, self.reg, self.seed if seed is None else seed, labels
        )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ClassifierSpec":
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})


@dataclass(frozen=True)
class Prediction:
    label: str
    scores: tuple[float, ...] = field(default=())


def train(examples: Sequence[tuple[SparseVector, str]], spec: ClassifierSpec, labels: Sequence[str]) -> _ScoringClassifier:
    if not examples:
        raise EmptyTrainingSetError("no training examples")
    vectors = [v for v, _ in examples]
    dims = {v.dim for v in vectors}
    if len(dims) != 1:
        raise DimensionMismatchError(f"examples have differing dimensions {sorted(dims)}")
    return spec.estimator(list(labels)).fit(to_csr(vectors, dims.pop()), [lab for _, lab in examples])


def predict(model: _ScoringClassifier, v: SparseVector) -> Prediction:
    if v.dim != model.n_features_in_:
        raise DimensionMismatchError(f"vector dimension {v.dim} != {model.n_features_in_}")
    scores = model.decision_function(to_csr([v], v.dim))[0]
    return Prediction(str(model.classes_[int(np.argmax(scores))]), tuple(float(s) for s in scores))


def stratified_folds(y: Sequence, folds: int, seed: int = 0) -> np.ndarray:
    """Fold index per example: each class shuffled (seeded) and dealt round-robin."""
    y = list(y)
    rng = np.random.default_rng(seed)
    assign = np.empty(len(y), dtype=np.int64)
    offset = 0
    for label in sorted(set(y), key=str):
        idx = np.array([i for i, v in enumerate(y) if v == label])
        idx = idx[rng.permutation(len(idx))]
        assign[idx] = (np.arange(len(idx)) + offset) % folds
        offset += len(idx)
    return assign


def cross_val_predict(estimator, X, y, folds: int = 5, seed: int = 0) -> np.ndarray:
    """Out-of-fold predictions: every example predicted once by a model that never saw it."""
    if folds < 2:
        raise ValueError("folds must be >= 2")
    y = np.asarray(list(y), dtype=object)
    for label in sorted(set(y), key=str):
        have = int(np.sum(y == label))
        if have < folds:
            raise TooFewExamplesError(str(label), have, folds)
    X = _as_matrix(X)
    assign = stratified_folds(y, folds, seed)
    out = np.empty(len(y), dtype=object)
    for k in range(folds):
        test = assign == k
        model = clone(estimator)
        if "seed" in model.get_params():
            model.set_params(seed=int(np.random.SeedSequence([seed, k]).generate_state(1)[0]))
        model.fit(X[~test], y[~test])
        out[test] = model.predict(X[test])
    return out


def confusion_counts(truths: Sequence, preds: Sequence, labels: Sequence) -> np.ndarray:
    pos = {lab: i for i, lab in enumerate(labels)}
    M = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for t, p in zip(truths, preds):
        M[pos[t], pos[p]] += 1
    return M


def cv_confusion(examples: Sequence[tuple[SparseVector, str]], spec: ClassifierSpec, labels: Sequence[str], folds: int = 5, seed: int = 0):
    """Confusion matrix of seeded stratified k-fold out-of-fold predictions."""
    from .hierarchy import ConfusionMatrix

    vectors = [v for v, _ in examples]
    y = [lab for _, lab in examples]
    X = to_csr(vectors, max(v.dim for v in vectors))
    preds = cross_val_predict(spec.estimator(list(labels)), X, y, folds, seed)
    return ConfusionMatrix(list(labels), confusion_counts(y, preds, labels))


def classifier_from_dict(d: dict[str, Any]) -> _ScoringClassifier:
    return _ScoringClassifier.from_dict(d)
