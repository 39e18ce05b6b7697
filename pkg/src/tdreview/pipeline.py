"""Two-stage TD detector.

Stage 1 gates sentences into td / non_td. Stage 2 routes TD sentences to a
cluster of the type hierarchy and a per-cluster leaf model picks the final
type; single-type clusters need no leaf model.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .corpus import NON_TD, TD_TYPES, LabeledSentence, RawComment, is_td, split_sentences
from .errors import CorruptModelError, MissingClusterDataError, SchemaMismatchError
from .hierarchy import TypeHierarchy, induce_hierarchy, reference_hierarchy
from .learn import ClassifierSpec, classifier_from_dict, confusion_counts, cross_val_predict
from .textfeat import BowVectorizer, VocabConfig, Vocabulary

logger = logging.getLogger(__name__)

MODEL_SCHEMA_VERSION = 1
GATE_LABELS = (NON_TD, "td")
EPOCH = "1970-01-01T00:00:00Z"


@dataclass
class TdInstance:
    sentence: str
    td_type: str
    cluster: str
    gate_scores: dict[str, float]
    router_scores: dict[str, float] | None = None
    leaf_scores: dict[str, float] | None = None
    comment_id: str = ""
    url: str = ""
    package: str = ""
    platform: str = ""
    created_at: str = ""
    position: int = 0

    def to_dict(self) -> dict:
        return {
            "sentence": self.sentence,
            "type": self.td_type,
            "cluster": self.cluster,
            "comment_id": self.comment_id,
            "url": self.url,
            "package": self.package,
            "platform": self.platform,
            "created_at": self.created_at,
            "position": self.position,
            "scores": {"gate": self.gate_scores, "router": self.router_scores, "leaf": self.leaf_scores},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TdInstance":
        scores = d.get("scores") or {}
        return cls(
            sentence=d["sentence"],
            td_type=d["type"],
            cluster=d.get("cluster", ""),
            gate_scores=scores.get("gate") or {},
            router_scores=scores.get("router"),
            leaf_scores=scores.get("leaf"),
            comment_id=d.get("comment_id", ""),
            url=d.get("url", ""),
            package=d.get("package", ""),
            platform=d.get("platform", ""),
            created_at=d.get("created_at", ""),
            position=int(d.get("position", 0)),
        )


@dataclass
class Decision:
    """Full trace of one sentence through the stages; stage-2 fields stay None when gated out."""

    label: str
    gate_scores: dict[str, float]
    cluster: str | None = None
    router_scores: dict[str, float] | None = None
    leaf_scores: dict[str, float] | None = None


def _scores(model, X) -> dict[str, float]:
    row = model.decision_function(X)[0]
    return {str(c): float(s) for c, s in zip(model.classes_, row)}


def _argmax(scores: dict[str, float]) -> str:
    # dicts keep label order, so ties resolve to the lowest label index
    best = max(scores.values())
    return next(k for k, v in scores.items() if v == best)


@dataclass
class PipelineModel:
    vectorizer: BowVectorizer
    stage1: object
    hierarchy: TypeHierarchy
    router: object | None
    leaf_models: dict[str, object]
    metadata: dict = field(default_factory=dict)
    gate_threshold: float | None = None

    @property
    def vocabulary(self) -> Vocabulary:
        return self.vectorizer.vocabulary_

    def decide(self, text: str) -> Decision:
        X = self.vectorizer.transform([text])
        gate = _scores(self.stage1, X)
        if self.gate_threshold is None:
            passed = _argmax(gate) == "td"
        else:
            z = np.array(list(gate.values()))
            p = np.exp(z - z.max())
            passed = float(p[list(gate).index("td")] / p.sum()) >= self.gate_threshold
        if not passed:
            return Decision(NON_TD, gate)
        if self.router is None:
            cluster, router = self.hierarchy.names[0], None
        else:
            router = _scores(self.router, X)
            cluster = _argmax(router)
        leaf_model = self.leaf_models.get(cluster)
        if leaf_model is None:
            return Decision(self.hierarchy.clusters[cluster][0], gate, cluster, router)
        leaf = _scores(leaf_model, X)
        return Decision(_argmax(leaf), gate, cluster, router, leaf)

    def route(self, text: str) -> tuple[str, str]:
        """Stage-2 only: (cluster, type) for a sentence assumed to be TD."""
        X = self.vectorizer.transform([text])
        cluster = self.hierarchy.names[0] if self.router is None else _argmax(_scores(self.router, X))
        leaf_model = self.leaf_models.get(cluster)
        if leaf_model is None:
            return cluster, self.hierarchy.clusters[cluster][0]
        return cluster, _argmax(_scores(leaf_model, X))

    def to_dict(self) -> dict:
        return {
            "schema_version": MODEL_SCHEMA_VERSION,
            "metadata": self.metadata,
            "scheme": self.vectorizer.scheme,
            "gate_threshold": None if self.gate_threshold is None else repr(float(self.gate_threshold)),
            "vocabulary": self.vocabulary.to_dict(),
            "stage1": self.stage1.to_dict(),
            "hierarchy": self.hierarchy.to_dict(),
            "router": None if self.router is None else self.router.to_dict(),
            "leaf_models": {name: m.to_dict() for name, m in self.leaf_models.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineModel":
        if d.get("schema_version") != MODEL_SCHEMA_VERSION:
            raise SchemaMismatchError(f"model schema_version {d.get('schema_version')!r}, expected {MODEL_SCHEMA_VERSION}")
        try:
            vec = BowVectorizer.from_vocabulary(Vocabulary.from_dict(d["vocabulary"]), d["scheme"])
            threshold = d.get("gate_threshold")
            return cls(
                vectorizer=vec,
                stage1=classifier_from_dict(d["stage1"]),
                hierarchy=TypeHierarchy.from_dict(d["hierarchy"]),
                router=None if d["router"] is None else classifier_from_dict(d["router"]),
                leaf_models={k: classifier_from_dict(v) for k, v in d["leaf_models"].items()},
                metadata=d.get("metadata", {}),
                gate_threshold=None if threshold is None else float(threshold),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CorruptModelError(f"invalid model document: {exc}") from exc


def _dataset_digest(dataset: Sequence[LabeledSentence]) -> str:
    h = hashlib.sha256()
    for s in dataset:
        h.update(json.dumps(s.to_dict(), sort_keys=True, ensure_ascii=False).encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()


def _derived_seed(seed: int, stream: int) -> int:
    return int(np.random.SeedSequence([seed, stream]).generate_state(1)[0])


def resolve_hierarchy(source) -> TypeHierarchy | str:
    """Accepts "induce", "reference", "preset:<path>", a path, or a TypeHierarchy."""
    if isinstance(source, TypeHierarchy) or source == "induce":
        return source
    if source in ("reference", "preset", "preset:reference"):
        return reference_hierarchy()
    path = str(source)
    if path.startswith("preset:"):
        path = path[len("preset:") :]
    return TypeHierarchy.load(path)


def train_pipeline(
    dataset: Sequence[LabeledSentence],
    spec: ClassifierSpec | None = None,
    hierarchy_source="induce",
    seed: int = 0,
    k_max: int | None = None,
    folds: int = 5,
    vocab_config: VocabConfig | None = None,
    created_at: str | None = None,
) -> PipelineModel:
    """Train gate, hierarchy, router and leaf models on a labeled dataset.

    ``created_at`` defaults to the newest timestamp in the dataset so that
    retraining on identical input serializes byte-identically.
    """
    spec = spec or ClassifierSpec()
    dataset = list(dataset)
    labels = [s.label for s in dataset]
    td_present = [t for t in TD_TYPES if t in set(labels)]
    if NON_TD not in labels or len(td_present) < 2:
        raise ValueError("dataset needs non_td sentences and at least two TD types")

    vc = vocab_config or VocabConfig()
    vectorizer = BowVectorizer(spec.feature_scheme, vc.lowercase, vc.min_df, vc.max_features, vc.stop_words, vc.min_token_length)
    X = vectorizer.fit_transform([s.text for s in dataset])

    gate_y = ["td" if is_td(lab) else NON_TD for lab in labels]
    stage1 = spec.estimator(list(GATE_LABELS), seed=_derived_seed(seed, 0)).fit(X, gate_y)

    td_rows = np.flatnonzero([is_td(lab) for lab in labels])
    X_td = X[td_rows]
    y_td = [labels[i] for i in td_rows]

    source = resolve_hierarchy(hierarchy_source)
    confusion = None
    if source == "induce":
        from .hierarchy import ConfusionMatrix

        preds = cross_val_predict(spec.estimator(td_present), X_td, y_td, folds, _derived_seed(seed, 1))
        confusion = ConfusionMatrix(td_present, confusion_counts(y_td, preds, td_present))
        hierarchy = induce_hierarchy(confusion, k_max, seed)
    else:
        hierarchy = source
        stray = sorted(set(y_td) - set(hierarchy.types))
        if stray:
            raise ValueError(f"types not covered by the hierarchy: {stray}")
    for name, types in hierarchy.clusters.items():
        for t in types:
            if t not in y_td:
                raise MissingClusterDataError(name, t)

    router = None
    if len(hierarchy.names) > 1:
        router = spec.estimator(hierarchy.names, seed=_derived_seed(seed, 2)).fit(
            X_td, [hierarchy.cluster_of(t) for t in y_td]
        )

    leaf_models = {}
    for j, (name, types) in enumerate(hierarchy.clusters.items()):
        if len(types) < 2:
            continue
        rows = [i for i, t in enumerate(y_td) if t in types]
        leaf_models[name] = spec.estimator(list(types), seed=_derived_seed(seed, 3 + j)).fit(
            X_td[rows], [y_td[i] for i in rows]
        )

    stamps = [s.created_at for s in dataset if s.created_at]
    metadata = {
        "seed": seed,
        "created_at": created_at or (max(stamps) if stamps else EPOCH),
        "spec": spec.to_dict(),
        "hierarchy_source": "induce" if source == "induce" else "preset",
        "k_max": k_max,
        "folds": folds,
        "n_train": len(dataset),
        "dataset_sha256": _dataset_digest(dataset),
    }
    if confusion is not None:
        metadata["confusion"] = confusion.to_dict()
    return PipelineModel(vectorizer, stage1, hierarchy, router, leaf_models, metadata)


def classify_sentence(model: PipelineModel, text: str) -> TdInstance | None:
    d = model.decide(text)
    if d.label == NON_TD:
        return None
    return TdInstance(text, d.label, d.cluster, d.gate_scores, d.router_scores, d.leaf_scores)


def classify_comment(model: PipelineModel, comment: RawComment) -> list[TdInstance]:
    out = []
    for pos, sentence in enumerate(split_sentences(comment.body)):
        inst = classify_sentence(model, sentence)
        if inst is None:
            continue
        inst.comment_id = comment.comment_id
        inst.url = comment.url
        inst.package = comment.package
        inst.platform = comment.platform
        inst.created_at = comment.created_at
        inst.position = pos
        out.append(inst)
    return out


def classify_comments(model: PipelineModel, comments: Iterable[RawComment], workers: int = 1) -> list[TdInstance]:
    """Classify many comments; with ``workers > 1`` a thread pool is used and input order kept."""
    comments = list(comments)
    if workers <= 1:
        results = [classify_comment(model, c) for c in comments]
    else:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda c: classify_comment(model, c), comments))
    return [inst for batch in results for inst in batch]


def dumps_model(model: PipelineModel) -> str:
    return json.dumps(model.to_dict(), ensure_ascii=False, separators=(",", ":")) + "\n"


def save_model(model: PipelineModel, path: str | Path) -> None:
    Path(path).write_text(dumps_model(model), encoding="utf-8")


def load_model(path: str | Path) -> PipelineModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptModelError(f"{path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise CorruptModelError(f"{path}: not a JSON object")
    return PipelineModel.from_dict(doc)


class HierarchicalTdClassifier(ClassifierMixin, BaseEstimator):
    """Estimator facade over :func:`train_pipeline`.

    ``fit`` takes sentences and labels (``"non_td"`` or a TD type name);
    ``predict`` returns one label per sentence.
    """

    def __init__(
        self,
        kind: str = "linear",
        alpha: float = 1.0,
        epochs: int = 10,
        learning_rate: float = 0.5,
        reg: float = 1e-4,
        scheme: str | None = None,
        hierarchy="induce",
        k_max: int | None = None,
        folds: int = 5,
        min_df: int = 1,
        max_features: int | None = None,
        stop_words: bool = True,
        seed: int = 0,
    ):
        self.kind = kind
        self.alpha = alpha
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.reg = reg
        self.scheme = scheme
        self.hierarchy = hierarchy
        self.k_max = k_max
        self.folds = folds
        self.min_df = min_df
        self.max_features = max_features
        self.stop_words = stop_words
        self.seed = seed

    def fit(self, X, y):
        X, y = list(X), list(y)
        if len(X) != len(y):
            raise ValueError("X and y differ in length")
        spec = ClassifierSpec(self.kind, self.alpha, self.epochs, self.learning_rate, self.reg, self.seed, self.scheme)
        data = [LabeledSentence(text, label) for text, label in zip(X, y)]
        self.model_ = train_pipeline(
            data,
            spec,
            self.hierarchy,
            self.seed,
            self.k_max,
            self.folds,
            VocabConfig(min_df=self.min_df, max_features=self.max_features, stop_words=self.stop_words),
        )
        self.classes_ = np.asarray([NON_TD] + [t for t in TD_TYPES if t in self.model_.hierarchy.types], dtype=object)
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "model_")
        return np.asarray([self.model_.decide(text).label for text in X], dtype=object)
