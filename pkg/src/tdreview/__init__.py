"""Technical-debt detection and analytics for software peer-review comments."""

from .corpus import NON_TD, TD_TYPES, LabeledSentence, RawComment, TdType, split_sentences
from .hierarchy import SpectralTypeClustering, TypeHierarchy, induce_hierarchy, reference_hierarchy
from .learn import ClassifierSpec, LinearBowClassifier, MultinomialBowClassifier
from .pipeline import (
    HierarchicalTdClassifier,
    PipelineModel,
    TdInstance,
    classify_comment,
    classify_sentence,
    load_model,
    save_model,
    train_pipeline,
)
from .textfeat import BowVectorizer

__version__ = "0.1.0"

__all__ = [
    "NON_TD",
    "TD_TYPES",
    "BowVectorizer",
    "ClassifierSpec",
    "HierarchicalTdClassifier",
    "LabeledSentence",
    "LinearBowClassifier",
    "MultinomialBowClassifier",
    "PipelineModel",
    "RawComment",
    "SpectralTypeClustering",
    "TdInstance",
    "TdType",
    "TypeHierarchy",
    "classify_comment",
    "classify_sentence",
    "induce_hierarchy",
    "load_model",
    "reference_hierarchy",
    "save_model",
    "split_sentences",
    "train_pipeline",
]
