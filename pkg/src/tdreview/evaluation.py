"""Stratified 80:20 split, per-class A/P/R/F1 and per-stage pipeline reports.

Summary rows use macro averaging (unweighted mean over classes).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np

from .corpus import NON_TD, TD_TYPES, LabeledSentence, is_td
from .errors import LengthMismatchError, TooFewExamplesError

# Published deep-encoder F1 values; shown next to native results, never asserted.
REFERENCE_F1 = {
    "stage1_bert": 0.90,
    "stage1_bilstm": 0.82,
    "stage1_bow_svm": 0.76,
    "router": 0.82,
    "Cluster-1": 0.71,
    "Cluster-2": 0.77,
    "Cluster-3": 0.91,
}


def split_80_20(dataset: Sequence, seed: int = 0, label_of=lambda s: s.label, min_per_class: int = 5):
    """Stratified split; each class sends round(0.2 * count) (at least 1) items to test."""
    rng = np.random.default_rng(seed)
    by_label: dict[Hashable, list[int]] = {}
    for i, item in enumerate(dataset):
        by_label.setdefault(label_of(item), []).append(i)
    test_idx: set[int] = set()
    for label in sorted(by_label, key=str):
        idx = by_label[label]
        if len(idx) < min_per_class:
            raise TooFewExamplesError(str(label), len(idx), min_per_class)
        n_test = max(1, math.floor(0.2 * len(idx) + 0.5))
        perm = rng.permutation(len(idx))
        test_idx.update(idx[j] for j in perm[:n_test])
    train = [x for i, x in enumerate(dataset) if i not in test_idx]
    test = [x for i, x in enumerate(dataset) if i in test_idx]
    return train, test


@dataclass(frozen=True)
class EvalCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass
class ClassMetrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    support: int
    counts: EvalCounts


@dataclass
class MetricsReport:
    labels: list[str]
    per_class: dict[str, ClassMetrics]
    macro_precision: float
    macro_recall: float
    macro_f1: float
    accuracy: float
    n: int
    averaging: str = "macro"

    def to_dict(self) -> dict:
        return {
            "averaging": self.averaging,
            "n": self.n,
            "accuracy": self.accuracy,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "per_class": {
                lab: {
                    "accuracy": m.accuracy,
                    "precision": m.precision,
                    "recall": m.recall,
                    "f1": m.f1,
                    "support": m.support,
                    "tp": m.counts.tp,
                    "fp": m.counts.fp,
                    "tn": m.counts.tn,
                    "fn": m.counts.fn,
                }
                for lab, m in self.per_class.items()
            },
        }


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def f1_score(precision: float, recall: float) -> float:
    return 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)


def compute_metrics(truths: Sequence, predictions: Sequence, labels: Sequence | None = None) -> MetricsReport:
    truths, predictions = list(truths), list(predictions)
    if len(truths) != len(predictions):
        raise LengthMismatchError(f"{len(truths)} truths vs {len(predictions)} predictions")
    labels = list(labels) if labels is not None else sorted(set(truths) | set(predictions), key=str)
    missing = (set(truths) | set(predictions)) - set(labels)
    if missing:
        raise ValueError(f"values outside the label list: {sorted(map(str, missing))}")
    n = len(truths)
    t = np.array([labels.index(v) for v in truths], dtype=np.int64)
    p = np.array([labels.index(v) for v in predictions], dtype=np.int64)
    per_class = {}
    for k, lab in enumerate(labels):
        tp = int(np.sum((t == k) & (p == k)))
        fp = int(np.sum((t != k) & (p == k)))
        fn = int(np.sum((t == k) & (p != k)))
        tn = n - tp - fp - fn
        prec, rec = _ratio(tp, tp + fp), _ratio(tp, tp + fn)
        per_class[str(lab)] = ClassMetrics(
            _ratio(tp + tn, n), prec, rec, f1_score(prec, rec), tp + fn, EvalCounts(tp, fp, tn, fn)
        )
    k = len(labels)
    return MetricsReport(
        labels=[str(x) for x in labels],
        per_class=per_class,
        macro_precision=sum(m.precision for m in per_class.values()) / k,
        macro_recall=sum(m.recall for m in per_class.values()) / k,
        macro_f1=sum(m.f1 for m in per_class.values()) / k,
        accuracy=_ratio(int(np.sum(t == p)), n),
        n=n,
    )


@dataclass
class PipelineReport:
    stage1: MetricsReport
    router: MetricsReport | None
    per_cluster: dict[str, MetricsReport]
    stage2_conditioned: MetricsReport
    end_to_end_11class: MetricsReport
    reference_f1: dict = field(default_factory=lambda: dict(REFERENCE_F1))

    def to_dict(self) -> dict:
        return {
            "averaging": "macro",
            "stage1": self.stage1.to_dict(),
            "router": None if self.router is None else self.router.to_dict(),
            "per_cluster": {k: v.to_dict() for k, v in self.per_cluster.items()},
            "stage2_conditioned": self.stage2_conditioned.to_dict(),
            "end_to_end_11class": self.end_to_end_11class.to_dict(),
            "reference_f1_not_reproduced": self.reference_f1,
        }


def evaluate_pipeline(model, test_set: Sequence[LabeledSentence]) -> PipelineReport:
    """Per-stage metrics; router and leaf sections are conditioned on gold TD sentences."""
    h = model.hierarchy
    truths = [s.label for s in test_set]
    decisions = [model.decide(s.text) for s in test_set]

    gate_truth = ["td" if is_td(t) else NON_TD for t in truths]
    gate_pred = ["td" if is_td(d.label) else NON_TD for d in decisions]
    stage1 = compute_metrics(gate_truth, gate_pred, [NON_TD, "td"])

    gold_td = [(s, t) for s, t in zip(test_set, truths) if is_td(t) and t in h.types]
    routed = [model.route(s.text) for s, _ in gold_td]
    router = None
    if len(h.names) > 1:
        router = compute_metrics([h.cluster_of(t) for _, t in gold_td], [c for c, _ in routed], h.names)

    per_cluster = {}
    for name, types in h.clusters.items():
        if len(types) < 2:
            continue
        members = [s for s, t in gold_td if t in types]
        if not members:
            continue
        leaf = model.leaf_models[name]
        preds = list(leaf.predict(model.vectorizer.transform([s.text for s in members])))
        per_cluster[name] = compute_metrics([s.label for s in members], preds, types)

    type_labels = [t for t in TD_TYPES if t in h.types]
    stage2 = compute_metrics([t for _, t in gold_td], [ty for _, ty in routed], type_labels)
    all_labels = [NON_TD] + type_labels
    e2e_truth = [t if t in all_labels else NON_TD for t in truths]
    end_to_end = compute_metrics(e2e_truth, [d.label for d in decisions], all_labels)
    return PipelineReport(stage1, router, per_cluster, stage2, end_to_end)


def format_table(report: PipelineReport) -> str:
    """Aligned plain-text summary, one row per section."""
    rows = [("section", "A", "P", "R", "F1", "n")]

    def add(name: str, m: MetricsReport | None):
        if m is not None:
            rows.append((name, f"{m.accuracy:.3f}", f"{m.macro_precision:.3f}", f"{m.macro_recall:.3f}", f"{m.macro_f1:.3f}", str(m.n)))

    add("stage1 (td gate)", report.stage1)
    add("stage2 router", report.router)
    for name, m in report.per_cluster.items():
        add(f"stage2 {name}", m)
    add("stage2 types | gold td", report.stage2_conditioned)
    add("end-to-end 11-class", report.end_to_end_11class)
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths))) for r in rows]
    lines.insert(1, "-" * len(lines[0]))
    lines.append("(P/R/F1 are macro averages over classes)")
    return "\n".join(lines) + "\n"
