"""Evaluation metrics and the two dataset analyses (label coexistence, clear/mixed split)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from . import kernels
from .core import LabeledClip, argmax_class
from .errors import EmptyEvaluationError, InfeasibleError, ParameterError, ShapeError
from .sampling import as_generator

CLEAR_THRESHOLD = 0.9


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    counts: np.ndarray  # rows = true class, cols = predicted

    @property
    def num_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.counts + other.counts)


@dataclass(frozen=True, eq=False)
class EvalReport:
    confusion: ConfusionMatrix
    per_class_recall: np.ndarray  # NaN where the class has no true samples
    uar: float
    war: float

    def to_json(self) -> dict:
        return {
            "confusion": self.confusion.counts.tolist(),
            "per_class_recall": [None if np.isnan(r) else float(r) for r in self.per_class_recall],
            "uar": self.uar,
            "war": self.war,
        }

    def to_text(self) -> str:
        C = self.confusion.num_classes
        width = max(5, len(str(self.confusion.counts.max())) + 1)
        head = "true\\pred" + "".join(f"{p:>{width}d}" for p in range(C)) + "   recall"
        lines = [head]
        for t in range(C):
            r = self.per_class_recall[t]
            rec = "      -" if np.isnan(r) else f"{r:9.4f}"
            lines.append(f"{t:>9d}" + "".join(f"{v:>{width}d}" for v in self.confusion.counts[t]) + rec)
        lines.append(f"UAR {self.uar:.4f}  WAR {self.war:.4f}")
        return "\n".join(lines) + "\n"


def confusion(preds, truths, num_classes: int) -> ConfusionMatrix:
    preds = np.asarray(preds, dtype=np.int64).reshape(-1)
    truths = np.asarray(truths, dtype=np.int64).reshape(-1)
    if preds.shape != truths.shape:
        raise ShapeError(f"{preds.size} predictions for {truths.size} ground truths")
    for name, arr in (("prediction", preds), ("truth", truths)):
        if arr.size and (arr.min() < 0 or arr.max() >= num_classes):
            raise ParameterError(f"{name} index out of range for {num_classes} classes")
    return ConfusionMatrix(kernels.confusion_counts(preds, truths, num_classes))


def per_class_recall(cm: ConfusionMatrix) -> np.ndarray:
    rows = cm.counts.sum(axis=1)
    diag = np.diag(cm.counts).astype(np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(rows > 0, diag / np.maximum(rows, 1), np.nan)


def uar_war(cm: ConfusionMatrix) -> tuple:
    """UAR averages recall over classes present in the ground truth; WAR is accuracy."""
    total = cm.total
    if total == 0:
        raise EmptyEvaluationError("cannot score an empty confusion matrix")
    recall = per_class_recall(cm)
    uar = float(np.nanmean(recall))
    war = float(np.trace(cm.counts)) / total
    return uar, war


def eval_report(preds, truths, num_classes: int) -> EvalReport:
    cm = confusion(preds, truths, num_classes)
    uar, war = uar_war(cm)
    return EvalReport(cm, per_class_recall(cm), uar, war)


def _soft_matrix(dataset: Sequence[LabeledClip]) -> np.ndarray:
    return np.stack([s.soft.probs for s in dataset])


def coexistence_matrix(dataset: Sequence[LabeledClip]) -> np.ndarray:
    """Row c = mean soft label over samples whose argmax class is c; NaN rows for absent classes."""
    if not dataset:
        raise EmptyEvaluationError("coexistence matrix of an empty dataset")
    soft = _soft_matrix(dataset)
    C = soft.shape[1]
    assign = np.array([argmax_class(s.soft) for s in dataset])
    out = np.full((C, C), np.nan)
    for c in range(C):
        members = soft[assign == c]
        if len(members):
            out[c] = members.mean(axis=0)
    return out


def split_by_ambiguity(dataset: Sequence[LabeledClip], threshold: float = CLEAR_THRESHOLD) -> tuple:
    """``(clear, mixed)``: clear holds samples with max probability strictly above
    ``threshold``; mixed is every sample, clear ones included."""
    if not 0.0 < threshold <= 1.0:
        raise ParameterError(f"threshold must lie in (0, 1], got {threshold}")
    clear = [s for s in dataset if s.soft.probs.max() > threshold]
    return clear, list(dataset)


def class_counts(dataset: Sequence[LabeledClip], num_classes: int) -> np.ndarray:
    labels = np.array([argmax_class(s.soft) for s in dataset], dtype=np.int64)
    return np.bincount(labels, minlength=num_classes)


def matched_targets(reference_counts, total: int) -> np.ndarray:
    """Per-class counts summing to ``total`` in the proportions of ``reference_counts``.

    Largest-remainder rounding; ties go to the lower class index.
    """
    ref = np.asarray(reference_counts, dtype=np.int64)
    if ref.sum() <= 0:
        raise InfeasibleError("reference distribution is empty")
    exact = ref * total / ref.sum()
    base = np.floor(exact).astype(np.int64)
    rem = total - int(base.sum())
    order = np.lexsort((np.arange(ref.size), -(exact - base)))
    base[order[:rem]] += 1
    return base


def resample_to_distribution(dataset: Sequence[LabeledClip], target_counts, rng) -> List[LabeledClip]:
    """Hit ``target_counts[c]`` samples of each argmax class exactly.

    Down-sampling draws without replacement. Up-sampling keeps every source
    sample once and fills the remainder uniformly with replacement. The result
    is shuffled.
    """
    gen = as_generator(rng)
    target = np.asarray(target_counts, dtype=np.int64)
    if target.min(initial=0) < 0:
        raise ParameterError("target counts must be non-negative")
    labels = np.array([argmax_class(s.soft) for s in dataset], dtype=np.int64)
    chosen = []
    for c, want in enumerate(target):
        pool = np.flatnonzero(labels == c)
        if want == 0:
            continue
        if pool.size == 0:
            raise InfeasibleError(f"class {c} has no source samples but a target of {want}")
        if want <= pool.size:
            chosen.append(gen.choice(pool, size=want, replace=False))
        else:
            extra = gen.choice(pool, size=want - pool.size, replace=True)
            chosen.append(np.concatenate([pool, extra]))
    if not chosen:
        return []
    idx = gen.permutation(np.concatenate(chosen))
    return [dataset[i] for i in idx]
