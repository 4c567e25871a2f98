"""Binary classification metrics at frame or subject granularity.

Hypomimia is the positive class. Undefined ratios (zero denominator) are
reported as 0.0 and listed in Metrics.undefined instead of raising.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .cohort import Label, LabeledSubject, subject_features
from .model import DetectionModel, forward_batch


class Granularity(enum.Enum):
    FRAME = "frame"
    SUBJECT = "subject"


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be >= 0")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    ppv: float
    tpr: float
    f1: float
    confusion: Confusion
    granularity: Granularity
    undefined: tuple[str, ...] = ()


def metrics_from_confusion(confusion: Confusion, granularity: Granularity) -> Metrics:
    if confusion.total == 0:
        raise ValueError("empty confusion matrix")
    undefined: list[str] = []
    accuracy = (confusion.tp + confusion.tn) / confusion.total
    if confusion.tp + confusion.fp > 0:
        ppv = confusion.tp / (confusion.tp + confusion.fp)
    else:
        ppv = 0.0
        undefined.append("ppv")
    if confusion.tp + confusion.fn > 0:
        tpr = confusion.tp / (confusion.tp + confusion.fn)
    else:
        tpr = 0.0
        undefined.append("tpr")
    if ppv + tpr > 0:
        f1 = 2.0 * ppv * tpr / (ppv + tpr)
    else:
        f1 = 0.0
        undefined.append("f1")
    return Metrics(accuracy, ppv, tpr, f1, confusion, granularity, tuple(undefined))


def _confusion_from_predictions(pred: np.ndarray, truth: np.ndarray) -> Confusion:
    tp = int(np.sum((pred == 1) & (truth == 1)))
    fp = int(np.sum((pred == 1) & (truth == 0)))
    fn = int(np.sum((pred == 0) & (truth == 1)))
    tn = int(np.sum((pred == 0) & (truth == 0)))
    return Confusion(tp, fp, fn, tn)


def evaluate(
    model: DetectionModel, subjects: list[LabeledSubject], granularity: Granularity
) -> Metrics:
    """Frame granularity predicts every frame; subject granularity predicts
    Hypomimia iff the mean frame probability exceeds 0.5 (ties -> Healthy)."""
    if not subjects:
        raise ValueError("subject set must be nonempty")
    preds: list[int] = []
    truths: list[int] = []
    for subject in subjects:
        X = subject_features(subject, model.config.feature_dim)
        probs = forward_batch(model, X)[:, 1]
        truth = 1 if subject.label is Label.HYPOMIMIA else 0
        if granularity is Granularity.FRAME:
            preds.extend(int(p > 0.5) for p in probs)
            truths.extend([truth] * len(probs))
        else:
            preds.append(int(float(probs.mean()) > 0.5))
            truths.append(truth)
    return metrics_from_confusion(
        _confusion_from_predictions(np.array(preds), np.array(truths)), granularity
    )


def metrics_csv(metrics: Metrics) -> str:
    """The eval CLI's stdout contract: header plus one value line."""
    return (
        "accuracy,ppv,tpr,f1\n"
        f"{metrics.accuracy:.6f},{metrics.ppv:.6f},{metrics.tpr:.6f},{metrics.f1:.6f}\n"
    )
