from __future__ import annotations

from dataclasses import dataclass
from enum import StrEnum

import numpy as np
from numpy.typing import ArrayLike
from sklearn.metrics import accuracy_score, confusion_matrix, fbeta_score, precision_recall_fscore_support

from fuzzydsr.schemas import Metrics


class MetricsError(ValueError):
    pass


class RewardKind(StrEnum):
    F1 = "f1"
    F2 = "f2"


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise MetricsError("Confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def vectors(self) -> tuple[np.ndarray, np.ndarray]:
        """Expand the counts back into (predictions, labels) vectors in tp, fp, tn, fn order."""
        predictions = np.repeat(np.array([1, 1, 0, 0], dtype=np.int8), [self.tp, self.fp, self.tn, self.fn])
        labels = np.repeat(np.array([1, 0, 0, 1], dtype=np.int8), [self.tp, self.fp, self.tn, self.fn])
        return predictions, labels


def _binary(values: ArrayLike, name: str) -> np.ndarray:
    array = np.asarray(values)
    if array.ndim != 1:
        raise MetricsError(f"{name} must be a 1-D vector")
    if array.size and not np.isin(array, (0, 1)).all():
        raise MetricsError(f"{name} must only hold 0 and 1")
    return array.astype(np.int8)


def _checked_pair(predictions: ArrayLike, labels: ArrayLike) -> tuple[np.ndarray, np.ndarray]:
    predicted = _binary(predictions, "predictions")
    actual = _binary(labels, "labels")
    if predicted.shape != actual.shape:
        raise MetricsError(f"Length mismatch: {predicted.size} predictions vs {actual.size} labels")
    return predicted, actual


def confusion(predictions: ArrayLike, labels: ArrayLike) -> ConfusionMatrix:
    predicted, actual = _checked_pair(predictions, labels)
    if actual.size == 0:
        return ConfusionMatrix()
    tn, fp, fn, tp = confusion_matrix(actual, predicted, labels=[0, 1]).ravel()
    return ConfusionMatrix(tp=int(tp), fp=int(fp), tn=int(tn), fn=int(fn))


def score_predictions(predictions: ArrayLike, labels: ArrayLike) -> Metrics:
    """Accuracy, precision, recall, F1 and F2 for fraud = 1; undefined ratios score zero."""
    predicted, actual = _checked_pair(predictions, labels)
    if actual.size == 0:
        raise MetricsError("Cannot score an empty prediction vector")
    precision, recall, f1, _ = precision_recall_fscore_support(
        actual, predicted, beta=1.0, average="binary", pos_label=1, zero_division=0
    )
    return Metrics(
        accuracy=float(accuracy_score(actual, predicted)),
        precision=float(precision),
        recall=float(recall),
        f1=float(f1),
        f2=float(fbeta_score(actual, predicted, beta=2.0, pos_label=1, zero_division=0)),
    )


def metrics(cm: ConfusionMatrix) -> Metrics:
    if cm.total == 0:
        raise MetricsError("Cannot score an empty confusion matrix")
    return score_predictions(*cm.vectors())


def reward_from(scores: Metrics, kind: RewardKind) -> float:
    return scores.f1 if kind is RewardKind.F1 else scores.f2
