"""
Confusion matrices and the threshold metrics derived from them.
"""

from dataclasses import dataclass
from typing import Dict, Sequence

import numpy as np

from probewatch.errors import ArgumentError, LengthMismatchError


@dataclass(frozen=True)
class ConfusionMatrix:
    """Binary confusion counts; positive means probing."""

    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ArgumentError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def to_dict(self) -> Dict[str, int]:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn}

    @classmethod
    def from_dict(cls, d: Dict) -> "ConfusionMatrix":
        return cls(int(d["tp"]), int(d["fp"]), int(d["fn"]), int(d["tn"]))


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    f1: float
    accuracy: float
    far: float

    def to_dict(self) -> Dict[str, float]:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "accuracy": self.accuracy,
            "far": self.far,
        }


def _binary(values, name: str) -> np.ndarray:
    arr = np.asarray(values).reshape(-1)
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ArgumentError(f"{name} must be binary")
    return arr.astype(np.int64)


def confusion(y_true: Sequence[int], y_pred: Sequence[int]) -> ConfusionMatrix:
    """
    Counts true/false positives and negatives.

    Raises:
        LengthMismatchError: If the sequences differ in length.
    """
    t = _binary(y_true, "y_true")
    p = _binary(y_pred, "y_pred")
    if len(t) != len(p):
        raise LengthMismatchError(f"{len(t)} labels vs {len(p)} predictions")
    return ConfusionMatrix(
        tp=int(np.sum((t == 1) & (p == 1))),
        fp=int(np.sum((t == 0) & (p == 1))),
        fn=int(np.sum((t == 1) & (p == 0))),
        tn=int(np.sum((t == 0) & (p == 0))),
    )


def metrics(m: ConfusionMatrix) -> Metrics:
    """
    Precision, recall, F1, accuracy and false alarm rate.

    With no predicted positives precision is 1 when nothing was missed and 0
    otherwise; recall is 1 with no actual positives; the false alarm rate is 0
    with no actual negatives.

    Args:
        m (ConfusionMatrix): Counts over at least one row.

    Returns:
        Metrics: The metrics.
    """
    if m.total == 0:
        raise ArgumentError("metrics need at least one evaluated row")
    if m.tp + m.fp:
        precision = m.tp / (m.tp + m.fp)
    else:
        precision = 1.0 if m.fn == 0 else 0.0
    recall = m.tp / (m.tp + m.fn) if m.tp + m.fn else 1.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return Metrics(
        precision=precision,
        recall=recall,
        f1=f1,
        accuracy=(m.tp + m.tn) / m.total,
        far=m.fp / (m.fp + m.tn) if m.fp + m.tn else 0.0,
    )


def f1_score(y_true, y_pred) -> float:
    return metrics(confusion(y_true, y_pred)).f1
