"""
Evaluation reports bundling a confusion matrix, its metrics and the ROC curve.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from probewatch.errors import LengthMismatchError, OneClassOnlyError
from probewatch.evaluation.metrics import ConfusionMatrix, Metrics, confusion, metrics
from probewatch.evaluation.roc import RocPoint, roc_auc
from probewatch.utils import parse_float

logger = logging.getLogger(__name__)


@dataclass
class EvalReport:
    """
    Outcome of scoring one model on one labelled row set.

    Attributes:
        matrix (ConfusionMatrix): Counts at ``threshold``.
        scores (Metrics): Precision, recall, F1, accuracy and FAR.
        roc (List[RocPoint]): ``(fpr, tpr, threshold)`` points; empty for
            one-class data.
        auc (float, optional): Area under ``roc``; None for one-class data.
        threshold (float): Decision threshold on the probing probability.
        labels (np.ndarray, optional): Ground truth per row.
        predictions (np.ndarray, optional): Verdict per row.
        rows (List[Tuple], optional): Row keys, aligned with ``predictions``.
    """

    matrix: ConfusionMatrix
    scores: Metrics
    roc: List[RocPoint]
    auc: Optional[float]
    threshold: float = 0.5
    labels: Optional[np.ndarray] = None
    predictions: Optional[np.ndarray] = None
    rows: Optional[List[Tuple]] = None

    @property
    def precision(self) -> float:
        return self.scores.precision

    @property
    def recall(self) -> float:
        return self.scores.recall

    @property
    def f1(self) -> float:
        return self.scores.f1

    @property
    def accuracy(self) -> float:
        return self.scores.accuracy

    @property
    def far(self) -> float:
        return self.scores.far

    def to_dict(self) -> Dict:
        d = {
            "matrix": self.matrix.to_dict(),
            **self.scores.to_dict(),
            "auc": self.auc,
            "threshold": self.threshold,
            "roc": [list(p) for p in self.roc],
        }
        if self.predictions is not None:
            d["predictions"] = [int(v) for v in self.predictions]
        if self.labels is not None:
            d["labels"] = [int(v) for v in self.labels]
        if self.rows is not None:
            d["rows"] = [list(r) for r in self.rows]
        return d

    @classmethod
    def from_dict(cls, d: Dict) -> "EvalReport":
        matrix = ConfusionMatrix.from_dict(d["matrix"])
        auc = d.get("auc")
        return cls(
            matrix=matrix,
            scores=metrics(matrix),
            roc=[tuple(parse_float(v) for v in p) for p in d.get("roc", [])],
            auc=None if auc is None else parse_float(auc),
            threshold=parse_float(d.get("threshold", 0.5)),
            labels=np.asarray(d["labels"], dtype=np.int64) if "labels" in d else None,
            predictions=(
                np.asarray(d["predictions"], dtype=np.int64)
                if "predictions" in d
                else None
            ),
            rows=[tuple(r) for r in d["rows"]] if "rows" in d else None,
        )


def evaluate(
    y_true: Sequence[int],
    scores: Sequence[float],
    threshold: float = 0.5,
    rows: Optional[Sequence[Tuple]] = None,
) -> EvalReport:
    """
    Scores predictions against ground truth.

    Args:
        y_true (Sequence[int]): Binary labels.
        scores (Sequence[float]): Probing probabilities or 0/1 verdicts.
        threshold (float): Rows with ``score >= threshold`` are predicted probing.
        rows (Sequence[Tuple], optional): Row keys carried into the report.

    Returns:
        EvalReport: The report. One-class ground truth leaves the ROC empty
        and the AUC unset, with a warning.

    Raises:
        LengthMismatchError: If labels, scores and rows differ in length.
    """
    y = np.asarray(y_true, dtype=np.int64).reshape(-1)
    s = np.asarray(scores, dtype=float).reshape(-1)
    if len(y) != len(s):
        raise LengthMismatchError(f"{len(y)} labels vs {len(s)} predictions")
    if rows is not None and len(rows) != len(y):
        raise LengthMismatchError(f"{len(rows)} row keys vs {len(y)} labels")
    predictions = (s >= threshold).astype(np.int64)
    matrix = confusion(y, predictions)
    try:
        curve, auc = roc_auc(y, s)
    except OneClassOnlyError:
        logger.warning("evaluation rows hold one class; ROC and AUC are undefined")
        curve, auc = [], None
    return EvalReport(
        matrix=matrix,
        scores=metrics(matrix),
        roc=curve,
        auc=auc,
        threshold=threshold,
        labels=y,
        predictions=predictions,
        rows=None if rows is None else [tuple(r) for r in rows],
    )
