"""
ROC curves and the area under them.
"""

from typing import List, Sequence, Tuple

import numpy as np

from probewatch.errors import LengthMismatchError, OneClassOnlyError
from probewatch.utils import format_float

RocPoint = Tuple[float, float, float]


def roc_auc(
    y_true: Sequence[int], scores: Sequence[float]
) -> Tuple[List[RocPoint], float]:
    """
    ROC curve over every distinct score threshold and its trapezoidal area.

    The curve starts at (0, 0) with threshold +inf and each later point
    predicts positive for scores ``>= threshold``. Tied scores move both rates
    in one step, so the area equals the pairwise statistic with ties
    counted half.

    Args:
        y_true (Sequence[int]): Binary labels.
        scores (Sequence[float]): Scores, higher meaning more likely positive.

    Returns:
        Tuple[List[RocPoint], float]: ``(fpr, tpr, threshold)`` points and the AUC.

    Raises:
        OneClassOnlyError: If the labels hold one class only.
    """
    y = np.asarray(y_true, dtype=np.int64).reshape(-1)
    s = np.asarray(scores, dtype=float).reshape(-1)
    if len(y) != len(s):
        raise LengthMismatchError(f"{len(y)} labels vs {len(s)} scores")
    n_pos = int(np.sum(y == 1))
    n_neg = int(np.sum(y == 0))
    if n_pos == 0 or n_neg == 0:
        raise OneClassOnlyError("ROC needs at least one positive and one negative")

    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    last = np.r_[np.flatnonzero(np.diff(s)), len(s) - 1]
    tps = np.r_[0, np.cumsum(y)[last]].astype(np.int64)
    fps = np.r_[0, (last + 1) - np.cumsum(y)[last]].astype(np.int64)
    thresholds = np.r_[np.inf, s[last]]

    area2 = int(np.sum((fps[1:] - fps[:-1]) * (tps[1:] + tps[:-1])))
    auc = area2 / (2.0 * n_pos * n_neg)
    curve = [
        (float(f) / n_neg, float(t) / n_pos, float(th))
        for f, t, th in zip(fps, tps, thresholds)
    ]
    return curve, auc


def roc_csv(curve: Sequence[RocPoint]) -> str:
    """The curve as CSV text with an ``fpr,tpr,threshold`` header."""
    lines = ["fpr,tpr,threshold"]
    lines += [",".join(format_float(v) for v in point) for point in curve]
    return "\r\n".join(lines) + "\r\n"
