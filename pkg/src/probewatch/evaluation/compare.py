"""
Side-by-side comparison of the anomaly model against the signature baseline,
and the benchmark table across several models.
"""

import csv
import io
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from probewatch.errors import RowSetMismatchError
from probewatch.evaluation.report import EvalReport
from probewatch.utils import format_float


@dataclass
class Disagreement:
    index: int
    label: Optional[int]
    anomaly: int
    misuse: int
    row: Optional[tuple] = None

    def to_dict(self) -> Dict:
        return {
            "index": self.index,
            "label": self.label,
            "anomaly": self.anomaly,
            "misuse": self.misuse,
            "row": None if self.row is None else list(self.row),
        }


@dataclass
class ComparisonReport:
    """
    Anomaly versus misuse detection on the same rows.

    Deltas are anomaly minus misuse, so a positive recall delta means the
    anomaly model caught more probes.
    """

    anomaly: EvalReport
    misuse: EvalReport
    disagreements: List[Disagreement] = field(default_factory=list)

    @property
    def recall_delta(self) -> float:
        return self.anomaly.recall - self.misuse.recall

    @property
    def f1_delta(self) -> float:
        return self.anomaly.f1 - self.misuse.f1

    @property
    def precision_delta(self) -> float:
        return self.anomaly.precision - self.misuse.precision

    def to_dict(self) -> Dict:
        def side(r: EvalReport) -> Dict:
            return {"matrix": r.matrix.to_dict(), **r.scores.to_dict(), "auc": r.auc}

        return {
            "anomaly": side(self.anomaly),
            "misuse": side(self.misuse),
            "recall_delta": self.recall_delta,
            "f1_delta": self.f1_delta,
            "precision_delta": self.precision_delta,
            "n_disagreements": len(self.disagreements),
            "disagreements": [d.to_dict() for d in self.disagreements],
        }


def _aligned_misuse(anomaly: EvalReport, misuse: EvalReport) -> Optional[np.ndarray]:
    if anomaly.rows is not None and misuse.rows is not None:
        same = len(anomaly.rows) == len(misuse.rows)
        if not same or set(anomaly.rows) != set(misuse.rows):
            raise RowSetMismatchError("the two reports cover different rows")
        position = {row: i for i, row in enumerate(misuse.rows)}
        order = [position[row] for row in anomaly.rows]
        return misuse.predictions[order] if misuse.predictions is not None else None
    if anomaly.predictions is not None and misuse.predictions is not None:
        if len(anomaly.predictions) != len(misuse.predictions):
            raise RowSetMismatchError(
                f"{len(anomaly.predictions)} anomaly rows vs "
                f"{len(misuse.predictions)} misuse rows"
            )
        return misuse.predictions
    return None


def compare(anomaly: EvalReport, misuse: EvalReport) -> ComparisonReport:
    """
    Compares two reports.

    Reports that carry row keys must cover the same row set (order may
    differ); reports that carry only predictions must have equal length.
    Reports built from bare matrices compare on metrics alone.

    Args:
        anomaly (EvalReport): The learned model's report.
        misuse (EvalReport): The rule baseline's report.

    Returns:
        ComparisonReport: Metrics, deltas and per-row disagreements.

    Raises:
        RowSetMismatchError: If the row sets differ.
    """
    misuse_pred = _aligned_misuse(anomaly, misuse)
    disagreements: List[Disagreement] = []
    if misuse_pred is not None and anomaly.predictions is not None:
        for i in np.flatnonzero(anomaly.predictions != misuse_pred):
            disagreements.append(
                Disagreement(
                    index=int(i),
                    label=None if anomaly.labels is None else int(anomaly.labels[i]),
                    anomaly=int(anomaly.predictions[i]),
                    misuse=int(misuse_pred[i]),
                    row=None if anomaly.rows is None else anomaly.rows[i],
                )
            )
    return ComparisonReport(anomaly, misuse, disagreements)


@dataclass
class BenchmarkRow:
    model: str
    f1: float
    auc: Optional[float]
    accuracy: float
    far: float

    def to_dict(self) -> Dict:
        return {
            "model": self.model,
            "f1": self.f1,
            "auc": self.auc,
            "accuracy": self.accuracy,
            "far": self.far,
        }


@dataclass
class BenchmarkTable:
    rows: List[BenchmarkRow]

    def best(self) -> BenchmarkRow:
        """The row with the highest F1; earlier rows win ties."""
        return max(self.rows, key=lambda r: r.f1)

    def to_dict(self) -> Dict:
        return {"rows": [r.to_dict() for r in self.rows]}

    def to_csv(self) -> bytes:
        frame = pd.DataFrame(
            {
                "model": [r.model for r in self.rows],
                "f1": [format_float(r.f1) for r in self.rows],
                "auc": [
                    "" if r.auc is None else format_float(r.auc) for r in self.rows
                ],
                "accuracy": [format_float(r.accuracy) for r in self.rows],
                "far": [format_float(r.far) for r in self.rows],
            }
        )
        buf = io.StringIO()
        frame.to_csv(buf, index=False, lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL)
        return buf.getvalue().encode("utf-8")


def benchmark(reports: Dict[str, EvalReport]) -> BenchmarkTable:
    """One row per named report, in the given order."""
    return BenchmarkTable(
        [
            BenchmarkRow(name, r.f1, r.auc, r.accuracy, r.far)
            for name, r in reports.items()
        ]
    )
