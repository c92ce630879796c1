"""
Label sources and their combination.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Hashable, List, Optional, Sequence, Tuple

import numpy as np

from probewatch.errors import CoverageMismatchError

logger = logging.getLogger(__name__)


class LabelSource(str, Enum):
    RULE_ENGINE = "rule_engine"
    SIGNATURE_IDS = "signature_ids"
    EXPERT_GROUND_TRUTH = "expert_ground_truth"


@dataclass
class LabelSet:
    """
    Binary verdicts of one label source, keyed by row key.

    An empty set abstains.
    """

    source: LabelSource
    verdicts: Dict[Hashable, int] = field(default_factory=dict)

    @classmethod
    def from_sequence(
        cls, source: LabelSource, keys: Sequence[Hashable], verdicts: Sequence[int]
    ) -> "LabelSet":
        if len(keys) != len(verdicts):
            raise CoverageMismatchError("keys and verdicts differ in length")
        return cls(source, {k: int(bool(v)) for k, v in zip(keys, verdicts)})

    def __len__(self):
        return len(self.verdicts)


@dataclass
class ConflictReport:
    """
    Agreement between the label sources.

    Attributes:
        rows (int): Labelled rows.
        conflicts (int): Rows where at least two sources disagree.
        positives (Dict[str, int]): Probing verdicts per source.
        combined_positives (int): Probing rows after combination.
    """

    rows: int
    conflicts: int
    positives: Dict[str, int]
    combined_positives: int

    def to_dict(self) -> Dict:
        return {
            "rows": self.rows,
            "conflicts": self.conflicts,
            "positives": self.positives,
            "combined_positives": self.combined_positives,
        }


def combine_labels(
    sets: Sequence[LabelSet], keys: Optional[Sequence[Hashable]] = None
) -> Tuple[np.ndarray, ConflictReport]:
    """
    Combines label sources with logical OR.

    Args:
        sets (Sequence[LabelSet]): Label sources; empty sets abstain.
        keys (Sequence[Hashable], optional): Row order of the output. Defaults to
            the key order of the first non-empty set.

    Returns:
        Tuple[np.ndarray, ConflictReport]: Per-row labels and the conflict report.

    Raises:
        CoverageMismatchError: If non-empty sets cover different rows, or none votes.
    """
    voting: List[LabelSet] = [s for s in sets if len(s)]
    if not voting:
        raise CoverageMismatchError("no label source covers any row")
    if keys is None:
        keys = list(voting[0].verdicts)
    wanted = set(keys)
    if len(wanted) != len(keys):
        raise CoverageMismatchError("row keys are not unique")
    for s in voting:
        if set(s.verdicts) != wanted:
            raise CoverageMismatchError(f"{s.source.value} labels cover different rows")

    votes = np.array([[s.verdicts[k] for k in keys] for s in voting], dtype=np.int64)
    labels = votes.max(axis=0)
    conflicts = int(np.sum(votes.min(axis=0) != labels))
    report = ConflictReport(
        rows=len(keys),
        conflicts=conflicts,
        positives={s.source.value: int(votes[i].sum()) for i, s in enumerate(voting)},
        combined_positives=int(labels.sum()),
    )
    if conflicts:
        logger.info("label sources disagree on %d of %d rows", conflicts, len(keys))
    return labels, report
