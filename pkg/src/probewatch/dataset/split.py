"""
Train/validation/test partitioning.
"""

import logging
from typing import Sequence, Tuple

import numpy as np

from probewatch.constants import SPLIT_RATIOS
from probewatch.dataset.table import FeatureTable
from probewatch.errors import ArgumentError, ClassTooSmallError

logger = logging.getLogger(__name__)


def split_sizes(n: int, ratios: Sequence[float]) -> Tuple[int, int, int]:
    n_train = int(round(ratios[0] * n))
    n_val = min(int(round(ratios[1] * n)), n - n_train)
    return n_train, n_val, n - n_train - n_val


def split(
    t: FeatureTable,
    ratios: Sequence[float] = SPLIT_RATIOS,
    seed: int = 0,
    stratify: bool = True,
) -> Tuple[FeatureTable, FeatureTable, FeatureTable]:
    """
    Partitions a labelled table into disjoint train, validation and test tables.

    With ``stratify`` each class is split on its own so that per-class sizes are
    within one row of the exact ratios. Rows keep their table order inside each
    partition.

    Args:
        t (FeatureTable): A labelled table.
        ratios (Sequence[float], optional): Three fractions summing to 1.
        seed (int, optional): Shuffle seed. Defaults to 0.
        stratify (bool, optional): Split per class. Defaults to True.

    Returns:
        Tuple[FeatureTable, FeatureTable, FeatureTable]: (train, val, test).

    Raises:
        ClassTooSmallError: If a class has fewer than 3 rows.
    """
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9 or min(ratios) < 0:
        raise ArgumentError(
            f"ratios must be three non-negative fractions summing to 1, got {ratios}"
        )
    labels = t.require_labels()
    for c in (0, 1):
        count = int(np.sum(labels == c))
        if count < 3:
            raise ClassTooSmallError(f"class {c} has {count} rows, 3 are needed")
    rng = np.random.default_rng(seed)
    if stratify:
        strata = [np.flatnonzero(labels == c) for c in (0, 1)]
    else:
        strata = [np.arange(t.n_rows)]
    parts = ([], [], [])
    for rows in strata:
        rows = rng.permutation(rows)
        n_train, n_val, _ = split_sizes(len(rows), ratios)
        parts[0].append(rows[:n_train])
        parts[1].append(rows[n_train : n_train + n_val])
        parts[2].append(rows[n_train + n_val :])
    train, val, test = (t.take(np.sort(np.concatenate(p))) for p in parts)
    logger.info(
        "split %d rows into %d/%d/%d", t.n_rows, train.n_rows, val.n_rows, test.n_rows
    )
    return train, val, test
