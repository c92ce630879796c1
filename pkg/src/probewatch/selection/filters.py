"""
Filter-stage feature scorers and the correlation pruning pass.

Every scorer takes a labelled table of numeric (or one-hot binary) columns and
returns one score per column, keyed by column name.
"""

import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from probewatch.constants import (
    FILTER_TOP_K,
    PRUNE_THRESHOLD,
    TARGET_CORRELATION_THRESHOLD,
)
from probewatch.dataset.table import FeatureTable
from probewatch.errors import ArgumentError, OneClassOnlyError
from probewatch.learners.trees import ExtraTrees
from probewatch.selection.report import (
    FeatureSubset,
    PrunedPair,
    SelectionReport,
    SelectionStage,
    ordered_union,
)

logger = logging.getLogger(__name__)

Scores = Dict[str, float]


def _xy(
    train: FeatureTable, names: Optional[Sequence[str]] = None
) -> Tuple[np.ndarray, np.ndarray, List[str]]:
    names = train.names if names is None else list(names)
    return train.matrix(names), train.require_labels().astype(float), names


def _standardized(X: np.ndarray) -> np.ndarray:
    centred = X - X.mean(axis=0)
    norm = np.sqrt((centred**2).sum(axis=0))
    out = np.zeros_like(centred)
    nz = norm > 0
    out[:, nz] = centred[:, nz] / norm[nz]
    return out


def target_correlations(
    train: FeatureTable, names: Optional[Sequence[str]] = None
) -> Scores:
    """Pearson correlation of each column with the label, 0 for constant columns."""
    X, y, names = _xy(train, names)
    Z = _standardized(X)
    zy = _standardized(y.reshape(-1, 1))[:, 0]
    corr = np.clip(Z.T @ zy, -1.0, 1.0)
    return {name: float(c) for name, c in zip(names, corr)}


def target_correlation_select(
    train: FeatureTable, threshold: float = TARGET_CORRELATION_THRESHOLD
) -> FeatureSubset:
    """Keeps columns correlated with the label by at least ``threshold`` either way."""
    corr = target_correlations(train)
    kept = [n for n in train.names if abs(corr[n]) >= threshold]
    return FeatureSubset(kept, SelectionStage.FILTER)


def chi_square_scores(train: FeatureTable) -> Scores:
    """
    Chi-square statistic of each column against the label.

    Columns are min-max scaled to [0, 1] first. For class ``c`` the observed
    count is the column sum over that class's rows and the expected count the
    class share of the column total. A column summing to zero scores 0.
    """
    X, y, names = _xy(train)
    if not len(X):
        return {name: 0.0 for name in names}
    lo = X.min(axis=0)
    span = X.max(axis=0) - lo
    scaled = np.zeros_like(X)
    nz = span > 0
    scaled[:, nz] = (X[:, nz] - lo[nz]) / span[nz]

    total = scaled.sum(axis=0)
    score = np.zeros(X.shape[1])
    n = len(y)
    for c in (0.0, 1.0):
        rows = y == c
        if not rows.any():
            continue
        observed = scaled[rows].sum(axis=0)
        expected = rows.sum() / n * total
        ok = expected > 0
        score[ok] += (observed[ok] - expected[ok]) ** 2 / expected[ok]
    return {name: float(s) for name, s in zip(names, score)}


def anova_f_scores(train: FeatureTable) -> Scores:
    """
    One-way ANOVA F statistic of each column across the two classes.

    A column with zero within-class variance scores +inf when its class
    means differ and 0 when they do not.

    Raises:
        OneClassOnlyError: If the labels hold a single class.
    """
    X, y, names = _xy(train)
    groups = [X[y == c] for c in (0.0, 1.0)]
    if any(len(g) == 0 for g in groups):
        raise OneClassOnlyError("ANOVA F needs both classes")
    n = len(y)
    if n <= 2:
        raise ArgumentError("ANOVA F needs more rows than classes")
    grand = X.mean(axis=0)
    between = sum(len(g) * (g.mean(axis=0) - grand) ** 2 for g in groups)
    within = sum(((g - g.mean(axis=0)) ** 2).sum(axis=0) for g in groups)
    ms_between = between  # one degree of freedom for two classes
    ms_within = within / (n - 2)
    f = np.zeros(X.shape[1])
    spread = ms_within > 0
    f[spread] = ms_between[spread] / ms_within[spread]
    f[~spread & (ms_between > 0)] = np.inf
    return {name: float(v) for name, v in zip(names, f)}


def tree_importance_scores(
    train: FeatureTable, n_trees: int = 100, seed: int = 0, n_jobs: int = 1
) -> Scores:
    """Mean impurity decrease of each column across an extremely randomized forest."""
    X, y, names = _xy(train)
    model = ExtraTrees(n_trees=n_trees, seed=seed, n_jobs=n_jobs)
    model.fit(X, y.astype(np.int64), names)
    return {name: float(v) for name, v in zip(names, model.feature_importances_)}


def top_k(scores: Scores, k: int = FILTER_TOP_K) -> List[str]:
    """
    The ``k`` best-scoring columns, highest first.

    Equal scores keep their insertion order; +inf ranks above everything.
    """
    ranked = sorted(enumerate(scores.items()), key=lambda item: (-item[1][1], item[0]))
    return [name for _, (name, _) in ranked[:k]]


def filter_select(
    train: FeatureTable,
    k: int = FILTER_TOP_K,
    threshold: float = TARGET_CORRELATION_THRESHOLD,
    n_trees: int = 100,
    seed: int = 0,
    n_jobs: int = 1,
    report: Optional[SelectionReport] = None,
) -> FeatureSubset:
    """
    Union of the target-correlation, chi-square, ANOVA F and extra-trees selections.

    Args:
        train (FeatureTable): Labelled, encoded training table.
        k (int): Columns kept by each ranking scorer.
        threshold (float): Minimum absolute target correlation.
        n_trees (int): Forest size for the importance scorer.
        seed (int): Forest seed.
        n_jobs (int): Parallel tree fits.
        report (SelectionReport, optional): Receives scores, selections and the union.

    Returns:
        FeatureSubset: The union, in table column order.
    """
    corr = target_correlations(train)
    scores = {
        "target_correlation": corr,
        "chi_square": chi_square_scores(train),
        "anova_f": anova_f_scores(train),
        "extra_trees": tree_importance_scores(
            train, n_trees=n_trees, seed=seed, n_jobs=n_jobs
        ),
    }
    selected = {
        "target_correlation": [n for n in train.names if abs(corr[n]) >= threshold],
        "chi_square": top_k(scores["chi_square"], k),
        "anova_f": top_k(scores["anova_f"], k),
        "extra_trees": top_k(scores["extra_trees"], k),
    }
    union = ordered_union(train.names, list(selected.values()))
    logger.info(
        "filter stage kept %d of %d columns (%s)",
        len(union),
        train.n_cols,
        ", ".join(f"{name} {len(s)}" for name, s in selected.items()),
    )
    if report is not None:
        report.scores = scores
        report.selected = selected
        report.union = union
    return FeatureSubset(union, SelectionStage.FILTER)


def correlation_prune(
    train: FeatureTable,
    subset: Sequence[str],
    threshold: float = PRUNE_THRESHOLD,
    report: Optional[SelectionReport] = None,
) -> FeatureSubset:
    """
    Greedily removes one column of every pair correlated above ``threshold``.

    Pairs are visited in column order. Of a pair whose columns are both still
    present, the one with the lower absolute target correlation is dropped;
    on equal target correlation the later column goes.

    Args:
        train (FeatureTable): Labelled training table.
        subset (Sequence[str]): Candidate columns.
        threshold (float): Maximum absolute pairwise correlation to keep.
        report (SelectionReport, optional): Receives the resolved pairs.

    Returns:
        FeatureSubset: Surviving columns, pairwise correlated at most ``threshold``.
    """
    names = list(subset)
    missing = [n for n in names if n not in train.names]
    if missing:
        raise ArgumentError(f"subset names {missing} are not table columns")
    target = target_correlations(train, names)
    Z = _standardized(train.matrix(names))
    corr = np.clip(Z.T @ Z, -1.0, 1.0)
    alive = [True] * len(names)
    pairs: List[PrunedPair] = []
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            if not (alive[i] and alive[j]) or abs(corr[i, j]) <= threshold:
                continue
            drop = i if abs(target[names[i]]) < abs(target[names[j]]) else j
            keep = j if drop == i else i
            alive[drop] = False
            pairs.append(PrunedPair(names[keep], names[drop], float(corr[i, j])))
    survivors = [n for n, a in zip(names, alive) if a]
    logger.info("correlation pruning kept %d of %d columns", len(survivors), len(names))
    if report is not None:
        report.pruned_pairs = pairs
        report.pruned = survivors
    return FeatureSubset(survivors, SelectionStage.PRUNED)
