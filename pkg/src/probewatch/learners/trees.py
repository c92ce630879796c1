"""
Gini decision trees, random forests and extremely randomized trees.
"""

import logging
from typing import List, Optional, Tuple

import numpy as np
from joblib import Parallel, delayed

from probewatch.errors import ArgumentError
from probewatch.learners.base import Learner, LearnerKind, proba_columns

logger = logging.getLogger(__name__)


def _resolve_max_features(max_features, d: int) -> int:
    if max_features is None:
        return d
    if max_features == "sqrt":
        return max(1, int(np.sqrt(d)))
    if isinstance(max_features, float):
        return max(1, int(np.ceil(max_features * d)))
    return max(1, min(int(max_features), d))


def _gini(pos: np.ndarray, total: np.ndarray) -> np.ndarray:
    p = pos / total
    return 2.0 * p * (1.0 - p)


class TreeBuilder:
    """
    Grows one CART tree on two-class data.

    Args:
        max_depth (int, optional): Depth limit; None grows until leaves are pure.
        min_leaf (int): Minimum rows per leaf.
        max_features (int): Non-constant features to examine per split.
        random_thresholds (bool): Draw one uniform threshold per feature instead
            of searching every boundary.
        rng (np.random.Generator): Source of feature orders and thresholds.
    """

    def __init__(self, max_depth, min_leaf, max_features, random_thresholds, rng):
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.max_features = max_features
        self.random_thresholds = random_thresholds
        self.rng = rng

    def _best_exhaustive(
        self, x: np.ndarray, y: np.ndarray
    ) -> Optional[Tuple[float, float]]:
        order = np.argsort(x, kind="stable")
        xs, ys = x[order], y[order]
        n = len(xs)
        left_n = np.arange(1, n, dtype=float)
        left_pos = np.cumsum(ys)[:-1].astype(float)
        right_n = n - left_n
        right_pos = ys.sum() - left_pos
        valid = xs[1:] != xs[:-1]
        valid &= (left_n >= self.min_leaf) & (right_n >= self.min_leaf)
        if not valid.any():
            return None
        impurity = (
            left_n * _gini(left_pos, left_n) + right_n * _gini(right_pos, right_n)
        ) / n
        impurity = np.where(valid, impurity, np.inf)
        k = int(np.argmin(impurity))
        return float(impurity[k]), float((xs[k] + xs[k + 1]) / 2.0)

    def _best_random(
        self, x: np.ndarray, y: np.ndarray
    ) -> Optional[Tuple[float, float]]:
        low, high = float(x.min()), float(x.max())
        threshold = float(self.rng.uniform(low, high))
        if threshold >= high:
            threshold = low
        left = x <= threshold
        n, n_left = len(x), int(left.sum())
        if n_left < self.min_leaf or n - n_left < self.min_leaf:
            return None
        pos_left = float(y[left].sum())
        pos_right = float(y.sum()) - pos_left
        n_right = n - n_left
        impurity = (
            n_left * _gini(pos_left, n_left) + n_right * _gini(pos_right, n_right)
        ) / n
        return float(impurity), threshold

    def _split(self, X: np.ndarray, y: np.ndarray):
        d = X.shape[1]
        best = None
        examined = 0
        for f in self.rng.permutation(d):
            x = X[:, f]
            if x.min() == x.max():
                continue
            examined += 1
            if self.random_thresholds:
                found = self._best_random(x, y)
            else:
                found = self._best_exhaustive(x, y)
            if found is not None and (best is None or found[0] < best[0]):
                best = (found[0], int(f), found[1])
            if examined >= self.max_features:
                break
        return best

    def build(self, X: np.ndarray, y: np.ndarray) -> "TreeArrays":
        features: List[int] = []
        thresholds: List[float] = []
        left: List[int] = []
        right: List[int] = []
        values: List[float] = []
        importances = np.zeros(X.shape[1])
        n_total = len(y)

        def new_node() -> int:
            features.append(-1)
            thresholds.append(0.0)
            left.append(-1)
            right.append(-1)
            values.append(0.0)
            return len(features) - 1

        root = new_node()
        stack = [(root, np.arange(n_total), 0)]
        while stack:
            node, rows, depth = stack.pop()
            ys = y[rows]
            values[node] = float(ys.mean())
            impurity = float(_gini(ys.sum(), len(ys)))
            if (
                impurity == 0.0
                or len(rows) < 2 * self.min_leaf
                or (self.max_depth is not None and depth >= self.max_depth)
            ):
                continue
            best = self._split(X[rows], ys)
            if best is None or best[0] >= impurity:
                continue
            child_impurity, f, threshold = best
            go_left = X[rows, f] <= threshold
            importances[f] += len(rows) / n_total * (impurity - child_impurity)
            features[node], thresholds[node] = f, threshold
            left[node], right[node] = new_node(), new_node()
            stack.append((right[node], rows[~go_left], depth + 1))
            stack.append((left[node], rows[go_left], depth + 1))
        return TreeArrays(
            np.array(features, dtype=np.int64),
            np.array(thresholds),
            np.array(left, dtype=np.int64),
            np.array(right, dtype=np.int64),
            np.array(values),
            importances,
        )


class TreeArrays:
    """Flat node arrays of a fitted tree; ``feature == -1`` marks a leaf."""

    def __init__(self, feature, threshold, left, right, value, importances):
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right
        self.value = value
        total = importances.sum()
        self.importances = importances / total if total > 0 else importances

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            cur = node[idx]
            go_left = X[idx, self.feature[cur]] <= self.threshold[cur]
            node[idx] = np.where(go_left, self.left[cur], self.right[cur])
            active = self.feature[node] >= 0
        return self.value[node]

    def to_dict(self):
        return {
            "feature": self.feature,
            "threshold": self.threshold,
            "left": self.left,
            "right": self.right,
            "value": self.value,
            "importances": self.importances,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            np.asarray(d["feature"], dtype=np.int64),
            np.asarray(d["threshold"], dtype=float),
            np.asarray(d["left"], dtype=np.int64),
            np.asarray(d["right"], dtype=np.int64),
            np.asarray(d["value"], dtype=float),
            np.asarray(d["importances"], dtype=float),
        )


def _grow(
    X, y, seed_seq, bootstrap, max_depth, min_leaf, max_features, random_thresholds
):
    rng = np.random.default_rng(seed_seq)
    if bootstrap:
        rows = rng.integers(0, len(y), size=len(y))
        X, y = X[rows], y[rows]
    builder = TreeBuilder(max_depth, min_leaf, max_features, random_thresholds, rng)
    return builder.build(X, y)


class _TreeEnsemble(Learner):
    """Shared fitting and prediction of tree-based learners."""

    stochastic = True
    bootstrap = False
    random_thresholds = False

    def _validate(self):
        if self.params["n_trees"] < 1:
            raise ArgumentError("n_trees must be >= 1")
        if self.params["min_leaf"] < 1:
            raise ArgumentError("min_leaf must be >= 1")

    def _fit(self, X, y):
        p = self.params
        max_features = _resolve_max_features(p["max_features"], X.shape[1])
        seeds = np.random.SeedSequence(p["seed"]).spawn(p["n_trees"])
        self.trees_ = Parallel(n_jobs=p.get("n_jobs", 1))(
            delayed(_grow)(
                X,
                y,
                s,
                self.bootstrap,
                p["max_depth"],
                p["min_leaf"],
                max_features,
                self.random_thresholds,
            )
            for s in seeds
        )
        logger.debug("grew %d %s trees", len(self.trees_), self.kind.value)

    @property
    def feature_importances_(self) -> np.ndarray:
        if self.constant_class is not None:
            return np.zeros(self.n_features)
        mean = np.mean([t.importances for t in self.trees_], axis=0)
        total = mean.sum()
        return mean / total if total > 0 else mean

    def tree_probabilities(self, X) -> np.ndarray:
        """Per-tree probing probabilities, shape (n_trees, n)."""
        X = self._prepare(X, None)
        if self.constant_class is not None:
            return np.full((self.params["n_trees"], len(X)), float(self.constant_class))
        return np.array([t.predict(X) for t in self.trees_])

    def _predict_proba(self, X):
        return proba_columns(np.mean([t.predict(X) for t in self.trees_], axis=0))

    def _state(self):
        return {"trees": [t.to_dict() for t in self.trees_]}

    def _load(self, state):
        self.trees_ = [TreeArrays.from_dict(t) for t in state["trees"]]


_TREE_DEFAULTS = {"max_depth": None, "min_leaf": 1, "seed": 0, "n_jobs": 1}


class DecisionTree(_TreeEnsemble):
    """A single CART tree examining every feature at each split."""

    kind = LearnerKind.TREE
    defaults = {**_TREE_DEFAULTS, "n_trees": 1, "max_features": None}


class RandomForest(_TreeEnsemble):
    """Bootstrap trees with sqrt(d) features examined per split."""

    kind = LearnerKind.FOREST
    bootstrap = True
    defaults = {**_TREE_DEFAULTS, "n_trees": 100, "max_features": "sqrt"}


class ExtraTrees(_TreeEnsemble):
    """Trees on the full sample, one random threshold per candidate feature."""

    kind = LearnerKind.XTREES
    random_thresholds = True
    defaults = {**_TREE_DEFAULTS, "n_trees": 100, "max_features": "sqrt"}


def fit_tree(
    X, y, max_depth=None, min_leaf=1, seed=0, feature_names=None
) -> DecisionTree:
    tree = DecisionTree(max_depth=max_depth, min_leaf=min_leaf, seed=seed)
    return tree.fit(X, y, feature_names)


def fit_forest(
    X,
    y,
    n_trees=100,
    max_depth=None,
    min_leaf=1,
    seed=0,
    n_jobs=1,
    feature_names=None,
) -> RandomForest:
    model = RandomForest(
        n_trees=n_trees,
        max_depth=max_depth,
        min_leaf=min_leaf,
        seed=seed,
        n_jobs=n_jobs,
    )
    return model.fit(X, y, feature_names)


def fit_xtrees(
    X,
    y,
    n_trees=100,
    max_depth=None,
    min_leaf=1,
    seed=0,
    n_jobs=1,
    feature_names=None,
) -> ExtraTrees:
    model = ExtraTrees(
        n_trees=n_trees,
        max_depth=max_depth,
        min_leaf=min_leaf,
        seed=seed,
        n_jobs=n_jobs,
    )
    return model.fit(X, y, feature_names)
