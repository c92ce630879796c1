"""
Brute-force k-nearest neighbours.
"""

import numpy as np
from scipy.spatial.distance import cdist

from probewatch.errors import ArgumentError, KTooLargeError
from probewatch.learners.base import Learner, LearnerKind, proba_columns

_BLOCK_CELLS = 4_000_000


class KNeighbors(Learner):
    """
    k-nearest neighbours with Minkowski-``p`` distance.

    Neighbour ties on distance go to the earlier training row. With
    ``weights="distance"`` votes weigh ``1/d``; a query that exactly matches
    training rows among its neighbours takes their labels only. ``leaf_size``
    is recorded and unused.
    """

    kind = LearnerKind.KNN
    defaults = {"k": 3, "p": 1.0, "weights": "distance", "leaf_size": 30}

    def _validate(self):
        if self.params["k"] < 1:
            raise ArgumentError("k must be >= 1")
        if self.params["p"] < 1:
            raise ArgumentError("p must be >= 1")
        if self.params["weights"] not in ("distance", "uniform"):
            raise ArgumentError("weights must be 'distance' or 'uniform'")

    def _check_data(self, X, y):
        if self.params["k"] > len(X):
            raise KTooLargeError(f"k={self.params['k']} exceeds {len(X)} training rows")

    def _fit(self, X, y):
        self.X_ = X.copy()
        self.y_ = y.astype(float)

    def kneighbors(self, X):
        """Distances and indices of the ``k`` nearest training rows per query."""
        k = self.params["k"]
        block = max(1, _BLOCK_CELLS // max(1, len(self.X_)))
        dist = np.empty((len(X), k))
        idx = np.empty((len(X), k), dtype=np.int64)
        for start in range(0, len(X), block):
            rows = X[start : start + block]
            d = cdist(rows, self.X_, metric="minkowski", p=self.params["p"])
            order = np.argsort(d, axis=1, kind="stable")[:, :k]
            idx[start : start + block] = order
            dist[start : start + block] = np.take_along_axis(d, order, axis=1)
        return dist, idx

    def _predict_proba(self, X):
        dist, idx = self.kneighbors(X)
        votes = self.y_[idx]
        if self.params["weights"] == "uniform":
            return proba_columns(votes.mean(axis=1))
        exact = dist == 0
        with np.errstate(divide="ignore"):
            weights = np.where(
                exact.any(axis=1, keepdims=True), exact.astype(float), 1.0 / dist
            )
        return proba_columns((weights * votes).sum(axis=1) / weights.sum(axis=1))

    def _state(self):
        return {"X": self.X_, "y": self.y_}

    def _load(self, state):
        self.X_ = np.asarray(state["X"], dtype=float).reshape(-1, self.n_features)
        self.y_ = np.asarray(state["y"], dtype=float)


def fit_knn(X, y, k=3, p=1.0, weights="distance", feature_names=None) -> KNeighbors:
    return KNeighbors(k=k, p=p, weights=weights).fit(X, y, feature_names)
