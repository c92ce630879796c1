"""
Gaussian naive Bayes.
"""

import numpy as np
from scipy.special import logsumexp

from probewatch.errors import ArgumentError
from probewatch.learners.base import Learner, LearnerKind


class GaussianNB(Learner):
    """
    Gaussian naive Bayes with per-class feature means and variances.

    Variances are floored at ``variance_smoothing`` times the largest feature
    variance of the training data. Posteriors are computed in log space.
    """

    kind = LearnerKind.GNB
    defaults = {"variance_smoothing": 1e-9}

    def _validate(self):
        if not self.params["variance_smoothing"] > 0:
            raise ArgumentError("variance_smoothing must be positive")

    def _fit(self, X, y):
        largest = float(np.var(X, axis=0).max()) if X.shape[1] else 0.0
        floor = self.params["variance_smoothing"] * largest
        if floor <= 0:
            floor = self.params["variance_smoothing"]
        self.theta_ = np.vstack([X[y == c].mean(axis=0) for c in (0, 1)])
        var = np.vstack([X[y == c].var(axis=0) for c in (0, 1)])
        self.var_ = np.maximum(var, floor)
        self.log_prior_ = np.log(np.array([np.mean(y == 0), np.mean(y == 1)]))

    def joint_log_likelihood(self, X: np.ndarray) -> np.ndarray:
        out = np.empty((len(X), 2))
        for c in (0, 1):
            out[:, c] = (
                self.log_prior_[c]
                - 0.5 * np.sum(np.log(2.0 * np.pi * self.var_[c]))
                - 0.5 * np.sum((X - self.theta_[c]) ** 2 / self.var_[c], axis=1)
            )
        return out

    def _predict_proba(self, X):
        jll = self.joint_log_likelihood(X)
        return np.exp(jll - logsumexp(jll, axis=1, keepdims=True))

    def _state(self):
        return {"theta": self.theta_, "var": self.var_, "log_prior": self.log_prior_}

    def _load(self, state):
        self.theta_ = np.asarray(state["theta"], dtype=float)
        self.var_ = np.asarray(state["var"], dtype=float)
        self.log_prior_ = np.asarray(state["log_prior"], dtype=float)


def fit_gnb(X, y, variance_smoothing: float = 1e-9, feature_names=None) -> GaussianNB:
    return GaussianNB(variance_smoothing=variance_smoothing).fit(X, y, feature_names)
