"""
Binary logistic regression fitted by full-batch gradient descent with a
backtracking line search.
"""

import logging

import numpy as np
from scipy.special import expit

from probewatch.errors import ArgumentError
from probewatch.learners.base import Learner, LearnerKind, proba_columns

logger = logging.getLogger(__name__)


class LogisticRegression(Learner):
    """
    Logistic regression on the mean log-loss.

    With ``penalty="l2"`` the objective adds ``||w||^2 / (2 C n)`` (intercept
    unpenalised); with ``penalty="none"`` ``C`` is ignored. Iteration stops when
    the gradient's max-norm reaches ``tol`` or after ``max_iter`` steps; the
    ``converged`` attribute records which.
    """

    kind = LearnerKind.LOGREG
    defaults = {"C": 190.0, "max_iter": 200, "tol": 1e-4, "penalty": "none"}

    def _validate(self):
        p = self.params
        if not p["C"] > 0:
            raise ArgumentError("C must be positive")
        if not p["tol"] > 0:
            raise ArgumentError("tol must be positive")
        if p["max_iter"] < 1:
            raise ArgumentError("max_iter must be >= 1")
        if p["penalty"] not in ("none", "l2"):
            raise ArgumentError("penalty must be 'none' or 'l2'")

    def _objective(self, w, Xb, s, lam):
        z = Xb @ w
        loss = np.mean(np.logaddexp(0.0, -s * z))
        grad = Xb.T @ (-s * expit(-s * z)) / len(s)
        if lam:
            loss += 0.5 * lam * np.dot(w[:-1], w[:-1])
            grad[:-1] += lam * w[:-1]
        return loss, grad

    def _fit(self, X, y):
        n = len(y)
        Xb = np.hstack([X, np.ones((n, 1))])
        s = np.where(y == 1, 1.0, -1.0)
        lam = 1.0 / (self.params["C"] * n) if self.params["penalty"] == "l2" else 0.0
        w = np.zeros(Xb.shape[1])
        loss, grad = self._objective(w, Xb, s, lam)
        tol, max_iter = self.params["tol"], self.params["max_iter"]
        step = 1.0
        self.n_iter = 0
        while np.max(np.abs(grad)) > tol and self.n_iter < max_iter:
            sq = float(np.dot(grad, grad))
            step = min(step * 2.0, 1e6)
            while True:
                candidate = w - step * grad
                new_loss, new_grad = self._objective(candidate, Xb, s, lam)
                if new_loss <= loss - 0.5 * step * sq:
                    break
                step *= 0.5
                if step < 1e-14:
                    break
            if step < 1e-14:
                break
            w, loss, grad = candidate, new_loss, new_grad
            self.n_iter += 1
        self.converged = bool(np.max(np.abs(grad)) <= tol)
        if not self.converged:
            logger.warning(
                "logistic regression stopped after %d iterations without reaching tol",
                self.n_iter,
            )
        self.coef_ = w[:-1]
        self.intercept_ = float(w[-1])

    def decision_function(self, X):
        return X @ self.coef_ + self.intercept_

    def _predict_proba(self, X):
        return proba_columns(expit(self.decision_function(X)))

    def _state(self):
        return {
            "coef": self.coef_,
            "intercept": self.intercept_,
            "converged": self.converged,
            "n_iter": self.n_iter,
        }

    def _load(self, state):
        self.coef_ = np.asarray(state["coef"], dtype=float)
        self.intercept_ = float(state["intercept"])
        self.converged = bool(state["converged"])
        self.n_iter = int(state["n_iter"])


def fit_logreg(
    X, y, C=190.0, max_iter=200, tol=1e-4, penalty="none", feature_names=None
):
    return LogisticRegression(C=C, max_iter=max_iter, tol=tol, penalty=penalty).fit(
        X, y, feature_names
    )
