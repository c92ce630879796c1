"""
Kernel support vector machine trained by sequential minimal optimization,
with Platt-scaled probabilities.
"""

import logging

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import expit

from probewatch.errors import ArgumentError
from probewatch.learners.base import Learner, LearnerKind, proba_columns

logger = logging.getLogger(__name__)

_TAU = 1e-12


def kernel_matrix(
    A, B, kernel: str, gamma: float, degree: float, coef0: float
) -> np.ndarray:
    """
    Gram matrix between the rows of ``A`` and ``B``.

    The polynomial kernel raises a negative base to a non-integer degree with
    its sign preserved.
    """
    if kernel == "rbf":
        return np.exp(-gamma * cdist(A, B, metric="sqeuclidean"))
    if kernel == "linear":
        return A @ B.T
    base = gamma * (A @ B.T) + coef0
    if float(degree).is_integer():
        return base ** int(degree)
    return np.sign(base) * np.abs(base) ** degree


class SVM(Learner):
    """
    Soft-margin kernel SVM.

    The dual is solved by SMO with maximal-violating-pair working-set
    selection; iteration stops when the KKT violation drops below ``tol`` or
    after ``max_passes * n`` updates, in which case ``converged`` is False.
    Probabilities come from a sigmoid fitted to the training decision values.
    """

    kind = LearnerKind.SVM
    defaults = {
        "C": 47.0,
        "kernel": "rbf",
        "gamma": 1.64,
        "degree": 3.0,
        "coef0": 0.0,
        "tol": 1e-3,
        "max_passes": 100,
    }

    def _validate(self):
        p = self.params
        if not p["C"] > 0:
            raise ArgumentError("C must be positive")
        if not p["gamma"] > 0:
            raise ArgumentError("gamma must be positive")
        if p["kernel"] not in ("rbf", "poly", "linear"):
            raise ArgumentError("kernel must be 'rbf', 'poly' or 'linear'")

    def _kernel(self, A, B):
        p = self.params
        return kernel_matrix(A, B, p["kernel"], p["gamma"], p["degree"], p["coef0"])

    def _fit(self, X, y):
        C = float(self.params["C"])
        n = len(y)
        s = np.where(y == 1, 1.0, -1.0)
        Q = self._kernel(X, X) * np.outer(s, s)
        alpha = np.zeros(n)
        G = -np.ones(n)
        tol = self.params["tol"]
        limit = self.params["max_passes"] * max(n, 1)
        self.converged = False
        self.n_iter = 0
        while self.n_iter < limit:
            up = ((s > 0) & (alpha < C)) | ((s < 0) & (alpha > 0))
            low = ((s > 0) & (alpha > 0)) | ((s < 0) & (alpha < C))
            score = -s * G
            if not up.any() or not low.any():
                self.converged = True
                break
            i = int(np.flatnonzero(up)[np.argmax(score[up])])
            j = int(np.flatnonzero(low)[np.argmin(score[low])])
            if score[i] - score[j] < tol:
                self.converged = True
                break
            old_i, old_j = alpha[i], alpha[j]
            if s[i] != s[j]:
                quad = max(Q[i, i] + Q[j, j] + 2.0 * Q[i, j], _TAU)
                delta = (-G[i] - G[j]) / quad
                diff = alpha[i] - alpha[j]
                alpha[i] += delta
                alpha[j] += delta
                if diff > 0:
                    if alpha[j] < 0:
                        alpha[j], alpha[i] = 0.0, diff
                elif alpha[i] < 0:
                    alpha[i], alpha[j] = 0.0, -diff
                if diff > 0:
                    if alpha[i] > C:
                        alpha[i], alpha[j] = C, C - diff
                elif alpha[j] > C:
                    alpha[j], alpha[i] = C, C + diff
            else:
                quad = max(Q[i, i] + Q[j, j] - 2.0 * Q[i, j], _TAU)
                delta = (G[i] - G[j]) / quad
                total = alpha[i] + alpha[j]
                alpha[i] -= delta
                alpha[j] += delta
                if total > C:
                    if alpha[i] > C:
                        alpha[i], alpha[j] = C, total - C
                elif alpha[j] < 0:
                    alpha[j], alpha[i] = 0.0, total
                if total > C:
                    if alpha[j] > C:
                        alpha[j], alpha[i] = C, total - C
                elif alpha[i] < 0:
                    alpha[i], alpha[j] = 0.0, total
            G += Q[:, i] * (alpha[i] - old_i) + Q[:, j] * (alpha[j] - old_j)
            self.n_iter += 1
        if not self.converged:
            logger.warning(
                "SMO stopped after %d updates without meeting tol", self.n_iter
            )

        self.rho_ = self._rho(alpha, G, s, C)
        support = alpha > 0
        self.alpha_ = alpha
        self.support_vectors_ = X[support]
        self.dual_coef_ = (alpha * s)[support]
        self._fit_platt(self.decision_function(X), y)

    @staticmethod
    def _rho(alpha, G, s, C) -> float:
        yG = s * G
        free = (alpha > 0) & (alpha < C)
        if free.any():
            return float(np.mean(yG[free]))
        at_upper = alpha >= C
        at_lower = alpha <= 0
        ub_mask = ((s > 0) & at_lower) | ((s < 0) & at_upper)
        lb_mask = ((s > 0) & at_upper) | ((s < 0) & at_lower)
        ub = yG[ub_mask].min() if ub_mask.any() else np.inf
        lb = yG[lb_mask].max() if lb_mask.any() else -np.inf
        if np.isinf(ub) or np.isinf(lb):
            return float(ub if np.isfinite(ub) else lb if np.isfinite(lb) else 0.0)
        return float((ub + lb) / 2.0)

    def _fit_platt(self, f: np.ndarray, y: np.ndarray, max_iter: int = 100):
        """Newton fit of P(y=1|f) = 1 / (1 + exp(A f + B)) with smoothed targets."""
        n_pos = float(np.sum(y == 1))
        n_neg = float(len(y) - n_pos)
        t = np.where(y == 1, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))
        A, B = 0.0, np.log((n_neg + 1.0) / (n_pos + 1.0))
        sigma, eps = 1e-12, 1e-5

        def objective(a, b):
            z = f * a + b
            return float(np.sum(t * z + np.logaddexp(0.0, -z)))

        fval = objective(A, B)
        for _ in range(max_iter):
            p = expit(-(f * A + B))
            q = 1.0 - p
            d2 = p * q
            h11 = sigma + np.dot(f * f, d2)
            h22 = sigma + np.sum(d2)
            h21 = np.dot(f, d2)
            d1 = t - p
            g1, g2 = np.dot(f, d1), np.sum(d1)
            if abs(g1) < eps and abs(g2) < eps:
                break
            det = h11 * h22 - h21 * h21
            dA = -(h22 * g1 - h21 * g2) / det
            dB = -(-h21 * g1 + h11 * g2) / det
            gd = g1 * dA + g2 * dB
            step = 1.0
            while step >= 1e-10:
                newA, newB = A + step * dA, B + step * dB
                newf = objective(newA, newB)
                if newf < fval + 1e-4 * step * gd:
                    A, B, fval = newA, newB, newf
                    break
                step /= 2.0
            else:
                break
        self.platt_a_, self.platt_b_ = float(A), float(B)

    def decision_function(self, X):
        if len(self.support_vectors_) == 0:
            return np.full(len(X), -self.rho_)
        return self._kernel(X, self.support_vectors_) @ self.dual_coef_ - self.rho_

    def _predict_proba(self, X):
        margin = self.decision_function(X)
        return proba_columns(expit(-(margin * self.platt_a_ + self.platt_b_)))

    def _state(self):
        return {
            "support_vectors": self.support_vectors_,
            "dual_coef": self.dual_coef_,
            "rho": self.rho_,
            "platt_a": self.platt_a_,
            "platt_b": self.platt_b_,
            "converged": self.converged,
            "n_iter": self.n_iter,
        }

    def _load(self, state):
        vectors = np.asarray(state["support_vectors"], dtype=float)
        self.support_vectors_ = vectors.reshape(-1, self.n_features)
        self.dual_coef_ = np.asarray(state["dual_coef"], dtype=float)
        self.rho_ = float(state["rho"])
        self.platt_a_ = float(state["platt_a"])
        self.platt_b_ = float(state["platt_b"])
        self.converged = bool(state["converged"])
        self.n_iter = int(state["n_iter"])


def fit_svm(
    X,
    y,
    C=47.0,
    kernel="rbf",
    gamma=1.64,
    degree=3.0,
    tol=1e-3,
    max_passes=100,
    feature_names=None,
):
    svm = SVM(
        C=C, kernel=kernel, gamma=gamma, degree=degree, tol=tol, max_passes=max_passes
    )
    return svm.fit(X, y, feature_names)
