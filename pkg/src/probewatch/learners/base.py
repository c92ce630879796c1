"""
Base class and specification type shared by every learner.
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, ClassVar, Dict, List, Optional, Sequence

import numpy as np

from probewatch.errors import ArgumentError, EmptyMaskError, SchemaMismatchError

logger = logging.getLogger(__name__)


class LearnerKind(str, Enum):
    GNB = "gnb"
    LOGREG = "logreg"
    KNN = "knn"
    SVM = "svm"
    TREE = "tree"
    FOREST = "forest"
    XTREES = "xtrees"


@dataclass
class LearnerSpec:
    """
    A learner kind plus its hyperparameters.

    Attributes:
        kind (LearnerKind): Learner family.
        params (Dict[str, Any]): Hyperparameters; unspecified ones take the kind's defaults.
    """

    kind: LearnerKind
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.kind = LearnerKind(self.kind)

    def with_params(self, **params) -> "LearnerSpec":
        return LearnerSpec(self.kind, {**self.params, **params})

    def to_dict(self) -> Dict:
        return {"kind": self.kind.value, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, d: Dict) -> "LearnerSpec":
        return cls(LearnerKind(d["kind"]), dict(d.get("params", {})))


class Learner(ABC):
    """
    Abstract binary classifier with probability outputs.

    Subclasses set ``kind`` and ``defaults`` and implement ``_fit``,
    ``_predict_proba``, ``_state`` and ``_load``. Training data with a single
    class yields a constant predictor and a warning.

    Args:
        **params: Hyperparameters overriding ``defaults``.
    """

    kind: ClassVar[LearnerKind]
    defaults: ClassVar[Dict[str, Any]] = {}
    stochastic: ClassVar[bool] = False

    def __init__(self, **params):
        unknown = set(params) - set(self.defaults)
        if unknown:
            raise ArgumentError(
                f"unknown {self.kind.value} hyperparameters {sorted(unknown)}"
            )
        self.params: Dict[str, Any] = {**self.defaults, **params}
        self._validate()
        self.feature_names: Optional[List[str]] = None
        self.constant_class: Optional[int] = None
        self.fitted = False

    @property
    def spec(self) -> LearnerSpec:
        return LearnerSpec(self.kind, dict(self.params))

    @property
    def n_features(self) -> int:
        return len(self.feature_names or [])

    def _validate(self):
        """Checks hyperparameter domains."""

    def _check_data(self, X: np.ndarray, y: np.ndarray):
        """Checks training data before fitting."""

    def fit(self, X, y, feature_names: Optional[Sequence[str]] = None) -> "Learner":
        """
        Fits the learner.

        Args:
            X: Training matrix, shape (n, d).
            y: Binary labels, shape (n,).
            feature_names (Sequence[str], optional): Column names; defaults to ``x0..x{d-1}``.

        Returns:
            Learner: self.
        """
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=np.int64).reshape(-1)
        if X.ndim != 2 or len(X) != len(y):
            raise SchemaMismatchError(
                f"X of shape {X.shape} does not match {len(y)} labels"
            )
        if len(y) == 0:
            raise ArgumentError("cannot fit on zero rows")
        if X.shape[1] == 0:
            raise EmptyMaskError("cannot fit on zero feature columns")
        if not np.isin(y, (0, 1)).all():
            raise ArgumentError("labels must be 0 or 1")
        if feature_names is None:
            feature_names = [f"x{i}" for i in range(X.shape[1])]
        self.feature_names = list(feature_names)
        if len(self.feature_names) != X.shape[1]:
            raise SchemaMismatchError("feature_names do not match the column count")
        self._check_data(X, y)
        classes = np.unique(y)
        if len(classes) == 1:
            logger.warning(
                "%s trained on a single class (%d); predicting it constantly",
                self.kind.value,
                classes[0],
            )
            self.constant_class = int(classes[0])
        else:
            self.constant_class = None
            self._fit(X, y)
        self.fitted = True
        return self

    def _prepare(self, X, feature_names: Optional[Sequence[str]]) -> np.ndarray:
        if not self.fitted:
            raise RuntimeError(f"{self.kind.value} learner is not fitted")
        if feature_names is not None and list(feature_names) != self.feature_names:
            raise SchemaMismatchError(
                "input features differ from the training features"
            )
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise SchemaMismatchError(
                f"expected {self.n_features} features, got shape {X.shape}"
            )
        return X

    def predict_proba(
        self, X, feature_names: Optional[Sequence[str]] = None
    ) -> np.ndarray:
        """
        Class probabilities.

        Args:
            X: Matrix of shape (n, d).
            feature_names (Sequence[str], optional): Checked against the training names.

        Returns:
            np.ndarray: Shape (n, 2); column 1 is the probing probability.

        Raises:
            SchemaMismatchError: If the input does not match the training schema.
        """
        X = self._prepare(X, feature_names)
        if self.constant_class is not None:
            proba = np.zeros((len(X), 2))
            proba[:, self.constant_class] = 1.0
            return proba
        return self._predict_proba(X)

    def predict(self, X, threshold: float = 0.5, feature_names=None) -> np.ndarray:
        proba = self.predict_proba(X, feature_names)[:, 1]
        return (proba >= threshold).astype(np.int64)

    def fit_table(self, table, names: Optional[Sequence[str]] = None) -> "Learner":
        """Fits on the columns ``names`` (all by default) of a labelled FeatureTable."""
        names = table.names if names is None else list(names)
        return self.fit(table.matrix(names), table.require_labels(), names)

    def predict_proba_table(self, table) -> np.ndarray:
        return self.predict_proba(table.matrix(self.feature_names), self.feature_names)

    @abstractmethod
    def _fit(self, X: np.ndarray, y: np.ndarray):
        """Fits on two-class data."""

    @abstractmethod
    def _predict_proba(self, X: np.ndarray) -> np.ndarray:
        """Probabilities of shape (n, 2) for a fitted two-class model."""

    @abstractmethod
    def _state(self) -> Dict[str, Any]:
        """Fitted parameters as JSON-ready values."""

    @abstractmethod
    def _load(self, state: Dict[str, Any]):
        """Restores fitted parameters from ``_state`` output."""

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind.value,
            "params": dict(self.params),
            "features": self.feature_names,
            "constant_class": self.constant_class,
            "state": (
                self._state() if self.fitted and self.constant_class is None else None
            ),
        }

    def restore(self, d: Dict[str, Any]) -> "Learner":
        self.feature_names = list(d["features"])
        self.constant_class = d.get("constant_class")
        if d.get("state") is not None:
            self._load(d["state"])
        self.fitted = True
        return self


def proba_columns(p1: np.ndarray) -> np.ndarray:
    """Stacks P(class 1) into an (n, 2) probability matrix."""
    p1 = np.clip(np.asarray(p1, dtype=float), 0.0, 1.0)
    return np.column_stack([1.0 - p1, p1])
