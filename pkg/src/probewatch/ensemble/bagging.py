"""
Bagging over any base learner.

Each member trains on its own draw of rows and columns. Drawn indices are
sorted before fitting, so a member that draws every row and column without
replacement sees exactly the original training matrix.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from joblib import Parallel, delayed

from probewatch.errors import (
    ArgumentError,
    EnsembleMemberError,
    ProbewatchError,
    SchemaMismatchError,
)
from probewatch.learners import (
    LEARNERS,
    Learner,
    LearnerSpec,
    learner_from_dict,
    make_learner,
)
from probewatch.learners.base import proba_columns

logger = logging.getLogger(__name__)


@dataclass
class BaggingSpec:
    """
    Bagging hyperparameters.

    Attributes:
        base (LearnerSpec): Member learner.
        n_estimators (int): Member count.
        max_samples (float): Fraction of rows drawn per member, in (0, 1].
        max_features (float): Fraction of columns drawn per member, in (0, 1].
        bootstrap (bool): Draw rows with replacement.
        bootstrap_features (bool): Draw columns with replacement.
        seed (int): Seed of the draws; stochastic members use ``seed + i``.
        n_jobs (int): Parallel member fits.
    """

    base: LearnerSpec
    n_estimators: int = 10
    max_samples: float = 1.0
    max_features: float = 1.0
    bootstrap: bool = True
    bootstrap_features: bool = False
    seed: int = 0
    n_jobs: int = 1

    def __post_init__(self):
        if isinstance(self.base, dict):
            self.base = LearnerSpec.from_dict(self.base)
        if self.n_estimators < 1:
            raise ArgumentError("n_estimators must be >= 1")
        for name in ("max_samples", "max_features"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ArgumentError(f"{name} must lie in (0, 1], got {value}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "base": self.base.to_dict(),
            "n_estimators": self.n_estimators,
            "max_samples": self.max_samples,
            "max_features": self.max_features,
            "bootstrap": self.bootstrap,
            "bootstrap_features": self.bootstrap_features,
            "seed": self.seed,
            "n_jobs": self.n_jobs,
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "BaggingSpec":
        return cls(**{**d, "base": LearnerSpec.from_dict(d["base"])})


@dataclass
class Member:
    learner: Learner
    rows: np.ndarray
    features: np.ndarray


def _draw(
    rng: np.random.Generator, n: int, fraction: float, replace: bool
) -> np.ndarray:
    size = max(1, math.ceil(fraction * n))
    if replace:
        idx = rng.integers(0, n, size=size)
    else:
        idx = rng.choice(n, size=min(size, n), replace=False)
    return np.sort(idx)


def _member_spec(spec: BaggingSpec, i: int) -> LearnerSpec:
    cls = LEARNERS[spec.base.kind]
    if cls.stochastic:
        seed = int(spec.base.params.get("seed", cls.defaults["seed"]))
        return spec.base.with_params(seed=seed + i)
    return spec.base


def _fit_member(i, X, y, names, base: LearnerSpec, rows, features) -> Member:
    try:
        sample = X[np.ix_(rows, features)]
        learner = make_learner(base).fit(sample, y[rows], [names[f] for f in features])
    except (ProbewatchError, ValueError) as e:
        raise EnsembleMemberError(i, e) from e
    return Member(learner, rows, features)


class BaggingModel:
    """
    A fitted bagging ensemble.

    Probabilities are the mean of the members' probing probabilities, each
    member scoring the columns it was trained on.
    """

    def __init__(
        self, spec: BaggingSpec, members: List[Member], feature_names: List[str]
    ):
        self.spec = spec
        self.members = members
        self.feature_names = list(feature_names)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def _prepare(self, X, feature_names) -> np.ndarray:
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

    def member_probabilities(
        self, X, feature_names: Optional[Sequence[str]] = None
    ) -> np.ndarray:
        """Per-member probing probabilities, shape (n_estimators, n)."""
        X = self._prepare(X, feature_names)
        return np.array(
            [m.learner.predict_proba(X[:, m.features])[:, 1] for m in self.members]
        )

    def predict_proba(
        self, X, feature_names: Optional[Sequence[str]] = None
    ) -> np.ndarray:
        """
        Ensemble class probabilities.

        Member probabilities are sorted per row before averaging so the
        result does not depend on member order.

        Returns:
            np.ndarray: Shape (n, 2); column 1 is the probing probability.
        """
        p = np.sort(self.member_probabilities(X, feature_names), axis=0)
        return proba_columns(p.mean(axis=0))

    def predict(self, X, threshold: float = 0.5, feature_names=None) -> np.ndarray:
        scores = self.predict_proba(X, feature_names)[:, 1]
        return (scores >= threshold).astype(np.int64)

    def predict_proba_table(self, table) -> np.ndarray:
        return self.predict_proba(table.matrix(self.feature_names), self.feature_names)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "model": "bagging",
            "spec": self.spec.to_dict(),
            "features": self.feature_names,
            "members": [
                {"learner": m.learner.to_dict(), "rows": m.rows, "features": m.features}
                for m in self.members
            ],
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "BaggingModel":
        members = [
            Member(
                learner_from_dict(m["learner"]),
                np.asarray(m["rows"], dtype=np.int64),
                np.asarray(m["features"], dtype=np.int64),
            )
            for m in d["members"]
        ]
        return cls(BaggingSpec.from_dict(d["spec"]), members, d["features"])


def fit_bagging(
    X, y, spec: BaggingSpec, feature_names: Optional[Sequence[str]] = None
) -> BaggingModel:
    """
    Fits a bagging ensemble.

    Args:
        X: Training matrix, shape (n, d).
        y: Binary labels.
        spec (BaggingSpec): Hyperparameters.
        feature_names (Sequence[str], optional): Column names; ``x0..`` by default.

    Returns:
        BaggingModel: The fitted ensemble.

    Raises:
        EnsembleMemberError: If a member fails; carries the member index and cause.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64).reshape(-1)
    if X.ndim != 2 or len(X) != len(y):
        raise SchemaMismatchError(
            f"X of shape {X.shape} does not match {len(y)} labels"
        )
    n, d = X.shape
    if feature_names is None:
        names = [f"x{i}" for i in range(d)]
    else:
        names = list(feature_names)
    if len(names) != d:
        raise SchemaMismatchError("feature_names do not match the column count")

    draws = []
    for i, seq in enumerate(np.random.SeedSequence(spec.seed).spawn(spec.n_estimators)):
        rng = np.random.default_rng(seq)
        rows = _draw(rng, n, spec.max_samples, spec.bootstrap)
        features = _draw(rng, d, spec.max_features, spec.bootstrap_features)
        draws.append((_member_spec(spec, i), rows, features))

    members = Parallel(n_jobs=spec.n_jobs)(
        delayed(_fit_member)(i, X, y, names, base, rows, features)
        for i, (base, rows, features) in enumerate(draws)
    )
    logger.info(
        "fitted %d %s members on %d rows x %d columns",
        len(members),
        spec.base.kind.value,
        n,
        d,
    )
    return BaggingModel(spec, list(members), names)


def fit_bagging_table(
    table, spec: BaggingSpec, names: Optional[Sequence[str]] = None
) -> BaggingModel:
    names = table.names if names is None else list(names)
    return fit_bagging(table.matrix(names), table.require_labels(), spec, names)
