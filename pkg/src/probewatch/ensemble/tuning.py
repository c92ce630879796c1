"""
Seeded random-search tuning of bagging ensembles.

A search space maps hyperparameter names to either a list of choices or a
range object ``{"low": a, "high": b, "log": bool, "int": bool}``. Names of
``BaggingSpec`` fields tune the ensemble, ``kind`` picks the base learner, a
``<kind>.<param>`` name applies only when that base kind is drawn, and any
other name is a base-learner hyperparameter.

When every dimension is a choice list and the budget covers the whole grid,
each grid point is evaluated exactly once, in seed-shuffled order.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from joblib import Parallel, delayed

from probewatch.errors import ArgumentError, DegenerateDataError, ProbewatchError
from probewatch.ensemble.bagging import BaggingSpec, fit_bagging
from probewatch.evaluation.metrics import confusion, metrics
from probewatch.evaluation.roc import roc_auc
from probewatch.learners import LearnerKind, LearnerSpec

logger = logging.getLogger(__name__)

ENSEMBLE_PARAMS = (
    "n_estimators",
    "max_samples",
    "max_features",
    "bootstrap",
    "bootstrap_features",
)
METRICS = ("f1", "accuracy", "auc")


@dataclass
class Trial:
    index: int
    params: Dict[str, Any]
    score: Optional[float]
    error: Optional[str] = None

    def to_dict(self) -> Dict:
        return {
            "index": self.index,
            "params": self.params,
            "score": self.score,
            "error": self.error,
        }


@dataclass
class TuningResult:
    best: BaggingSpec
    best_score: float
    metric: str
    trials: List[Trial] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return {
            "best": self.best.to_dict(),
            "best_score": self.best_score,
            "metric": self.metric,
            "trials": [t.to_dict() for t in self.trials],
        }


def _is_range(dim) -> bool:
    return isinstance(dim, dict)


def _check_space(space: Dict[str, Any]):
    if not space:
        raise ArgumentError("the search space is empty")
    for name, dim in space.items():
        if _is_range(dim):
            if "low" not in dim or "high" not in dim or dim["low"] > dim["high"]:
                raise ArgumentError(f"range for {name!r} needs low <= high")
            if dim.get("log") and dim["low"] <= 0:
                raise ArgumentError(f"log range for {name!r} needs a positive low")
        elif not isinstance(dim, (list, tuple)) or not dim:
            raise ArgumentError(f"dimension {name!r} must be a non-empty list or range")


def _sample(dim, rng: np.random.Generator):
    if not _is_range(dim):
        return dim[int(rng.integers(len(dim)))]
    low, high = float(dim["low"]), float(dim["high"])
    if dim.get("log"):
        value = math.exp(rng.uniform(math.log(low), math.log(high)))
    else:
        value = rng.uniform(low, high)
    if dim.get("int"):
        return int(min(max(round(value), math.ceil(low)), math.floor(high)))
    return float(value)


def _points(
    space: Dict[str, Any], budget: int, rng: np.random.Generator
) -> List[Dict[str, Any]]:
    names = list(space)
    if not any(_is_range(space[n]) for n in names):
        grid_size = math.prod(len(space[n]) for n in names)
        if budget >= grid_size:
            combos = itertools.product(*(space[n] for n in names))
            grid = [dict(zip(names, combo)) for combo in combos]
            return [grid[i] for i in rng.permutation(grid_size)]
    return [{n: _sample(space[n], rng) for n in names} for _ in range(budget)]


def spec_for(template: BaggingSpec, point: Dict[str, Any]) -> BaggingSpec:
    """Applies one sampled point to the template spec."""
    kind = LearnerKind(point.get("kind", template.base.kind))
    params = dict(template.base.params) if kind == template.base.kind else {}
    ensemble = {}
    for name, value in point.items():
        if name == "kind":
            continue
        if name in ENSEMBLE_PARAMS:
            ensemble[name] = value
        elif "." in name:
            scope, _, param = name.partition(".")
            if scope == kind.value:
                params[param] = value
        else:
            params[name] = value
    return replace(template, base=LearnerSpec(kind, params), **ensemble)


def score_predictions(metric: str, y_true, proba) -> float:
    if metric == "auc":
        return roc_auc(y_true, proba)[1]
    m = metrics(confusion(y_true, (np.asarray(proba) >= 0.5).astype(np.int64)))
    return m.f1 if metric == "f1" else m.accuracy


def _run_trial(
    index, point, template, X_train, y_train, X_val, y_val, names, metric
) -> Trial:
    try:
        spec = spec_for(template, point)
        model = fit_bagging(X_train, y_train, spec, names)
        score = score_predictions(metric, y_val, model.predict_proba(X_val)[:, 1])
    except (ProbewatchError, ValueError) as e:
        return Trial(index, point, None, f"{type(e).__name__}: {e}")
    return Trial(index, point, float(score))


def random_search_tune(
    space: Dict[str, Any],
    budget: int,
    X_train,
    y_train,
    X_val,
    y_val,
    template: BaggingSpec,
    metric: str = "f1",
    seed: int = 0,
    n_jobs: int = 1,
    feature_names: Optional[Sequence[str]] = None,
) -> TuningResult:
    """
    Picks the ensemble spec with the best validation score.

    Args:
        space (Dict[str, Any]): Search space.
        budget (int): Trials to run, at least 1.
        X_train, y_train: Training rows and labels.
        X_val, y_val: Validation rows and labels.
        template (BaggingSpec): Spec supplying every value the space leaves out.
        metric (str): ``f1``, ``accuracy`` or ``auc``.
        seed (int): Sampling seed.
        n_jobs (int): Parallel trials.
        feature_names (Sequence[str], optional): Column names.

    Returns:
        TuningResult: The winning spec (first best on ties) and the full trial log.

    Raises:
        DegenerateDataError: If every trial failed.
    """
    if budget < 1:
        raise ArgumentError("budget must be >= 1")
    if metric not in METRICS:
        raise ArgumentError(f"metric must be one of {METRICS}")
    _check_space(space)
    rng = np.random.default_rng(seed)
    points = _points(space, budget, rng)
    trials: List[Trial] = Parallel(n_jobs=n_jobs)(
        delayed(_run_trial)(
            i, p, template, X_train, y_train, X_val, y_val, feature_names, metric
        )
        for i, p in enumerate(points)
    )
    for t in trials:
        if t.error:
            logger.warning("tuning trial %d failed: %s", t.index, t.error)
        else:
            logger.debug("tuning trial %d: %s = %.4f", t.index, metric, t.score)
    scored = [t for t in trials if t.score is not None]
    if not scored:
        raise DegenerateDataError("every tuning trial failed")
    best = max(scored, key=lambda t: (t.score, -t.index))
    logger.info(
        "best of %d trials: %s = %.4f with %s",
        len(trials),
        metric,
        best.score,
        best.params,
    )
    best_spec = spec_for(template, best.params)
    return TuningResult(best_spec, best.score, metric, list(trials))
