"""
Tuned bagging configurations for the institutional and UNSW-NB15 data sets.
"""

from typing import Dict

from probewatch.ensemble.bagging import BaggingSpec
from probewatch.errors import ArgumentError
from probewatch.learners import LearnerKind, LearnerSpec

DATASETS = ("institutional", "unsw")

_PRESETS: Dict[str, Dict[LearnerKind, dict]] = {
    "institutional": {
        LearnerKind.SVM: {
            "params": {"C": 47.0, "degree": 4.25, "kernel": "rbf", "gamma": 1.64},
            "bagging": (0.7514, 0.8762, True, False),
        },
        LearnerKind.KNN: {
            "params": {"k": 3, "p": 1.0, "weights": "distance", "leaf_size": 26},
            "bagging": (0.9685, 0.9986, True, False),
        },
        LearnerKind.GNB: {
            "params": {"variance_smoothing": 3.15e-05},
            "bagging": (0.4281, 0.7954, False, True),
        },
        LearnerKind.LOGREG: {
            "params": {"C": 190.0, "max_iter": 200, "penalty": "none", "tol": 0.0673},
            "bagging": (0.0692, 0.8906, False, False),
        },
    },
    "unsw": {
        LearnerKind.SVM: {
            "params": {"C": 4.59, "degree": 5.15, "kernel": "poly", "gamma": 1.67},
            "bagging": (0.9170, 0.9642, False, False),
        },
        LearnerKind.KNN: {
            "params": {"k": 3, "p": 1.0, "weights": "distance", "leaf_size": 24},
            "bagging": (0.8422, 0.9583, True, True),
        },
        LearnerKind.GNB: {
            "params": {"variance_smoothing": 0.28},
            "bagging": (0.5793, 0.9409, True, False),
        },
        LearnerKind.LOGREG: {
            "params": {"C": 80.0, "max_iter": 220, "penalty": "none", "tol": 0.6888},
            "bagging": (0.8170, 0.9098, True, False),
        },
    },
}

BENCHMARK_KINDS = (
    LearnerKind.SVM,
    LearnerKind.KNN,
    LearnerKind.GNB,
    LearnerKind.LOGREG,
)


def bagging_preset(kind, dataset: str = "institutional", **overrides) -> BaggingSpec:
    """
    The tuned bagging spec of one base learner.

    Args:
        kind: ``svm``, ``knn``, ``gnb`` or ``logreg``.
        dataset (str): ``institutional`` or ``unsw``.
        **overrides: ``BaggingSpec`` fields to replace, such as ``seed``.

    Returns:
        BaggingSpec: The preset.
    """
    if dataset not in DATASETS:
        raise ArgumentError(f"dataset must be one of {DATASETS}")
    kind = LearnerKind(kind)
    if kind not in _PRESETS[dataset]:
        raise ArgumentError(f"no preset for base learner {kind.value}")
    preset = _PRESETS[dataset][kind]
    max_samples, max_features, bootstrap, bootstrap_features = preset["bagging"]
    fields = {
        "max_samples": max_samples,
        "max_features": max_features,
        "bootstrap": bootstrap,
        "bootstrap_features": bootstrap_features,
        **overrides,
    }
    return BaggingSpec(LearnerSpec(kind, dict(preset["params"])), **fields)
