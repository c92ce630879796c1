"""
From-scratch binary learners and their registry.
"""

from typing import Dict, Type

from probewatch.learners.base import Learner, LearnerKind, LearnerSpec
from probewatch.learners.knn import KNeighbors, fit_knn
from probewatch.learners.logistic import LogisticRegression, fit_logreg
from probewatch.learners.naive_bayes import GaussianNB, fit_gnb
from probewatch.learners.svm import SVM, fit_svm
from probewatch.learners.trees import (
    DecisionTree,
    ExtraTrees,
    RandomForest,
    fit_forest,
    fit_tree,
    fit_xtrees,
)

LEARNERS: Dict[LearnerKind, Type[Learner]] = {
    LearnerKind.GNB: GaussianNB,
    LearnerKind.LOGREG: LogisticRegression,
    LearnerKind.KNN: KNeighbors,
    LearnerKind.SVM: SVM,
    LearnerKind.TREE: DecisionTree,
    LearnerKind.FOREST: RandomForest,
    LearnerKind.XTREES: ExtraTrees,
}


def make_learner(spec: LearnerSpec) -> Learner:
    """Builds an unfitted learner from its spec."""
    return LEARNERS[LearnerKind(spec.kind)](**spec.params)


def learner_from_dict(d: Dict) -> Learner:
    """Restores a fitted learner from ``Learner.to_dict`` output."""
    return LEARNERS[LearnerKind(d["kind"])](**d["params"]).restore(d)
