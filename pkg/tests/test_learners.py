import json
import unittest

import numpy as np

from probewatch.errors import EmptyMaskError, KTooLargeError, SchemaMismatchError
from probewatch.learners import (
    LEARNERS,
    SVM,
    DecisionTree,
    ExtraTrees,
    GaussianNB,
    KNeighbors,
    LearnerKind,
    LearnerSpec,
    LogisticRegression,
    RandomForest,
    learner_from_dict,
    make_learner,
)
from probewatch.utils import dump_json

try:
    from sklearn import linear_model, naive_bayes, neighbors, svm

    HAVE_SKLEARN = True
except ImportError:  # pragma: no cover
    HAVE_SKLEARN = False

FAST_PARAMS = {
    LearnerKind.GNB: {},
    LearnerKind.LOGREG: {"penalty": "l2", "C": 1.0},
    LearnerKind.KNN: {"k": 3},
    LearnerKind.SVM: {"C": 1.0, "gamma": 0.5},
    LearnerKind.TREE: {"max_depth": 4},
    LearnerKind.FOREST: {"n_trees": 5, "max_depth": 4},
    LearnerKind.XTREES: {"n_trees": 5, "max_depth": 4},
}


def blobs(seed, n=120, d=3, shift=1.5):
    rng = np.random.default_rng(seed)
    y = (np.arange(n) % 2).astype(np.int64)
    X = rng.standard_normal((n, d)) + shift * y[:, None]
    return X, y


class TestLearnerContract(unittest.TestCase):
    def test_registry_covers_every_kind(self):
        self.assertEqual(set(LEARNERS), set(LearnerKind))

    def test_every_kind_fits_and_predicts(self):
        X, y = blobs(0)
        for kind, params in FAST_PARAMS.items():
            with self.subTest(kind=kind):
                model = make_learner(LearnerSpec(kind, params)).fit(X, y)
                proba = model.predict_proba(X)
                self.assertEqual(proba.shape, (len(X), 2))
                np.testing.assert_allclose(proba.sum(axis=1), 1.0)
                self.assertGreater(np.mean(model.predict(X) == y), 0.75)

    def test_persistence_through_json(self):
        X, y = blobs(1)
        for kind, params in FAST_PARAMS.items():
            with self.subTest(kind=kind):
                learner = make_learner(LearnerSpec(kind, params))
                model = learner.fit(X, y, ["a", "b", "c"])
                restored = learner_from_dict(json.loads(dump_json(model.to_dict())))
                self.assertEqual(restored.feature_names, ["a", "b", "c"])
                np.testing.assert_allclose(
                    restored.predict_proba(X),
                    model.predict_proba(X),
                    rtol=1e-12,
                    atol=1e-15,
                )

    def test_unknown_hyperparameter(self):
        with self.assertRaises(ValueError):
            KNeighbors(neighbours=3)
        with self.assertRaises(ValueError):
            make_learner(LearnerSpec("svm", {"depth": 2}))

    def test_invalid_hyperparameter(self):
        with self.assertRaises(ValueError):
            KNeighbors(weights="inverse")
        with self.assertRaises(ValueError):
            SVM(kernel="sigmoid")
        with self.assertRaises(ValueError):
            LogisticRegression(penalty="l1")
        with self.assertRaises(ValueError):
            RandomForest(n_trees=0)

    def test_zero_columns(self):
        with self.assertRaises(EmptyMaskError):
            GaussianNB().fit(np.zeros((4, 0)), [0, 1, 0, 1])

    def test_shape_mismatch(self):
        with self.assertRaises(SchemaMismatchError):
            GaussianNB().fit(np.zeros((4, 2)), [0, 1, 0])

    def test_single_class_is_constant(self):
        X = np.arange(6, dtype=float).reshape(3, 2)
        with self.assertLogs("probewatch.learners.base", level="WARNING"):
            model = SVM().fit(X, [1, 1, 1])
        np.testing.assert_array_equal(model.predict(X), [1, 1, 1])
        np.testing.assert_array_equal(model.predict_proba(X)[:, 0], [0.0, 0.0, 0.0])
        restored = learner_from_dict(model.to_dict())
        np.testing.assert_array_equal(restored.predict(X), [1, 1, 1])

    def test_feature_names_checked(self):
        X, y = blobs(2)
        model = GaussianNB().fit(X, y, ["a", "b", "c"])
        with self.assertRaises(SchemaMismatchError):
            model.predict_proba(X, ["a", "c", "b"])
        with self.assertRaises(SchemaMismatchError):
            model.predict_proba(X[:, :2])

    def test_unfitted(self):
        with self.assertRaises(RuntimeError):
            GaussianNB().predict(np.zeros((1, 1)))

    def test_spec_round_trip(self):
        spec = LearnerSpec("knn", {"k": 5})
        self.assertEqual(LearnerSpec.from_dict(spec.to_dict()), spec)
        self.assertEqual(KNeighbors(k=5).spec.params["k"], 5)
        self.assertEqual(spec.with_params(p=2.0).params, {"k": 5, "p": 2.0})


class TestKNeighbors(unittest.TestCase):
    def test_k_larger_than_training_set(self):
        with self.assertRaises(KTooLargeError):
            KNeighbors(k=5).fit(np.zeros((3, 1)), [0, 1, 0])

    def test_distance_tie_goes_to_earlier_row(self):
        model = KNeighbors(k=1).fit([[0.0], [2.0]], [0, 1])
        self.assertEqual(model.predict([[1.0]])[0], 0)
        model = KNeighbors(k=1).fit([[2.0], [0.0]], [1, 0])
        self.assertEqual(model.predict([[1.0]])[0], 1)

    def test_exact_match_takes_its_label(self):
        model = KNeighbors(k=3).fit([[0.0], [0.1], [0.2], [5.0]], [1, 0, 0, 0])
        self.assertEqual(model.predict_proba([[0.0]])[0, 1], 1.0)

    def test_distance_weights(self):
        model = KNeighbors(k=2, p=1.0).fit([[0.0], [3.0]], [1, 0])
        # weights 1/1 and 1/2
        self.assertAlmostEqual(model.predict_proba([[1.0]])[0, 1], 2.0 / 3.0)


class TestLogisticRegression(unittest.TestCase):
    def test_stops_at_max_iter(self):
        X, y = blobs(3, shift=0.5)
        with self.assertLogs("probewatch.learners.logistic", level="WARNING"):
            model = LogisticRegression(max_iter=1, tol=1e-12).fit(X, y)
        self.assertFalse(model.converged)
        self.assertEqual(model.n_iter, 1)

    def test_converges(self):
        X, y = blobs(4, shift=0.5)
        model = LogisticRegression(penalty="l2", C=1.0, max_iter=5000).fit(X, y)
        self.assertTrue(model.converged)
        self.assertGreater(model.coef_.sum(), 0)


class TestSVM(unittest.TestCase):
    def test_separable_data(self):
        X, y = blobs(5, shift=6.0)
        model = SVM(C=10.0, kernel="linear").fit(X, y)
        self.assertTrue(model.converged)
        np.testing.assert_array_equal(model.predict(X), y)
        signs = np.sign(model.decision_function(X))
        np.testing.assert_array_equal(signs, np.where(y == 1, 1, -1))

    def test_poly_kernel(self):
        X, y = blobs(6)
        model = SVM(kernel="poly", degree=2.0, gamma=0.5, coef0=1.0, C=1.0).fit(X, y)
        self.assertGreater(np.mean(model.predict(X) == y), 0.75)


class TestTrees(unittest.TestCase):
    def test_full_tree_fits_training_data(self):
        rng = np.random.default_rng(7)
        X = rng.random((300, 2))
        y = ((X[:, 0] > 0.5) & (X[:, 1] > 0.3)).astype(np.int64)
        model = DecisionTree().fit(X, y)
        np.testing.assert_array_equal(model.predict(X), y)

    def test_max_depth_limits_tree(self):
        rng = np.random.default_rng(8)
        X = rng.random((200, 3))
        y = (rng.random(200) < 0.5).astype(np.int64)
        stump = DecisionTree(max_depth=1).fit(X, y)
        self.assertLessEqual(len(stump.trees_[0].feature), 3)

    def test_importances(self):
        rng = np.random.default_rng(9)
        X = rng.random((400, 4))
        y = (X[:, 2] > 0.5).astype(np.int64)
        for model in (RandomForest(n_trees=10), ExtraTrees(n_trees=10)):
            model.fit(X, y)
            importances = model.feature_importances_
            self.assertAlmostEqual(float(importances.sum()), 1.0)
            self.assertEqual(int(np.argmax(importances)), 2)

    def test_seeded_and_parallel_fits_agree(self):
        X, y = blobs(10)
        serial = RandomForest(n_trees=6, seed=3).fit(X, y)
        again = RandomForest(n_trees=6, seed=3).fit(X, y)
        parallel = RandomForest(n_trees=6, seed=3, n_jobs=2).fit(X, y)
        expected = serial.predict_proba(X)
        np.testing.assert_array_equal(expected, again.predict_proba(X))
        np.testing.assert_array_equal(expected, parallel.predict_proba(X))
        self.assertEqual(serial.tree_probabilities(X).shape, (6, len(X)))


@unittest.skipUnless(HAVE_SKLEARN, "scikit-learn is not installed")
class TestAgainstScikitLearn(unittest.TestCase):
    def setUp(self):
        rng = np.random.default_rng(11)
        self.X = rng.standard_normal((200, 3))
        logits = self.X @ np.array([1.0, -2.0, 0.5]) + 0.3
        self.y = (rng.random(200) < 1.0 / (1.0 + np.exp(-logits))).astype(np.int64)
        self.Xq = rng.standard_normal((50, 3))

    def test_knn_uniform(self):
        ours = KNeighbors(k=5, p=2.0, weights="uniform").fit(self.X, self.y)
        ref = neighbors.KNeighborsClassifier(
            n_neighbors=5, weights="uniform", algorithm="brute"
        )
        ref.fit(self.X, self.y)
        np.testing.assert_allclose(
            ours.predict_proba(self.Xq), ref.predict_proba(self.Xq)
        )

    def test_logistic_l2(self):
        ours = LogisticRegression(penalty="l2", C=1.0, tol=1e-8, max_iter=20000)
        ours.fit(self.X, self.y)
        ref = linear_model.LogisticRegression(C=1.0, tol=1e-10, max_iter=10000)
        ref.fit(self.X, self.y)
        np.testing.assert_allclose(ours.coef_, ref.coef_[0], atol=1e-3)
        self.assertAlmostEqual(ours.intercept_, float(ref.intercept_[0]), delta=1e-3)

    def test_gaussian_nb(self):
        ours = GaussianNB().fit(self.X, self.y)
        ref = naive_bayes.GaussianNB().fit(self.X, self.y)
        np.testing.assert_allclose(
            ours.predict_proba(self.Xq), ref.predict_proba(self.Xq), atol=1e-6
        )

    def test_svm_decision_function(self):
        ours = SVM(C=1.0, kernel="rbf", gamma=0.5, tol=1e-6, max_passes=1000)
        ours.fit(self.X, self.y)
        ref = svm.SVC(C=1.0, kernel="rbf", gamma=0.5, tol=1e-6).fit(self.X, self.y)
        np.testing.assert_allclose(
            ours.decision_function(self.Xq), ref.decision_function(self.Xq), atol=1e-2
        )


if __name__ == "__main__":
    unittest.main()
