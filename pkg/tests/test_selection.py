import math
import unittest

import numpy as np
import pandas as pd
import pytest
from scipy.stats import f_oneway

from probewatch.dataset import Column, FeatureTable, split
from probewatch.errors import OneClassOnlyError
from probewatch.selection import (
    FeatureSubset,
    GeneticConfig,
    GeneticSearch,
    SelectionReport,
    SelectionStage,
    anova_f_scores,
    chi_square_scores,
    correlation_prune,
    filter_select,
    ga_wrapper_select,
    target_correlation_select,
    target_correlations,
    top_k,
)

INFORMATIVE = ["f3", "f8", "f14", "f21", "f27"]


def make_table(columns, labels):
    names = list(columns)
    return FeatureTable(
        [Column(n) for n in names], pd.DataFrame(columns, columns=names), labels=labels
    )


def planted(seed, n=2000, d=30, informative=INFORMATIVE):
    rng = np.random.default_rng(seed)
    X = rng.random((n, d))
    names = [f"f{i}" for i in range(d)]
    signal = X[:, [names.index(n) for n in informative]].sum(axis=1)
    y = (signal > len(informative) / 2).astype(np.int64)
    return make_table({n: X[:, i] for i, n in enumerate(names)}, y)


class TestScorers(unittest.TestCase):
    def setUp(self):
        self.table = make_table(
            {
                "same": [0.0, 1.0, 1.0, 0.0, 1.0, 0.0],
                "flip": [1.0, 0.0, 0.0, 1.0, 0.0, 1.0],
                "const": [5.0] * 6,
                "noise": [0.3, 0.1, 0.9, 0.4, 0.2, 0.8],
            },
            [0, 1, 1, 0, 1, 0],
        )

    def test_target_correlations(self):
        corr = target_correlations(self.table)
        self.assertAlmostEqual(corr["same"], 1.0)
        self.assertAlmostEqual(corr["flip"], -1.0)
        self.assertEqual(corr["const"], 0.0)
        y = self.table.labels.astype(float)
        noise = self.table.matrix(["noise"])[:, 0]
        self.assertAlmostEqual(corr["noise"], float(np.corrcoef(noise, y)[0, 1]))

    def test_target_correlation_select(self):
        subset = target_correlation_select(self.table, threshold=0.9)
        self.assertEqual(subset.names, ["same", "flip"])
        self.assertEqual(subset.stage, SelectionStage.FILTER)

    def test_chi_square(self):
        scores = chi_square_scores(self.table)
        # class share 1/2: observed 3 vs expected 1.5 for each class
        self.assertAlmostEqual(scores["same"], 3.0)
        self.assertAlmostEqual(scores["flip"], 3.0)
        self.assertEqual(scores["const"], 0.0)

    def test_anova_matches_scipy(self):
        scores = anova_f_scores(self.table)
        x = self.table.matrix(["noise"])[:, 0]
        y = self.table.labels
        expected = f_oneway(x[y == 0], x[y == 1]).statistic
        self.assertAlmostEqual(scores["noise"], float(expected))
        self.assertTrue(math.isinf(scores["same"]))
        self.assertEqual(scores["const"], 0.0)

    def test_anova_needs_both_classes(self):
        table = make_table({"x": [1.0, 2.0, 3.0]}, [1, 1, 1])
        with self.assertRaises(OneClassOnlyError):
            anova_f_scores(table)

    def test_top_k(self):
        scores = {"a": 1.0, "b": 3.0, "c": 3.0, "d": math.inf, "e": 0.5}
        self.assertEqual(top_k(scores, 3), ["d", "b", "c"])
        self.assertEqual(top_k(scores, 10), ["d", "b", "c", "a", "e"])


class TestFilterSelect(unittest.TestCase):
    def test_union_and_report(self):
        table = planted(0, n=600, d=12, informative=["f3", "f8"])
        report = SelectionReport()
        subset = filter_select(table, k=3, n_trees=10, report=report)
        self.assertEqual(
            set(report.scores),
            {"target_correlation", "chi_square", "anova_f", "extra_trees"},
        )
        self.assertEqual(len(report.selected["chi_square"]), 3)
        self.assertEqual(subset.names, report.union)
        self.assertEqual(subset.names, [n for n in table.names if n in subset])
        self.assertIn("f3", subset)
        self.assertIn("f8", subset)


class TestCorrelationPrune(unittest.TestCase):
    def test_drops_later_twin(self):
        rng = np.random.default_rng(1)
        x = rng.random(200)
        z = rng.random(200)
        y = (x + 0.3 * z > 0.6).astype(np.int64)
        table = make_table({"x": x, "twin": x.copy(), "z": z}, y)
        report = SelectionReport()
        subset = correlation_prune(table, ["x", "twin", "z"], 0.75, report)
        self.assertEqual(subset.names, ["x", "z"])
        self.assertEqual(subset.stage, SelectionStage.PRUNED)
        self.assertEqual(report.pruned_pairs[0].kept, "x")
        self.assertEqual(report.pruned_pairs[0].dropped, "twin")
        self.assertAlmostEqual(report.pruned_pairs[0].correlation, 1.0)

    def test_keeps_higher_target_correlation(self):
        rng = np.random.default_rng(2)
        x = rng.random(300)
        noisy = x + 0.05 * rng.standard_normal(300)
        y = (x > 0.5).astype(np.int64)
        table = make_table({"noisy": noisy, "x": x}, y)
        subset = correlation_prune(table, ["noisy", "x"], 0.75)
        self.assertEqual(subset.names, ["x"])

    def test_survivors_below_threshold(self):
        table = planted(3, n=400, d=10, informative=["f0", "f1"])
        subset = correlation_prune(table, table.names, 0.75)
        Z = table.matrix(subset.names)
        corr = np.corrcoef(Z, rowvar=False)
        off = corr[~np.eye(len(subset), dtype=bool)]
        self.assertTrue(np.all(np.abs(off) <= 0.75))

    def test_unknown_names(self):
        table = make_table({"x": [0.0, 1.0, 2.0]}, [0, 1, 1])
        with self.assertRaises(ValueError):
            correlation_prune(table, ["x", "y"])


class TestGeneticSearch(unittest.TestCase):
    def setUp(self):
        table = planted(7, n=500, d=8, informative=["f0", "f1", "f2"])
        self.train, self.val, _ = split(table, seed=7)
        self.config = GeneticConfig(
            generations=4, population=8, n_trees=3, max_depth=6, seed=11
        )

    def test_history_non_decreasing(self):
        report = SelectionReport()
        subset = ga_wrapper_select(
            self.train, self.val, self.train.names, self.config, report
        )
        self.assertEqual(len(report.ga_history), 5)
        history = report.ga_history
        self.assertTrue(all(b >= a for a, b in zip(history, history[1:])))
        self.assertEqual(report.ga_best_fitness, report.ga_history[-1])
        self.assertEqual(report.final, subset.names)
        self.assertEqual(subset.stage, SelectionStage.WRAPPED)
        self.assertGreater(len(subset), 0)

    def test_deterministic(self):
        first = ga_wrapper_select(self.train, self.val, self.train.names, self.config)
        second = ga_wrapper_select(self.train, self.val, self.train.names, self.config)
        self.assertEqual(first.names, second.names)

    def test_parallel_matches_serial(self):
        serial = ga_wrapper_select(self.train, self.val, self.train.names, self.config)
        parallel = ga_wrapper_select(
            self.train, self.val, self.train.names, self.config, n_jobs=2
        )
        self.assertEqual(serial.names, parallel.names)

    def test_zero_generations(self):
        names = self.train.names
        search = GeneticSearch(
            self.train.matrix(names),
            self.train.labels,
            self.val.matrix(names),
            self.val.labels,
            GeneticConfig(generations=0, population=4, n_trees=2, seed=0),
        )
        result = search.run()
        self.assertEqual(len(result.history), 1)
        self.assertTrue(result.best_mask.any())
        self.assertLessEqual(result.evaluations, 4)

    def test_needs_two_columns(self):
        with self.assertRaises(ValueError):
            ga_wrapper_select(self.train, self.val, ["f0"], self.config)

    def test_invalid_config(self):
        with self.assertRaises(ValueError):
            GeneticConfig(population=0)
        with self.assertRaises(ValueError):
            GeneticConfig(population=4, elitism=5)


class TestFeatureSubset(unittest.TestCase):
    def test_dict_round_trip(self):
        subset = FeatureSubset(["a", "b"], SelectionStage.PRUNED)
        self.assertEqual(FeatureSubset.from_dict(subset.to_dict()), subset)

    def test_repeated_name(self):
        with self.assertRaises(ValueError):
            FeatureSubset(["a", "a"], "filter")


@pytest.mark.slow
class TestPlantedRecovery(unittest.TestCase):
    def test_filter_and_wrapper_recover_informative_columns(self):
        recovered = 0
        for seed in range(5):
            train, val, _ = split(planted(seed), seed=seed)
            candidates = filter_select(train, k=8, n_trees=25, seed=seed)
            pruned = correlation_prune(train, candidates.names)
            report = SelectionReport()
            config = GeneticConfig(
                generations=8, population=12, n_trees=5, max_depth=8, seed=seed
            )
            final = ga_wrapper_select(train, val, pruned.names, config, report)
            history = report.ga_history
            self.assertTrue(all(b >= a for a, b in zip(history, history[1:])))
            if sum(n in final for n in INFORMATIVE) >= 4:
                recovered += 1
        self.assertGreaterEqual(recovered, 4)


if __name__ == "__main__":
    unittest.main()
