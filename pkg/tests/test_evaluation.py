import json
import math
import unittest

import numpy as np

from probewatch.constants import MissingReason
from probewatch.dataset import Column, ColumnKind, Origin, table_from_records
from probewatch.errors import (
    BadRuleError,
    LengthMismatchError,
    OneClassOnlyError,
    RowSetMismatchError,
    SchemaMismatchError,
)
from probewatch.evaluation import (
    ConfusionMatrix,
    EvalReport,
    benchmark,
    compare,
    confusion,
    default_rules,
    evaluate,
    f1_score,
    load_rules,
    metrics,
    misuse_detect,
    parse_predicate,
    parse_rules,
    read_misuse_csv,
    roc_auc,
    roc_csv,
)
from probewatch.evaluation.rules import rules_to_json
from probewatch.utils import dump_json


def pairwise_auc(y, s):
    pos, neg = s[y == 1], s[y == 0]
    above = (pos[:, None] > neg[None, :]).sum()
    ties = (pos[:, None] == neg[None, :]).sum()
    wins = above + 0.5 * ties
    return wins / (len(pos) * len(neg))


class TestMetrics(unittest.TestCase):
    def test_reported_operating_points(self):
        m = metrics(ConfusionMatrix(tp=48662, fp=0, fn=1944, tn=49344))
        self.assertAlmostEqual(m.precision, 1.0, delta=1e-4)
        self.assertAlmostEqual(m.recall, 0.9616, delta=1e-4)
        self.assertAlmostEqual(m.f1, 0.9804, delta=1e-4)
        self.assertEqual(m.far, 0.0)
        m = metrics(ConfusionMatrix(tp=10133, fp=137, fn=152, tn=9578))
        self.assertAlmostEqual(m.recall, 0.9852, delta=1e-4)
        self.assertAlmostEqual(m.f1, 0.9859, delta=1e-4)

    def test_degenerate_cases(self):
        nothing_predicted = metrics(ConfusionMatrix(tp=0, fp=0, fn=0, tn=5))
        self.assertEqual(nothing_predicted.precision, 1.0)
        self.assertEqual(nothing_predicted.recall, 1.0)
        missed = metrics(ConfusionMatrix(tp=0, fp=0, fn=3, tn=5))
        self.assertEqual(missed.precision, 0.0)
        self.assertEqual(missed.f1, 0.0)
        all_positive = metrics(ConfusionMatrix(tp=4, fp=0, fn=0, tn=0))
        self.assertEqual(all_positive.far, 0.0)
        with self.assertRaises(ValueError):
            metrics(ConfusionMatrix(0, 0, 0, 0))

    def test_confusion(self):
        m = confusion([1, 1, 0, 0, 1], [1, 0, 1, 0, 1])
        self.assertEqual(m.to_dict(), {"tp": 2, "fp": 1, "fn": 1, "tn": 1})
        self.assertAlmostEqual(f1_score([1, 1, 0, 0, 1], [1, 0, 1, 0, 1]), 2.0 / 3.0)
        with self.assertRaises(LengthMismatchError):
            confusion([1, 0], [1])
        with self.assertRaises(ValueError):
            confusion([2], [1])

    def test_f1_ignores_true_negatives(self):
        few = metrics(ConfusionMatrix(tp=30, fp=5, fn=7, tn=10))
        many = metrics(ConfusionMatrix(tp=30, fp=5, fn=7, tn=1000))
        self.assertEqual(few.f1, many.f1)
        self.assertEqual(few.precision, many.precision)
        self.assertNotEqual(few.accuracy, many.accuracy)
        self.assertGreater(few.far, many.far)

    def test_confusion_matches_row_count(self):
        rng = np.random.default_rng(5)
        y_true = rng.integers(0, 2, 1000)
        y_pred = rng.integers(0, 2, 1000)
        counts = {"tp": 0, "fp": 0, "fn": 0, "tn": 0}
        for t, p in zip(y_true, y_pred):
            if t == 1:
                counts["tp" if p == 1 else "fn"] += 1
            else:
                counts["fp" if p == 1 else "tn"] += 1
        self.assertEqual(confusion(y_true, y_pred).to_dict(), counts)


class TestRocAuc(unittest.TestCase):
    def test_matches_pairwise_statistic(self):
        for seed in range(20):
            rng = np.random.default_rng(seed)
            y = (rng.random(500) < 0.4).astype(np.int64)
            # rounding produces heavy ties
            s = np.round(rng.random(500) + 0.3 * y, 1)
            _, auc = roc_auc(y, s)
            self.assertAlmostEqual(auc, pairwise_auc(y, s), delta=1e-12)

    def test_depends_only_on_score_order(self):
        rng = np.random.default_rng(11)
        y = (rng.random(400) < 0.5).astype(np.int64)
        s = rng.random(400) + 0.5 * y
        _, auc = roc_auc(y, s)
        _, stretched = roc_auc(y, np.exp(3.0 * s))
        _, reversed_auc = roc_auc(y, -s)
        self.assertAlmostEqual(stretched, auc, delta=1e-12)
        self.assertAlmostEqual(reversed_auc, 1.0 - auc, delta=1e-12)

    def test_constant_and_separated_scores(self):
        y = np.array([0, 1, 0, 1, 1, 0])
        _, auc = roc_auc(y, np.full(6, 0.3))
        self.assertEqual(auc, 0.5)
        _, auc = roc_auc(y, y * 0.9 + 0.05)
        self.assertEqual(auc, 1.0)

    def test_curve_endpoints(self):
        curve, auc = roc_auc([0, 0, 1, 1], [0.1, 0.4, 0.35, 0.8])
        self.assertEqual(curve[0], (0.0, 0.0, math.inf))
        self.assertEqual(curve[-1][:2], (1.0, 1.0))
        self.assertAlmostEqual(auc, 0.75)

    def test_one_class(self):
        with self.assertRaises(OneClassOnlyError):
            roc_auc([1, 1], [0.2, 0.3])

    def test_csv(self):
        curve, _ = roc_auc([0, 1], [0.25, 0.75])
        text = roc_csv(curve)
        self.assertEqual(
            text, "fpr,tpr,threshold\r\n0.0,0.0,inf\r\n0.0,1.0,0.75\r\n1.0,1.0,0.25\r\n"
        )


class TestEvaluate(unittest.TestCase):
    def test_threshold(self):
        report = evaluate([1, 0, 1, 0], [0.9, 0.6, 0.5, 0.1], threshold=0.55)
        self.assertEqual(report.matrix.to_dict(), {"tp": 1, "fp": 1, "fn": 1, "tn": 1})
        self.assertEqual(list(report.predictions), [1, 1, 0, 0])
        self.assertEqual(report.auc, 0.75)

    def test_one_class_leaves_auc_unset(self):
        with self.assertLogs("probewatch.evaluation.report", level="WARNING"):
            report = evaluate([0, 0, 0], [0.1, 0.7, 0.2])
        self.assertIsNone(report.auc)
        self.assertEqual(report.roc, [])
        self.assertEqual(report.far, 1.0 / 3.0)

    def test_json_round_trip(self):
        rows = [(1, "a"), (2, "b"), (3, "c")]
        report = evaluate([1, 0, 1], [0.8, 0.3, 0.4], rows=rows)
        restored = EvalReport.from_dict(json.loads(dump_json(report)))
        self.assertEqual(restored.matrix, report.matrix)
        self.assertEqual(restored.auc, report.auc)
        self.assertEqual(restored.roc, report.roc)
        self.assertEqual(restored.rows, rows)
        np.testing.assert_array_equal(restored.predictions, report.predictions)

    def test_length_mismatch(self):
        with self.assertRaises(LengthMismatchError):
            evaluate([1, 0], [0.5])
        with self.assertRaises(LengthMismatchError):
            evaluate([1, 0], [0.5, 0.2], rows=[(1,)])


class TestRules(unittest.TestCase):
    def test_default_rules(self):
        rules = {rule.id: rule for rule in default_rules()}
        self.assertEqual(
            list(rules), ["syn-rate", "syn-reset", "connect-rate", "icmp-sweep"]
        )
        self.assertTrue(rules["syn-rate"].matches({"SYN_count": 20}))
        self.assertFalse(rules["syn-rate"].matches({"SYN_count": 19}))
        self.assertTrue(rules["syn-reset"].matches({"SYN_count": 10, "state": "RST"}))
        self.assertFalse(rules["syn-reset"].matches({"SYN_count": 10, "state": "CON"}))
        self.assertTrue(rules["icmp-sweep"].matches({"ICMP_count": 12.0}))

    def test_connect_rate_needs_a_completed_handshake(self):
        rule = {rule.id: rule for rule in default_rules()}["connect-rate"]
        handshake = {"SYN_count": 15.0, "state": "RST", "Spkts": 3.0}
        self.assertTrue(rule.matches(handshake))
        self.assertFalse(rule.matches({**handshake, "Spkts": 1.0}))
        self.assertFalse(rule.matches({**handshake, "state": "FIN"}))
        self.assertFalse(rule.matches({**handshake, "SYN_count": 9.0}))

    def test_absent_values_never_match(self):
        rule = parse_rules([{"id": "r", "field": "x", "op": ">=", "value": 0}])[0]
        self.assertFalse(rule.matches({}))
        self.assertFalse(rule.matches({"x": None}))
        self.assertFalse(rule.matches({"x": float("nan")}))
        self.assertFalse(rule.matches({"x": "text"}))

    def test_combinators(self):
        predicate = parse_predicate(
            {
                "any": [
                    {"field": "state", "op": "in", "value": ["RST", "REQ"]},
                    {"not": {"field": "Dur", "op": ">", "value": 1}},
                ]
            }
        )
        self.assertTrue(predicate.evaluate({"state": "REQ", "Dur": 5.0}))
        self.assertTrue(predicate.evaluate({"state": "CON", "Dur": 0.5}))
        self.assertFalse(predicate.evaluate({"state": "CON", "Dur": 5.0}))

    def test_round_trip(self):
        rules = default_rules()
        again = parse_rules(json.loads(dump_json(rules_to_json(rules))))
        self.assertEqual(rules_to_json(again), rules_to_json(rules))

    def test_bad_rules(self):
        bad = [
            {"id": "r"},
            {"id": "r", "field": "x", "op": "~", "value": 1},
            {"id": "r", "field": "x", "op": ">=", "value": "ten"},
            {"id": "r", "field": "x", "op": ">=", "value": True},
            {"id": "r", "field": "x", "op": "in", "value": "RST"},
            {"id": "r", "all": []},
            {"id": "r", "field": "", "op": "==", "value": 1},
        ]
        for rule in bad:
            with self.subTest(rule=rule):
                with self.assertRaises(BadRuleError):
                    parse_rules([rule])
        with self.assertRaises(BadRuleError):
            parse_rules({"id": "r"})
        with self.assertRaises(BadRuleError):
            parse_rules([{"id": "a", "field": "x", "op": "==", "value": 1}] * 2)
        with self.assertRaises(BadRuleError):
            load_rules(b"[{")


def raw_table():
    columns = [
        Column("state", ColumnKind.CATEGORICAL),
        Column("Spkts"),
        Column("SYN_count", origin=Origin.TEMPORAL),
        Column("ICMP_count", origin=Origin.TEMPORAL),
    ]
    records = [
        {"state": "RST", "Spkts": 1.0, "SYN_count": 40.0, "ICMP_count": 0.0},
        {"state": "CON", "Spkts": 9.0, "SYN_count": 1.0, "ICMP_count": 0.0},
        {"state": None, "Spkts": 1.0, "SYN_count": 0.0, "ICMP_count": 15.0},
        {"state": "RST", "Spkts": 3.0, "SYN_count": 12.0, "ICMP_count": 0.0},
    ]
    missing = [{}, {}, {"state": MissingReason.PLAUSIBLE}, {}]
    keys = [(i * 1000, "10.0.0.1", "10.0.0.2", 40000 + i, 80, 6) for i in range(4)]
    return table_from_records(columns, records, missing, keys, labels=[1, 0, 1, 1])


class TestMisuseDetect(unittest.TestCase):
    def test_verdicts_and_hits(self):
        result = misuse_detect(raw_table(), default_rules())
        self.assertEqual(list(result.verdicts), [1, 0, 1, 1])
        self.assertEqual(
            result.hits,
            {"syn-rate": 1, "syn-reset": 2, "connect-rate": 1, "icmp-sweep": 1},
        )
        self.assertEqual(result.matched[0], ["syn-rate", "syn-reset"])
        self.assertEqual(result.matched[3], ["syn-reset", "connect-rate"])
        self.assertEqual(result.to_dict()["flagged"], 3)

    def test_empty_ruleset(self):
        result = misuse_detect(raw_table(), [])
        self.assertEqual(list(result.verdicts), [0, 0, 0, 0])
        self.assertEqual(result.hits, {})

    def test_csv_round_trip(self):
        result = misuse_detect(raw_table(), default_rules())
        restored = read_misuse_csv(result.to_csv())
        np.testing.assert_array_equal(restored.verdicts, result.verdicts)
        self.assertEqual(restored.matched, result.matched)
        self.assertEqual(restored.hits, result.hits)
        self.assertEqual(restored.keys, result.keys)

    def test_csv_without_verdicts(self):
        with self.assertRaises(SchemaMismatchError):
            read_misuse_csv(b"a,b\r\n1,2\r\n")


class TestCompare(unittest.TestCase):
    def setUp(self):
        self.rows = [(i, "10.0.0.1") for i in range(4)]
        self.labels = [1, 0, 1, 1]

    def test_deltas_and_disagreements(self):
        anomaly = evaluate(self.labels, [0.9, 0.2, 0.8, 0.7], rows=self.rows)
        misuse = evaluate(self.labels, [1, 0, 0, 1], rows=self.rows)
        report = compare(anomaly, misuse)
        self.assertAlmostEqual(report.recall_delta, 1.0 - 2.0 / 3.0)
        self.assertEqual(report.precision_delta, 0.0)
        self.assertEqual(len(report.disagreements), 1)
        self.assertEqual(report.disagreements[0].index, 2)
        self.assertEqual(report.disagreements[0].row, (2, "10.0.0.1"))
        self.assertEqual(report.to_dict()["n_disagreements"], 1)

    def test_row_order_may_differ(self):
        anomaly = evaluate(self.labels, [1, 0, 1, 1], rows=self.rows)
        order = [3, 2, 1, 0]
        misuse = evaluate(
            [self.labels[i] for i in order],
            [1, 0, 1, 1],
            rows=[self.rows[i] for i in order],
        )
        report = compare(anomaly, misuse)
        self.assertEqual([d.index for d in report.disagreements], [1, 2])

    def test_different_row_sets(self):
        anomaly = evaluate(self.labels, [1, 0, 1, 1], rows=self.rows)
        misuse = evaluate(self.labels, [1, 0, 1, 1], rows=self.rows[:3] + [(9, "x")])
        with self.assertRaises(RowSetMismatchError):
            compare(anomaly, misuse)
        with self.assertRaises(RowSetMismatchError):
            compare(evaluate([1, 0], [1, 0]), evaluate([1, 0, 1], [1, 0, 1]))

    def test_benchmark(self):
        table = benchmark(
            {
                "svm": evaluate(self.labels, [0.9, 0.2, 0.8, 0.7]),
                "knn": evaluate(self.labels, [0.9, 0.2, 0.8, 0.7]),
                "gnb": evaluate(self.labels, [0.9, 0.6, 0.4, 0.7]),
            }
        )
        self.assertEqual(table.best().model, "svm")
        lines = table.to_csv().decode("utf-8").split("\r\n")
        self.assertEqual(lines[0], "model,f1,auc,accuracy,far")
        self.assertEqual(lines[1], "svm,1.0,1.0,1.0,0.0")


if __name__ == "__main__":
    unittest.main()
