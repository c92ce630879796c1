import unittest

import numpy as np

from probewatch.constants import MissingReason, Protocol, TCPFlag
from probewatch.dataset import (
    Column,
    ColumnKind,
    Imputer,
    LabelSet,
    LabelSource,
    Origin,
    build_feature_table,
    combine_labels,
    describe_flows,
    drop_uninformative,
    impute,
    merge_feature_sets,
    one_hot_encode,
    sample_rows,
    scale,
    split,
    table_from_records,
)
from probewatch.errors import (
    AllDroppedError,
    ClassTooSmallError,
    CoverageMismatchError,
    DuplicateKeyError,
    NoObservedValuesError,
    SchemaMismatchError,
)
from probewatch.flows import SESSION_FEATURES, assemble_flows
from probewatch.packet import build_packet
from probewatch.temporal import COUNT_COLUMNS, count_signals_windowed


def key(i):
    return (i * 1000, "10.0.0.1", "10.0.0.2", 40000 + i, 80, 6)


def numeric_table(values, name="x", keys=None, missing=None, labels=None):
    records = [{name: v} for v in values]
    return table_from_records(
        [Column(name)], records, missing=missing, keys=keys, labels=labels
    )


class TestFeatureTable(unittest.TestCase):
    def test_missing_cells_are_nan(self):
        t = numeric_table([1.0, None, 3.0])
        self.assertEqual(list(t.missing[:, 0]), [0, MissingReason.PLAUSIBLE, 0])
        self.assertTrue(np.isnan(t.matrix()[1, 0]))
        self.assertAlmostEqual(t.missing_fraction("x"), 1 / 3)

    def test_labels_must_cover_rows(self):
        with self.assertRaises(CoverageMismatchError):
            numeric_table([1.0, 2.0], labels=[1])

    def test_matrix_rejects_categorical(self):
        column = Column("proto", ColumnKind.CATEGORICAL)
        t = table_from_records([column], [{"proto": "tcp"}])
        with self.assertRaises(SchemaMismatchError):
            t.matrix()

    def test_select_unknown_column(self):
        with self.assertRaises(SchemaMismatchError):
            numeric_table([1.0]).select(["y"])

    def test_take_and_row_keys(self):
        keys = [key(0), key(1), key(2)]
        t = numeric_table([1.0, 2.0, 3.0], keys=keys, labels=[0, 1, 0])
        taken = t.take([2, 0])
        self.assertEqual(taken.row_keys(), [key(2), key(0)])
        self.assertEqual(list(taken.labels), [0, 0])
        self.assertEqual(list(taken.matrix()[:, 0]), [3.0, 1.0])

    def test_row_positions_without_keys(self):
        self.assertEqual(numeric_table([1.0, 2.0]).row_keys(), [(0,), (1,)])


class TestMergeFeatureSets(unittest.TestCase):
    def setUp(self):
        keys = [key(0), key(1), key(2)]
        self.flow_set = numeric_table([1.0, 2.0, 3.0], name="x", keys=keys)
        self.session_set = numeric_table([20.0], name="s", keys=[key(1)])
        self.temporal_set = numeric_table(
            [300.0, 200.0, 100.0], name="x", keys=list(reversed(keys))
        )

    def test_join(self):
        merged = merge_feature_sets(self.flow_set, self.session_set, self.temporal_set)
        self.assertEqual(merged.names, ["x", "s", "x_dup"])
        self.assertEqual(merged.row_keys(), [key(0), key(1), key(2)])
        self.assertEqual(list(merged.matrix(["x_dup"])[:, 0]), [100.0, 200.0, 300.0])
        session = merged.missing[:, merged.index_of("s")]
        structural = MissingReason.STRUCTURAL
        self.assertEqual(list(session), [structural, 0, structural])
        self.assertEqual(merged.matrix(["s"])[1, 0], 20.0)

    def test_inner_join_on_temporal(self):
        temporal = numeric_table([5.0, 6.0], name="t", keys=[key(0), key(2)])
        merged = merge_feature_sets(self.flow_set, self.session_set, temporal)
        self.assertEqual(merged.row_keys(), [key(0), key(2)])

    def test_duplicate_key(self):
        doubled = numeric_table([1.0, 2.0], name="s", keys=[key(1), key(1)])
        with self.assertRaises(DuplicateKeyError):
            merge_feature_sets(self.flow_set, doubled, self.temporal_set)

    def test_sets_need_keys(self):
        with self.assertRaises(SchemaMismatchError):
            merge_feature_sets(
                numeric_table([1.0]), self.session_set, self.temporal_set
            )


class TestBuildFeatureTable(unittest.TestCase):
    def setUp(self):
        syn, ack = int(TCPFlag.SYN), int(TCPFlag.ACK)
        syn_ack = syn | ack
        client, server, dns = "10.0.0.1", "10.0.0.2", "10.0.0.53"
        tcp, udp = Protocol.TCP, Protocol.UDP
        self.packets = [
            build_packet(0, client, server, 40000, 80, tcp, tcp_flags=syn, seq=1),
            build_packet(100, server, client, 80, 40000, tcp, tcp_flags=syn_ack, seq=9),
            build_packet(200, client, server, 40000, 80, tcp, tcp_flags=ack, seq=2),
            build_packet(300, client, dns, 53000, 53, udp, payload_len=30),
            build_packet(900, dns, client, 53, 53000, udp, payload_len=90),
        ]
        self.flows = assemble_flows(self.packets)

    def test_one_row_per_flow(self):
        rows = count_signals_windowed(self.packets, self.flows)
        table = build_feature_table(self.flows, rows)
        self.assertEqual(table.n_rows, 2)
        self.assertEqual(table.n_cols, 15 + len(SESSION_FEATURES) + len(COUNT_COLUMNS))
        self.assertEqual(table.row_keys(), [f.row_key() for f in self.flows])
        udp_row = table.missing[1]
        for name in SESSION_FEATURES:
            self.assertEqual(udp_row[table.index_of(name)], MissingReason.STRUCTURAL)
        self.assertEqual(table.matrix(["SYN_count"])[0, 0], 1.0)
        self.assertEqual(table.column("state").kind, ColumnKind.CATEGORICAL)
        self.assertEqual(table.column("SYN_count").origin, Origin.TEMPORAL)

    def test_describe_flows(self):
        summary = describe_flows(self.flows)
        self.assertEqual(summary.flows, 2)
        self.assertEqual(summary.protocols, {"tcp": 1, "udp": 1})
        self.assertAlmostEqual(summary.mean_packets, 2.5)
        self.assertEqual(describe_flows([]).flows, 0)


class TestDropUninformative(unittest.TestCase):
    def test_reasons(self):
        columns = [Column("empty"), Column("a"), Column("a_copy"), Column("const")]
        records = []
        for i in range(20):
            records.append(
                {
                    "empty": 1.0 if i == 0 else None,
                    "a": float(i),
                    "a_copy": float(i),
                    "const": 7.0,
                }
            )
        table, report = drop_uninformative(table_from_records(columns, records))
        self.assertEqual(table.names, ["a"])
        self.assertEqual(
            report.reasons(),
            {"empty": "empty", "a_copy": "repeating", "const": "no-variation"},
        )
        first = report.to_dict()["dropped"][0]
        self.assertEqual(first, {"name": "empty", "reason": "empty"})

    def test_threshold_is_exclusive(self):
        columns = [Column("half"), Column("b")]
        records = [{"half": 1.0 if i % 2 else None, "b": float(i)} for i in range(10)]
        # half-missing survives a 0.5 threshold but has no variation
        table, report = drop_uninformative(table_from_records(columns, records), 0.5)
        self.assertEqual(report.reasons()["half"], "no-variation")
        table, report = drop_uninformative(table_from_records(columns, records), 0.4)
        self.assertEqual(report.reasons()["half"], "empty")

    def test_all_dropped(self):
        with self.assertRaises(AllDroppedError):
            drop_uninformative(numeric_table([1.0, 1.0, 1.0]))


class TestOneHotEncode(unittest.TestCase):
    def setUp(self):
        self.table = table_from_records(
            [Column("state", ColumnKind.CATEGORICAL), Column("x")],
            [
                {"state": "REQ", "x": 1.0},
                {"state": "CON", "x": 2.0},
                {"state": None, "x": 3.0},
                {"state": "CON", "x": 4.0},
            ],
        )

    def test_expansion(self):
        encoded = one_hot_encode(self.table)
        self.assertEqual(encoded.names, ["state_CON", "state_REQ", "x"])
        self.assertEqual(encoded.column("state_CON").group, "state")
        self.assertEqual(encoded.column("state_CON").kind, ColumnKind.BINARY)
        np.testing.assert_array_equal(
            encoded.matrix(["state_CON", "state_REQ"]), [[0, 1], [1, 0], [0, 0], [1, 0]]
        )
        self.assertEqual(encoded.missing[2, 0], MissingReason.PLAUSIBLE)
        self.assertEqual(encoded.missing[2, 1], MissingReason.PLAUSIBLE)

    def test_fixed_domain(self):
        encoded = one_hot_encode(self.table, {"state": ["CON", "FIN", "REQ"]})
        self.assertEqual(encoded.names, ["state_CON", "state_FIN", "state_REQ", "x"])
        self.assertEqual(encoded.matrix(["state_FIN"]).sum(), 0.0)

    def test_group_imputed_with_mode(self):
        encoded = one_hot_encode(self.table)
        filled = impute(encoded)
        self.assertFalse(filled.has_missing())
        row = filled.matrix(["state_CON", "state_REQ"])[2]
        np.testing.assert_array_equal(row, [1.0, 0.0])


class TestImputer(unittest.TestCase):
    def test_mean_and_median(self):
        t = numeric_table([1.0, None, 3.0, 10.0])
        self.assertAlmostEqual(impute(t).matrix()[1, 0], 14.0 / 3)
        self.assertEqual(impute(t, "median").matrix()[1, 0], 3.0)

    def test_structural_sentinel(self):
        t = numeric_table(
            [1.0, None, 3.0], missing=[{}, {"x": MissingReason.STRUCTURAL}, {}]
        )
        filled = impute(t)
        self.assertEqual(filled.matrix()[1, 0], -1.0)
        self.assertEqual(impute(t, sentinel=-5.0).matrix()[1, 0], -5.0)

    def test_reference_statistics(self):
        train = numeric_table([2.0, 4.0])
        test = numeric_table([None, 100.0])
        imputer = Imputer().fit(train)
        self.assertEqual(imputer.transform(test).matrix()[0, 0], 3.0)
        self.assertEqual(imputer.to_dict()["statistics"], {"x": 3.0})

    def test_categorical_mode(self):
        t = table_from_records(
            [Column("proto", ColumnKind.CATEGORICAL)],
            [{"proto": "udp"}, {"proto": "tcp"}, {"proto": "tcp"}, {"proto": None}],
        )
        self.assertEqual(impute(t).data["proto"][3], "tcp")

    def test_no_observed_values(self):
        t = numeric_table([None, None])
        with self.assertRaises(NoObservedValuesError):
            impute(t)

    def test_unknown_strategy(self):
        with self.assertRaises(ValueError):
            Imputer("mode")


class TestScale(unittest.TestCase):
    def test_train_range(self):
        train = table_from_records(
            [Column("x"), Column("c")],
            [{"x": 0.0, "c": 3.0}, {"x": 5.0, "c": 3.0}, {"x": 10.0, "c": 3.0}],
        )
        scaler = scale(train)
        scaled = scaler.transform(train).matrix()
        np.testing.assert_allclose(scaled, [[0, 0], [0.5, 0], [1, 0]])
        test = table_from_records([Column("x"), Column("c")], [{"x": 20.0, "c": 4.0}])
        np.testing.assert_allclose(scaler.transform(test).matrix(), [[2.0, 0.0]])
        self.assertEqual(scaler.to_dict()["maximum"], {"x": 10.0, "c": 3.0})

    def test_column_absent(self):
        scaler = scale(numeric_table([0.0, 1.0]))
        with self.assertRaises(SchemaMismatchError):
            scaler.transform(numeric_table([0.5], name="y"))


class TestSampleRows(unittest.TestCase):
    def test_keeps_order(self):
        t = numeric_table([float(i) for i in range(50)])
        sampled = sample_rows(t, 10, seed=3)
        values = list(sampled.matrix()[:, 0])
        self.assertEqual(len(values), 10)
        self.assertEqual(values, sorted(values))
        self.assertEqual(values, list(sample_rows(t, 10, seed=3).matrix()[:, 0]))

    def test_larger_than_table(self):
        t = numeric_table([1.0, 2.0])
        self.assertIs(sample_rows(t, 5, seed=0), t)


class TestSplit(unittest.TestCase):
    def setUp(self):
        labels = [1] * 20 + [0] * 80
        self.table = numeric_table(
            [float(i) for i in range(100)],
            keys=[key(i) for i in range(100)],
            labels=labels,
        )

    def test_stratified_sizes(self):
        train, val, test = split(self.table, seed=1)
        self.assertEqual((train.n_rows, val.n_rows, test.n_rows), (60, 20, 20))
        self.assertEqual(int(train.labels.sum()), 12)
        self.assertEqual(int(val.labels.sum()), 4)
        self.assertEqual(int(test.labels.sum()), 4)

    def test_disjoint_and_complete(self):
        parts = split(self.table, seed=2)
        keys = [k for p in parts for k in p.row_keys()]
        self.assertEqual(len(keys), 100)
        self.assertEqual(set(keys), set(self.table.row_keys()))

    def test_deterministic(self):
        a = split(self.table, seed=5)
        b = split(self.table, seed=5)
        for x, y in zip(a, b):
            self.assertTrue(x.equals(y))

    def test_rows_keep_table_order(self):
        train, _, _ = split(self.table, seed=0)
        values = list(train.matrix()[:, 0])
        self.assertEqual(values, sorted(values))

    def test_unstratified(self):
        train, val, test = split(self.table, (0.5, 0.25, 0.25), seed=0, stratify=False)
        self.assertEqual((train.n_rows, val.n_rows, test.n_rows), (50, 25, 25))

    def test_class_too_small(self):
        t = numeric_table([1.0, 2.0, 3.0, 4.0], labels=[1, 0, 0, 0])
        with self.assertRaises(ClassTooSmallError):
            split(t)

    def test_absent_class_is_too_small(self):
        t = numeric_table([float(i) for i in range(10)], labels=[0] * 10)
        for stratify in (True, False):
            with self.subTest(stratify=stratify):
                with self.assertRaises(ClassTooSmallError) as ctx:
                    split(t, stratify=stratify)
                self.assertIn("class 1 has 0 rows", str(ctx.exception))

    def test_bad_ratios(self):
        with self.assertRaises(ValueError):
            split(self.table, (0.5, 0.5, 0.5))


class TestCombineLabels(unittest.TestCase):
    def setUp(self):
        self.keys = [key(0), key(1), key(2)]

    def test_logical_or(self):
        votes = {key(0): 1, key(1): 0, key(2): 0}
        expert = LabelSet(LabelSource.EXPERT_GROUND_TRUTH, votes)
        rules = LabelSet.from_sequence(LabelSource.RULE_ENGINE, self.keys, [0, 1, 0])
        labels, report = combine_labels([expert, rules], self.keys)
        self.assertEqual(list(labels), [1, 1, 0])
        self.assertEqual(report.conflicts, 2)
        self.assertEqual(report.positives, {"expert_ground_truth": 1, "rule_engine": 1})
        self.assertEqual(report.combined_positives, 2)

    def test_empty_set_abstains(self):
        expert = LabelSet.from_sequence(
            LabelSource.EXPERT_GROUND_TRUTH, self.keys, [0, 1, 1]
        )
        labels, report = combine_labels([expert, LabelSet(LabelSource.SIGNATURE_IDS)])
        self.assertEqual(list(labels), [0, 1, 1])
        self.assertEqual(report.conflicts, 0)

    def test_coverage_mismatch(self):
        expert = LabelSet.from_sequence(
            LabelSource.EXPERT_GROUND_TRUTH, self.keys, [0, 1, 1]
        )
        rules = LabelSet.from_sequence(LabelSource.RULE_ENGINE, self.keys[:2], [0, 1])
        with self.assertRaises(CoverageMismatchError):
            combine_labels([expert, rules])

    def test_no_votes(self):
        with self.assertRaises(CoverageMismatchError):
            combine_labels([LabelSet(LabelSource.RULE_ENGINE)])

    def test_length_mismatch(self):
        with self.assertRaises(CoverageMismatchError):
            LabelSet.from_sequence(LabelSource.RULE_ENGINE, self.keys, [1])


if __name__ == "__main__":
    unittest.main()
