import unittest

from probewatch.constants import MissingReason
from probewatch.dataset import (
    Column,
    ColumnKind,
    Origin,
    from_csv,
    one_hot_encode,
    schema_json,
    table_from_records,
    to_csv,
)
from probewatch.errors import RaggedRowError, SchemaMismatchError


def sample_table():
    columns = [
        Column("state", ColumnKind.CATEGORICAL),
        Column("Dur"),
        Column("DstTCPBase"),
        Column("SYN_count", origin=Origin.TEMPORAL),
    ]
    records = [
        {"state": "CON", "Dur": 0.1, "DstTCPBase": 12345.0, "SYN_count": 1.0},
        {"state": None, "Dur": 6.06, "DstTCPBase": None, "SYN_count": 40.0},
        {"state": "REQ", "Dur": 0.0, "DstTCPBase": None, "SYN_count": 0.0},
    ]
    structural = {"DstTCPBase": MissingReason.STRUCTURAL}
    missing = [{}, structural, structural]
    keys = [
        (1_000_000, "10.0.0.1", "10.0.0.2", 40000, 80, 6),
        (1_500_000, "10.0.0.9", "10.0.0.2", 50000, 22, 6),
        (2_000_000, "10.0.0.1", "10.0.0.3", 40001, 443, 6),
    ]
    return table_from_records(columns, records, missing, keys, labels=[0, 1, 1])


class TestCsvRoundTrip(unittest.TestCase):
    def test_with_schema(self):
        table = sample_table()
        restored = from_csv(to_csv(table), schema_json(table))
        self.assertTrue(restored.equals(table))

    def test_one_hot_group_keeps_mask(self):
        table = one_hot_encode(sample_table())
        restored = from_csv(to_csv(table), schema_json(table))
        self.assertTrue(restored.equals(table))
        self.assertEqual(restored.column("state_CON").group, "state")

    def test_without_schema_infers_kinds(self):
        restored = from_csv(to_csv(sample_table()))
        self.assertEqual(restored.column("state").kind, ColumnKind.CATEGORICAL)
        self.assertEqual(restored.column("Dur").kind, ColumnKind.NUMERIC)
        self.assertEqual(list(restored.labels), [0, 1, 1])

    def test_deterministic_bytes(self):
        self.assertEqual(to_csv(sample_table()), to_csv(sample_table()))


class TestCsvFormat(unittest.TestCase):
    def test_layout(self):
        text = to_csv(sample_table()).decode("utf-8")
        lines = text.split("\r\n")
        self.assertEqual(
            lines[0],
            "start_us,src_ip,dst_ip,src_port,dst_port,proto,"
            "state,Dur,DstTCPBase,SYN_count,label,missing",
        )
        self.assertEqual(
            lines[1],
            "1000000,10.0.0.1,10.0.0.2,40000,80,6,"
            "CON,0.10000000000000001,12345.0,1.0,0,",
        )
        self.assertEqual(
            lines[2],
            "1500000,10.0.0.9,10.0.0.2,50000,22,6,"
            ",6.0599999999999996,,40.0,1,state=P;DstTCPBase=S",
        )
        self.assertEqual(lines[-1], "")

    def test_ragged_row(self):
        data = b"a,b,missing\r\n1,2,\r\n1,2,3,4\r\n"
        with self.assertRaises(RaggedRowError):
            from_csv(data)

    def test_missing_sidecar(self):
        with self.assertRaises(SchemaMismatchError):
            from_csv(b"a,b\r\n1,2\r\n")

    def test_header_disagrees_with_schema(self):
        table = sample_table()
        schema = schema_json(table)
        schema["columns"] = schema["columns"][:2]
        with self.assertRaises(SchemaMismatchError):
            from_csv(to_csv(table), schema)

    def test_bad_missing_entry(self):
        with self.assertRaises(SchemaMismatchError):
            from_csv(b"a,missing\r\n1,b=S\r\n")


if __name__ == "__main__":
    unittest.main()
