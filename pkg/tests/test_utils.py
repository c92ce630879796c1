import io
import json
import os
import tempfile
import unittest
from pathlib import Path
from unittest.mock import MagicMock, patch

import numpy as np
import requests

from probewatch.utils import (
    dump_json,
    format_float,
    parse_float,
    read_json,
    read_source,
    write_json,
)


class Artifact:
    def to_dict(self):
        return {"b": np.float64(0.1), "a": np.int64(3)}


class TestFormatFloat(unittest.TestCase):
    def test_seventeen_digits(self):
        self.assertEqual(format_float(0.1), "0.10000000000000001")
        self.assertEqual(format_float(2.0), "2.0")
        self.assertEqual(format_float(-3), "-3.0")

    def test_non_finite(self):
        self.assertEqual(format_float(float("inf")), "inf")
        self.assertEqual(format_float(-np.inf), "-inf")
        self.assertEqual(format_float(np.nan), "nan")

    def test_parse_is_exact(self):
        for value in (0.1, 1.0 / 3.0, 2.5e-17, -7.0, 123456789.123):
            self.assertEqual(parse_float(format_float(value)), value)


class TestDumpJson(unittest.TestCase):
    def test_sorted_keys_and_floats(self):
        text = dump_json({"z": 0.5, "a": [1, np.float32(0.25)], "m": True})
        self.assertEqual(list(json.loads(text)), ["a", "m", "z"])
        self.assertIn('"z": 0.5', text)
        self.assertTrue(text.endswith("\n"))

    def test_numpy_and_to_dict(self):
        value = {"arr": np.arange(3), "obj": Artifact(), "flag": np.bool_(False)}
        text = dump_json(value)
        doc = json.loads(text)
        self.assertEqual(doc["arr"], [0, 1, 2])
        self.assertEqual(doc["obj"], {"a": 3, "b": 0.1})
        self.assertIs(doc["flag"], False)
        self.assertIn('"b": 0.10000000000000001', text)

    def test_non_finite_become_strings(self):
        doc = json.loads(dump_json([np.inf, -np.inf, np.nan]))
        self.assertEqual(doc, ["inf", "-inf", "nan"])
        self.assertTrue(np.isinf(parse_float(doc[0])))

    def test_deterministic(self):
        obj = {"b": {"y": 1.0 / 3.0, "x": 2}, "a": [0.1, 0.2]}
        self.assertEqual(dump_json(obj), dump_json(json.loads(dump_json(obj))))

    def test_write_and_read(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_json(os.path.join(tmp, "nested", "doc.json"), {"x": 1.5})
            self.assertTrue(path.is_file())
            self.assertEqual(read_json(path), {"x": 1.5})
            self.assertEqual(read_json(str(path)), {"x": 1.5})


class TestReadSource(unittest.TestCase):
    def test_bytes_and_handles(self):
        self.assertEqual(read_source(b"abc"), b"abc")
        self.assertEqual(read_source(bytearray(b"abc")), b"abc")
        self.assertEqual(read_source(io.BytesIO(b"xyz")), b"xyz")
        self.assertEqual(read_source(io.StringIO("xyz")), b"xyz")

    def test_paths(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "data.bin"
            path.write_bytes(b"\x00\x01")
            self.assertEqual(read_source(path), b"\x00\x01")
            self.assertEqual(read_source(str(path)), b"\x00\x01")

    def test_missing_file(self):
        with self.assertRaises(FileNotFoundError):
            read_source("/nonexistent/probewatch/file.csv")

    @patch("requests.get")
    def test_url(self, mock_get):
        mock_response = MagicMock()
        mock_response.content = b"remote"
        mock_get.return_value = mock_response

        self.assertEqual(read_source("https://example.com/data.csv"), b"remote")
        mock_get.assert_called_once_with("https://example.com/data.csv", timeout=60)
        mock_response.raise_for_status.assert_called_once()

    @patch("requests.get")
    def test_url_error(self, mock_get):
        mock_response = MagicMock()
        mock_response.raise_for_status.side_effect = requests.HTTPError("404")
        mock_get.return_value = mock_response

        with self.assertRaises(requests.HTTPError):
            read_source("http://example.com/missing.csv")


if __name__ == "__main__":
    unittest.main()
