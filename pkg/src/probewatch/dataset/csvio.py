"""
CSV persistence of feature tables.

Layout: the key columns (when the table has keys), the feature columns, the
optional ``label`` column and a trailing ``missing`` sidecar whose cells list
``name=S`` / ``name=P`` entries separated by ``;``. Missing cells are empty.
Column kinds, origins and one-hot groups travel in a companion schema document.
"""

import csv
import io
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from probewatch.constants import (
    KEY_COLUMNS,
    LABEL_COLUMN,
    MISSING_COLUMN,
    MissingReason,
)
from probewatch.dataset.table import Column, ColumnKind, FeatureTable, Origin
from probewatch.errors import RaggedRowError, SchemaMismatchError
from probewatch.utils import Source, format_float, read_source

_REASON_CODES = {MissingReason.STRUCTURAL: "S", MissingReason.PLAUSIBLE: "P"}
_CODE_REASONS = {v: k for k, v in _REASON_CODES.items()}


def schema_json(t: FeatureTable) -> Dict:
    """The companion schema document of a table."""
    return {
        "columns": [c.to_dict() for c in t.columns],
        "keys": t.keys is not None,
        "labels": t.labels is not None,
    }


def _cell(value, kind: ColumnKind) -> str:
    if kind == ColumnKind.CATEGORICAL:
        return str(value)
    return format_float(value)


def to_csv(t: FeatureTable) -> bytes:
    """
    Renders a table as RFC-4180 CSV with CRLF line endings.

    Args:
        t (FeatureTable): The table.

    Returns:
        bytes: UTF-8 CSV.
    """
    out: Dict[str, List[str]] = {}
    if t.keys is not None:
        for name in KEY_COLUMNS:
            out[name] = [str(v) for v in t.keys[name]]
    data, missing = t.data, t.missing
    for j, col in enumerate(t.columns):
        blank = (missing[:, j] != MissingReason.NONE) & (col.group is None)
        out[col.name] = [
            "" if blank[i] else _cell(v, col.kind)
            for i, v in enumerate(data[col.name])
        ]
    if t.labels is not None:
        out[LABEL_COLUMN] = [str(int(v)) for v in t.labels]
    sidecar = []
    for i in range(t.n_rows):
        flagged = np.flatnonzero(missing[i])
        codes = [_REASON_CODES[MissingReason(missing[i, j])] for j in flagged]
        sidecar.append(";".join(f"{t.names[j]}={c}" for j, c in zip(flagged, codes)))
    out[MISSING_COLUMN] = sidecar
    header = list(out)
    frame = pd.DataFrame(out, columns=header)
    buf = io.StringIO()
    frame.to_csv(buf, index=False, lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL)
    return buf.getvalue().encode("utf-8")


def _check_arity(text: str):
    rows = csv.reader(io.StringIO(text, newline=""))
    width = None
    for i, row in enumerate(rows):
        if width is None:
            width = len(row)
        elif row and len(row) != width:
            raise RaggedRowError(
                f"row {i} has {len(row)} cells, the header has {width}"
            )


def _read_frame(data: bytes) -> pd.DataFrame:
    text = data.decode("utf-8")
    _check_arity(text)
    try:
        frame = pd.read_csv(
            io.StringIO(text), dtype=str, keep_default_na=False, na_filter=False
        )
    except pd.errors.ParserError as e:
        raise RaggedRowError(str(e)) from e
    except pd.errors.EmptyDataError as e:
        raise SchemaMismatchError("CSV has no header") from e
    frame = frame.fillna("")
    if any(str(c).startswith("Unnamed:") for c in frame.columns):
        raise SchemaMismatchError("CSV header has an empty column name")
    return frame


def _infer_columns(
    frame: pd.DataFrame, names: List[str], mask: np.ndarray
) -> List[Column]:
    columns = []
    for j, name in enumerate(names):
        observed = frame[name][mask[:, j] == MissingReason.NONE]
        numeric = pd.to_numeric(observed, errors="coerce")
        if numeric.isna().any():
            kind = ColumnKind.CATEGORICAL
        else:
            kind = ColumnKind.NUMERIC
        columns.append(Column(name, kind, Origin.EXTERNAL))
    return columns


def from_csv(source: Source, schema: Optional[Dict] = None) -> FeatureTable:
    """
    Parses a table written by ``to_csv``.

    Args:
        source (Source): CSV bytes, path, URL or handle.
        schema (Dict, optional): Companion schema; kinds are inferred without it.

    Returns:
        FeatureTable: The table.

    Raises:
        SchemaMismatchError: If the header disagrees with the schema or lacks
            the sidecar.
        RaggedRowError: If a row's cell count differs from the header's.
    """
    frame = _read_frame(read_source(source))
    header = [str(c) for c in frame.columns]
    if len(set(header)) != len(header):
        raise SchemaMismatchError("CSV header repeats a column name")
    if not header or header[-1] != MISSING_COLUMN:
        raise SchemaMismatchError(
            f"CSV header must end with the {MISSING_COLUMN!r} column"
        )

    has_keys = header[: len(KEY_COLUMNS)] == list(KEY_COLUMNS)
    has_labels = len(header) >= 2 and header[-2] == LABEL_COLUMN
    names = header[len(KEY_COLUMNS) if has_keys else 0 : -2 if has_labels else -1]
    if schema is not None:
        expected = [c["name"] for c in schema["columns"]]
        if (
            expected != names
            or bool(schema.get("keys", has_keys)) != has_keys
            or bool(schema.get("labels", has_labels)) != has_labels
        ):
            raise SchemaMismatchError("CSV header does not match the schema")

    mask = np.zeros((len(frame), len(names)), dtype=np.int8)
    position = {n: j for j, n in enumerate(names)}
    for i, cell in enumerate(frame[MISSING_COLUMN]):
        if not cell:
            continue
        for entry in cell.split(";"):
            name, _, code = entry.rpartition("=")
            if name not in position or code not in _CODE_REASONS:
                raise SchemaMismatchError(f"bad missing entry {entry!r} on row {i + 1}")
            mask[i, position[name]] = _CODE_REASONS[code]

    if schema is not None:
        columns = [Column.from_dict(c) for c in schema["columns"]]
    else:
        columns = _infer_columns(frame, names, mask)

    cells = {}
    for j, col in enumerate(columns):
        raw = frame[col.name]
        if col.kind == ColumnKind.CATEGORICAL:
            cells[col.name] = raw.astype(object)
        else:
            values = pd.to_numeric(raw.replace("", "nan"), errors="coerce")
            cells[col.name] = values.astype(float)
    data = pd.DataFrame(cells, columns=names, index=frame.index)

    labels = None
    if has_labels:
        labels = frame[LABEL_COLUMN].astype(np.int64).to_numpy()
    keys = None
    if has_keys:
        keys = frame[list(KEY_COLUMNS)].copy()
        for name in ("start_us", "src_port", "dst_port", "proto"):
            keys[name] = keys[name].astype(np.int64)
    return FeatureTable(columns, data, mask, labels, keys)
