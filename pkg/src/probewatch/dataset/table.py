"""
The FeatureTable: a column-schema'd frame with a per-cell missing mask,
optional binary labels and optional per-row join keys.
"""

from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from probewatch.constants import KEY_COLUMNS, MissingReason
from probewatch.errors import (
    ArgumentError,
    CoverageMismatchError,
    SchemaMismatchError,
)


class ColumnKind(str, Enum):
    NUMERIC = "numeric"
    CATEGORICAL = "categorical"
    BINARY = "binary"


class Origin(str, Enum):
    FLOW = "flow"
    TEMPORAL = "temporal"
    EXTERNAL = "external"


@dataclass(frozen=True)
class Column:
    """
    Schema entry of one column.

    Attributes:
        name (str): Column name, unique within a table.
        kind (ColumnKind): Value kind.
        origin (Origin): Feature set the column came from.
        group (str, optional): Source categorical of a one-hot binary column.
    """

    name: str
    kind: ColumnKind = ColumnKind.NUMERIC
    origin: Origin = Origin.FLOW
    group: Optional[str] = None

    def to_dict(self) -> Dict:
        return {
            "name": self.name,
            "kind": self.kind.value,
            "origin": self.origin.value,
            "group": self.group,
        }

    @classmethod
    def from_dict(cls, d: Dict) -> "Column":
        return cls(
            name=d["name"],
            kind=ColumnKind(d.get("kind", "numeric")),
            origin=Origin(d.get("origin", "flow")),
            group=d.get("group"),
        )


class FeatureTable:
    """
    An immutable feature matrix.

    Cells of numeric and categorical columns flagged missing hold NaN/None.
    One-hot binary cells of a missing categorical hold 0 and keep the mask.

    Args:
        columns (Sequence[Column]): Ordered schema.
        data (pd.DataFrame): Cell values, columns named as the schema.
        missing (np.ndarray, optional): ``int8`` reasons, shape (rows, columns).
        labels (np.ndarray, optional): Binary labels, one per row.
        keys (pd.DataFrame, optional): Per-row join keys with ``KEY_COLUMNS``.

    Raises:
        SchemaMismatchError: If data, mask or keys disagree with the schema.
        CoverageMismatchError: If labels do not cover every row.
    """

    def __init__(
        self,
        columns: Sequence[Column],
        data: pd.DataFrame,
        missing: Optional[np.ndarray] = None,
        labels: Optional[Sequence[int]] = None,
        keys: Optional[pd.DataFrame] = None,
    ):
        self._columns = list(columns)
        names = [c.name for c in self._columns]
        if len(set(names)) != len(names):
            raise SchemaMismatchError("duplicate column names")
        if list(data.columns) != names:
            raise SchemaMismatchError("data columns do not match the schema")
        n = len(data)
        if missing is None:
            missing = np.zeros((n, len(names)), dtype=np.int8)
        missing = np.asarray(missing, dtype=np.int8).reshape(n, len(names))
        data = data.reset_index(drop=True).copy()
        for j, col in enumerate(self._columns):
            flagged = missing[:, j] != MissingReason.NONE
            if col.kind == ColumnKind.CATEGORICAL:
                data[col.name] = data[col.name].astype(object)
                if flagged.any():
                    data.loc[flagged, col.name] = None
            else:
                numeric = pd.to_numeric(data[col.name], errors="coerce")
                data[col.name] = numeric.astype(float)
                if flagged.any():
                    data.loc[flagged, col.name] = 0.0 if col.group else np.nan
        if labels is not None:
            labels = np.asarray(labels, dtype=np.int64).reshape(-1)
            if len(labels) != n:
                raise CoverageMismatchError(f"{len(labels)} labels for {n} rows")
        if keys is not None:
            if list(keys.columns) != list(KEY_COLUMNS):
                raise SchemaMismatchError("key columns do not match")
            if len(keys) != n:
                raise SchemaMismatchError(f"{len(keys)} keys for {n} rows")
            keys = keys.reset_index(drop=True).copy()
        self._data = data
        self._missing = missing
        self._labels = labels
        self._keys = keys

    @classmethod
    def empty(
        cls, columns: Sequence[Column] = (), with_keys: bool = True
    ) -> "FeatureTable":
        data = pd.DataFrame({c.name: pd.Series([], dtype=_dtype(c)) for c in columns})
        keys = pd.DataFrame({k: [] for k in KEY_COLUMNS}) if with_keys else None
        return cls(columns, data, keys=keys)

    @property
    def columns(self) -> List[Column]:
        return list(self._columns)

    @property
    def names(self) -> List[str]:
        return [c.name for c in self._columns]

    @property
    def data(self) -> pd.DataFrame:
        return self._data.copy()

    @property
    def missing(self) -> np.ndarray:
        return self._missing.copy()

    @property
    def labels(self) -> Optional[np.ndarray]:
        return None if self._labels is None else self._labels.copy()

    @property
    def keys(self) -> Optional[pd.DataFrame]:
        return None if self._keys is None else self._keys.copy()

    @property
    def n_rows(self) -> int:
        return len(self._data)

    @property
    def n_cols(self) -> int:
        return len(self._columns)

    def __len__(self):
        return self.n_rows

    def column(self, name: str) -> Column:
        for col in self._columns:
            if col.name == name:
                return col
        raise SchemaMismatchError(f"no column named {name!r}")

    def index_of(self, name: str) -> int:
        return self.names.index(name)

    def missing_fraction(self, name: str) -> float:
        if self.n_rows == 0:
            return 0.0
        flags = self._missing[:, self.index_of(name)] != MissingReason.NONE
        return float(np.mean(flags))

    def has_missing(self) -> bool:
        return bool((self._missing != MissingReason.NONE).any())

    def row_keys(self) -> List[Tuple]:
        """Join keys as tuples, or row positions when the table has no keys."""
        if self._keys is None:
            return [(i,) for i in range(self.n_rows)]
        return list(self._keys.itertuples(index=False, name=None))

    def matrix(self, names: Optional[Sequence[str]] = None) -> np.ndarray:
        """
        Returns the float matrix of numeric and binary columns.

        Args:
            names (Sequence[str], optional): Columns to take, in order. Defaults to all.

        Raises:
            SchemaMismatchError: If a requested column is categorical or absent.
        """
        names = self.names if names is None else list(names)
        for name in names:
            if self.column(name).kind == ColumnKind.CATEGORICAL:
                raise SchemaMismatchError(f"column {name!r} is categorical")
        if not names:
            return np.zeros((self.n_rows, 0))
        return self._data[names].to_numpy(dtype=float)

    def select(self, names: Sequence[str]) -> "FeatureTable":
        """Returns a table restricted to ``names``, in that order."""
        idx = [self.index_of(n) if n in self.names else None for n in names]
        if None in idx:
            absent = [n for n, i in zip(names, idx) if i is None]
            raise SchemaMismatchError(f"unknown columns {absent}")
        return FeatureTable(
            [self._columns[i] for i in idx],
            self._data[list(names)],
            self._missing[:, idx],
            self._labels,
            self._keys,
        )

    def drop(self, names: Iterable[str]) -> "FeatureTable":
        gone = set(names)
        return self.select([n for n in self.names if n not in gone])

    def take(self, rows: Sequence[int]) -> "FeatureTable":
        """Returns the rows at positions ``rows``, in that order."""
        rows = np.asarray(rows, dtype=np.int64)
        return FeatureTable(
            self._columns,
            self._data.iloc[rows],
            self._missing[rows],
            None if self._labels is None else self._labels[rows],
            None if self._keys is None else self._keys.iloc[rows],
        )

    def with_labels(self, labels: Optional[Sequence[int]]) -> "FeatureTable":
        return FeatureTable(
            self._columns, self._data, self._missing, labels, self._keys
        )

    def with_columns(
        self, columns: Sequence[Column], data: pd.DataFrame, missing: np.ndarray
    ) -> "FeatureTable":
        """A table with a new schema and cells over the same rows, labels and keys."""
        return FeatureTable(columns, data, missing, self._labels, self._keys)

    def rename_origin(self, origin: Origin) -> "FeatureTable":
        columns = [replace(c, origin=origin) for c in self._columns]
        return self.with_columns(columns, self._data, self._missing)

    def require_labels(self) -> np.ndarray:
        if self._labels is None:
            raise ArgumentError("table carries no labels")
        return self._labels.copy()

    def equals(self, other: "FeatureTable") -> bool:
        """Cell, mask, label and key equality with NaN treated as equal."""
        if self._columns != other._columns:
            return False
        if not np.array_equal(self._missing, other._missing):
            return False
        if not self._data.equals(other._data):
            return False
        if (self._labels is None) != (other._labels is None):
            return False
        if self._labels is not None and not np.array_equal(self._labels, other._labels):
            return False
        if (self._keys is None) != (other._keys is None):
            return False
        if self._keys is not None:
            mine = list(self._keys.itertuples(index=False, name=None))
            theirs = list(other._keys.itertuples(index=False, name=None))
            return mine == theirs
        return True

    def __repr__(self):
        return f"FeatureTable(rows={self.n_rows}, columns={self.n_cols})"


def _dtype(col: Column):
    return object if col.kind == ColumnKind.CATEGORICAL else float


def keys_frame(keys: Sequence[Tuple]) -> pd.DataFrame:
    """Builds a key frame from ``(start_us, src, dst, sport, dport, proto)`` tuples."""
    frame = pd.DataFrame(list(keys), columns=list(KEY_COLUMNS))
    if not len(frame):
        return pd.DataFrame({k: [] for k in KEY_COLUMNS})
    for name in ("start_us", "src_port", "dst_port", "proto"):
        frame[name] = frame[name].astype(np.int64)
    return frame


def table_from_records(
    columns: Sequence[Column],
    records: Sequence[Dict],
    missing: Optional[Sequence[Dict[str, MissingReason]]] = None,
    keys: Optional[Sequence[Tuple]] = None,
    labels: Optional[Sequence[int]] = None,
) -> FeatureTable:
    """
    Builds a table from per-row dictionaries.

    Args:
        columns (Sequence[Column]): Schema.
        records (Sequence[Dict]): Row values by column name; absent names are missing.
        missing (Sequence[Dict], optional): Per-row explicit missing reasons.
        keys (Sequence[Tuple], optional): Per-row join keys.
        labels (Sequence[int], optional): Per-row labels.
    """
    names = [c.name for c in columns]
    mask = np.zeros((len(records), len(names)), dtype=np.int8)
    for i, record in enumerate(records):
        reasons = missing[i] if missing is not None else {}
        for j, name in enumerate(names):
            if name in reasons:
                mask[i, j] = reasons[name]
            elif record.get(name) is None:
                mask[i, j] = MissingReason.PLAUSIBLE
    data = pd.DataFrame(
        {
            c.name: pd.Series([r.get(c.name) for r in records], dtype=_dtype(c))
            for c in columns
        }
    )
    return FeatureTable(
        columns,
        data,
        mask,
        labels,
        None if keys is None else keys_frame(keys),
    )
