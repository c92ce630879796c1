"""
Preprocessing of feature tables: merging the feature sets, dropping
uninformative columns, one-hot encoding, imputation and min-max scaling.
"""

import hashlib
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from probewatch.constants import (
    KEY_COLUMNS,
    MISSING_THRESHOLD,
    STRUCTURAL_SENTINEL,
    MissingReason,
)
from probewatch.dataset.table import Column, ColumnKind, FeatureTable
from probewatch.errors import (
    AllDroppedError,
    ArgumentError,
    DuplicateKeyError,
    NoObservedValuesError,
    SchemaMismatchError,
)

logger = logging.getLogger(__name__)

DUP_SUFFIX = "_dup"


def _check_unique_keys(t: FeatureTable, name: str):
    if t.keys is None:
        raise SchemaMismatchError(f"{name} has no row keys")
    dup = t.keys.duplicated()
    if dup.any():
        first = tuple(t.keys[dup].iloc[0])
        raise DuplicateKeyError(f"{name} repeats key {first}")


def merge_feature_sets(
    flow_set: FeatureTable, session_set: FeatureTable, temporal_set: FeatureTable
) -> FeatureTable:
    """
    Joins the three feature sets on (start time, flow key).

    The flow and temporal sets are inner joined; the TCP-only session set is
    left joined and rows it lacks get STRUCTURAL-missing cells. Column names
    that collide with an earlier set are suffixed ``_dup``.

    Args:
        flow_set (FeatureTable): Per-flow features.
        session_set (FeatureTable): Per-session (TCP-only) features.
        temporal_set (FeatureTable): Temporal signal counts.

    Returns:
        FeatureTable: The merged table, in flow-set row order.

    Raises:
        DuplicateKeyError: If a set repeats a key.
    """
    named = (
        (flow_set, "flow set"),
        (session_set, "session set"),
        (temporal_set, "temporal set"),
    )
    for t, name in named:
        _check_unique_keys(t, name)

    keys = list(KEY_COLUMNS)
    left = flow_set.keys.assign(_flow=np.arange(flow_set.n_rows))
    right = temporal_set.keys.assign(_temporal=np.arange(temporal_set.n_rows))
    session = session_set.keys.assign(_session=np.arange(session_set.n_rows))
    joined = left.merge(right, on=keys, how="inner")
    joined = joined.merge(session, on=keys, how="left")
    joined = joined.sort_values("_flow", kind="stable")

    flow_rows = joined["_flow"].to_numpy(dtype=np.int64)
    temporal_rows = joined["_temporal"].to_numpy(dtype=np.int64)
    session_rows = joined["_session"].fillna(-1).to_numpy(dtype=np.int64)

    columns: List[Column] = []
    frames: List[pd.DataFrame] = []
    masks: List[np.ndarray] = []
    seen = set()

    def add(t: FeatureTable, rows: np.ndarray):
        present = rows >= 0
        if t.n_rows:
            safe = np.where(present, rows, 0)
            data = t.data.iloc[safe].reset_index(drop=True)
            mask = t.missing[safe].copy()
        else:
            data = pd.DataFrame({c.name: [None] * len(rows) for c in t.columns})
            mask = np.zeros((len(rows), t.n_cols), dtype=np.int8)
        mask[~present] = MissingReason.STRUCTURAL
        renamed = []
        for col in t.columns:
            name = col.name
            while name in seen:
                name += DUP_SUFFIX
            seen.add(name)
            renamed.append(replace(col, name=name))
        data.columns = [c.name for c in renamed]
        columns.extend(renamed)
        frames.append(data)
        masks.append(mask)

    add(flow_set, flow_rows)
    add(session_set, session_rows)
    add(temporal_set, temporal_rows)

    data = pd.concat(frames, axis=1) if frames else pd.DataFrame()
    if masks:
        missing = np.concatenate(masks, axis=1)
    else:
        missing = np.zeros((len(joined), 0), np.int8)
    labels = None
    if flow_set.labels is not None:
        labels = flow_set.labels[flow_rows]
    merged = FeatureTable(
        columns,
        data,
        missing,
        labels,
        flow_set.keys.iloc[flow_rows].reset_index(drop=True),
    )
    logger.info(
        "merged feature sets into %d rows x %d columns", merged.n_rows, merged.n_cols
    )
    return merged


@dataclass
class DropReport:
    """Columns removed by ``drop_uninformative`` with their reasons."""

    dropped: List[Tuple[str, str]] = field(default_factory=list)

    def reasons(self) -> Dict[str, str]:
        return dict(self.dropped)

    def to_dict(self) -> Dict:
        return {"dropped": [{"name": n, "reason": r} for n, r in self.dropped]}


def _column_signature(t: FeatureTable, j: int) -> bytes:
    col = t.columns[j]
    series = t.data[col.name]
    if col.kind == ColumnKind.CATEGORICAL:
        text = "\x1f".join("\x00" if v is None else str(v) for v in series)
        body = text.encode("utf-8")
    else:
        body = series.to_numpy(dtype=float).tobytes()
    return body + t.missing[:, j].tobytes()


def _has_variation(t: FeatureTable, j: int) -> bool:
    col = t.columns[j]
    observed = t.missing[:, j] == MissingReason.NONE
    values = t.data[col.name][observed]
    if col.kind == ColumnKind.CATEGORICAL:
        return values.nunique() > 1
    values = values.to_numpy(dtype=float)
    return values.size > 0 and float(values.max()) != float(values.min())


def drop_uninformative(
    t: FeatureTable, missing_threshold: float = MISSING_THRESHOLD
) -> Tuple[FeatureTable, DropReport]:
    """
    Removes mostly-missing, repeating and constant columns.

    Columns with more than ``missing_threshold`` missing cells go first
    (reason ``empty``), then exact duplicates of an earlier column (``repeating``),
    then columns without variation among their observed cells (``no-variation``).

    Args:
        t (FeatureTable): A non-empty table.
        missing_threshold (float, optional): Missing fraction limit. Defaults to 0.9.

    Returns:
        Tuple[FeatureTable, DropReport]: Surviving columns and the drop report.

    Raises:
        AllDroppedError: If no column survives.
    """
    report = DropReport()
    keep: List[int] = []
    for j, name in enumerate(t.names):
        if t.missing_fraction(name) > missing_threshold:
            report.dropped.append((name, "empty"))
        else:
            keep.append(j)

    digests: Dict[str, List[int]] = {}
    unique: List[int] = []
    for j in keep:
        signature = _column_signature(t, j)
        digest = hashlib.sha256(signature).hexdigest()
        twins = digests.setdefault(digest, [])
        if any(_column_signature(t, k) == signature for k in twins):
            report.dropped.append((t.names[j], "repeating"))
            continue
        twins.append(j)
        unique.append(j)

    survivors = []
    for j in unique:
        if _has_variation(t, j):
            survivors.append(j)
        else:
            report.dropped.append((t.names[j], "no-variation"))

    if not survivors:
        raise AllDroppedError("every column was dropped as uninformative")
    for name, reason in report.dropped:
        logger.debug("dropped %s (%s)", name, reason)
    logger.info("dropped %d of %d columns", len(report.dropped), t.n_cols)
    return t.select([t.names[j] for j in survivors]), report


def one_hot_encode(
    t: FeatureTable, categories: Optional[Dict[str, Sequence[str]]] = None
) -> FeatureTable:
    """
    Expands each categorical column into one binary column per value.

    Binary columns are named ``<col>_<value>`` in sorted value order. A missing
    categorical cell becomes an all-zero group that keeps the cell's missing reason.

    Args:
        t (FeatureTable): The table.
        categories (Dict[str, Sequence[str]], optional): Fixed value domains per
            column; defaults to the observed values.

    Returns:
        FeatureTable: The encoded table.
    """
    columns: List[Column] = []
    series: Dict[str, pd.Series] = {}
    masks: List[np.ndarray] = []
    for j, col in enumerate(t.columns):
        values = t.data[col.name]
        reason = t.missing[:, j]
        if col.kind != ColumnKind.CATEGORICAL:
            columns.append(col)
            series[col.name] = values
            masks.append(reason)
            continue
        if categories is not None and col.name in categories:
            domain = sorted(str(v) for v in categories[col.name])
        else:
            observed = {
                str(v) for v, r in zip(values, reason) if r == MissingReason.NONE
            }
            domain = sorted(observed)
        text = values.map(lambda v: None if v is None else str(v))
        for value in domain:
            name = f"{col.name}_{value}"
            columns.append(Column(name, ColumnKind.BINARY, col.origin, group=col.name))
            series[name] = (text == value).astype(float)
            masks.append(reason)
    data = pd.DataFrame(series, index=range(t.n_rows))
    missing = np.stack(masks, axis=1) if masks else np.zeros((t.n_rows, 0), np.int8)
    encoded = t.with_columns(columns, data, missing)
    logger.debug("one-hot encoding: %d -> %d columns", t.n_cols, encoded.n_cols)
    return encoded


def categorical_domains(t: FeatureTable) -> Dict[str, List[str]]:
    """Observed value domains of the categorical columns."""
    domains = {}
    for j, col in enumerate(t.columns):
        if col.kind == ColumnKind.CATEGORICAL:
            observed = t.missing[:, j] == MissingReason.NONE
            domains[col.name] = sorted({str(v) for v in t.data[col.name][observed]})
    return domains


class Imputer:
    """
    Fills missing cells with statistics learned from reference (training) rows.

    PLAUSIBLE numeric cells get the column mean (or median); PLAUSIBLE
    categorical cells, and PLAUSIBLE one-hot groups, get the mode; STRUCTURAL
    numeric cells get the sentinel ``-1`` and STRUCTURAL one-hot groups stay
    all zero.

    Args:
        strategy (str, optional): ``"mean"`` or ``"median"``. Defaults to "mean".
        sentinel (float, optional): STRUCTURAL fill value. Defaults to -1.
    """

    def __init__(self, strategy: str = "mean", sentinel: float = STRUCTURAL_SENTINEL):
        if strategy not in ("mean", "median"):
            raise ArgumentError(f"unknown imputation strategy {strategy!r}")
        self.strategy = strategy
        self.sentinel = sentinel
        self.statistics: Dict[str, Optional[object]] = {}

    def fit(self, reference: FeatureTable) -> "Imputer":
        self.statistics = {}
        groups: Dict[str, List[int]] = {}
        for j, col in enumerate(reference.columns):
            observed = reference.missing[:, j] == MissingReason.NONE
            values = reference.data[col.name][observed]
            if col.group is not None:
                groups.setdefault(col.group, []).append(j)
                continue
            if not observed.any():
                self.statistics[col.name] = None
            elif col.kind == ColumnKind.CATEGORICAL:
                self.statistics[col.name] = sorted(values.astype(str).mode())[0]
            elif self.strategy == "median":
                self.statistics[col.name] = float(np.median(values.astype(float)))
            else:
                self.statistics[col.name] = float(np.mean(values.astype(float)))
        for group, idx in groups.items():
            observed = reference.missing[:, idx[0]] == MissingReason.NONE
            if not observed.any():
                self.statistics[group] = None
                continue
            block = reference.matrix([reference.names[j] for j in idx])
            counts = block[observed].sum(axis=0)
            self.statistics[group] = reference.names[idx[int(np.argmax(counts))]]
        return self

    def transform(self, t: FeatureTable) -> FeatureTable:
        """
        Returns ``t`` with every missing cell filled and the mask cleared.

        Raises:
            NoObservedValuesError: If a PLAUSIBLE cell's column had no observed
                reference value.
        """
        if not t.has_missing():
            return t
        data = t.data
        missing = t.missing
        for j, col in enumerate(t.columns):
            plausible = missing[:, j] == MissingReason.PLAUSIBLE
            structural = missing[:, j] == MissingReason.STRUCTURAL
            if not (plausible.any() or structural.any()):
                continue
            if col.group is not None:
                if plausible.any():
                    fill = self._statistic(col.group)
                    data.loc[plausible, col.name] = 1.0 if fill == col.name else 0.0
                data.loc[structural, col.name] = 0.0
            elif col.kind == ColumnKind.CATEGORICAL:
                if plausible.any():
                    data.loc[plausible, col.name] = self._statistic(col.name)
                data.loc[structural, col.name] = format(self.sentinel, "g")
            else:
                if plausible.any():
                    data.loc[plausible, col.name] = self._statistic(col.name)
                data.loc[structural, col.name] = self.sentinel
        return t.with_columns(t.columns, data, np.zeros_like(missing))

    def _statistic(self, name: str):
        value = self.statistics.get(name)
        if value is None:
            raise NoObservedValuesError(
                f"column {name!r} has no observed reference value"
            )
        return value

    def to_dict(self) -> Dict:
        return {
            "strategy": self.strategy,
            "sentinel": self.sentinel,
            "statistics": self.statistics,
        }


def impute(
    t: FeatureTable,
    policy: str = "mean",
    reference: Optional[FeatureTable] = None,
    sentinel: float = STRUCTURAL_SENTINEL,
) -> FeatureTable:
    """
    Fills missing cells of ``t`` with statistics of ``reference``.

    ``reference`` defaults to ``t`` itself.

    Args:
        t (FeatureTable): Table to fill.
        policy (str, optional): ``"mean"`` or ``"median"``. Defaults to "mean".
        reference (FeatureTable, optional): Training rows for the statistics.
        sentinel (float, optional): STRUCTURAL fill. Defaults to -1.

    Returns:
        FeatureTable: The filled table.
    """
    if reference is None:
        reference = t
    return Imputer(policy, sentinel).fit(reference).transform(t)


class MinMaxScaler:
    """
    Maps numeric and binary columns to [0, 1] with training minima and maxima.

    Constant training columns map to 0.
    """

    def __init__(self):
        self.minimum: Dict[str, float] = {}
        self.maximum: Dict[str, float] = {}

    def fit(self, train: FeatureTable) -> "MinMaxScaler":
        for j, col in enumerate(train.columns):
            if col.kind == ColumnKind.CATEGORICAL:
                continue
            observed = train.missing[:, j] == MissingReason.NONE
            values = train.data[col.name].to_numpy(dtype=float)[observed]
            if values.size == 0:
                self.minimum[col.name], self.maximum[col.name] = 0.0, 0.0
            else:
                self.minimum[col.name] = float(values.min())
                self.maximum[col.name] = float(values.max())
        return self

    def transform(self, t: FeatureTable) -> FeatureTable:
        data = t.data
        for name, low in self.minimum.items():
            if name not in data.columns:
                raise SchemaMismatchError(f"column {name!r} missing from table")
            span = self.maximum[name] - low
            values = data[name].to_numpy(dtype=float)
            data[name] = (values - low) / span if span > 0 else np.zeros_like(values)
        return t.with_columns(t.columns, data, t.missing)

    def to_dict(self) -> Dict:
        return {"minimum": self.minimum, "maximum": self.maximum}


def scale(train: FeatureTable) -> MinMaxScaler:
    """Fits a ``MinMaxScaler`` on training rows."""
    return MinMaxScaler().fit(train)


def sample_rows(t: FeatureTable, n: int, seed: int) -> FeatureTable:
    """
    Draws ``n`` rows uniformly without replacement, keeping table order.

    Returns the table unchanged when ``n`` is at least its row count.
    """
    if n >= t.n_rows:
        return t
    rng = np.random.default_rng(seed)
    rows = np.sort(rng.choice(t.n_rows, size=n, replace=False))
    return t.take(rows)
