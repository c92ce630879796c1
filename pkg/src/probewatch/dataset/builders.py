"""
Feature-set construction from assembled flows.
"""

from collections import Counter
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from probewatch.constants import Protocol
from probewatch.dataset.preprocess import merge_feature_sets
from probewatch.dataset.table import (
    Column,
    ColumnKind,
    FeatureTable,
    Origin,
    table_from_records,
)
from probewatch.flows.assembler import FlowRecord
from probewatch.flows.features import (
    CATEGORICAL_FEATURES,
    FLOW_FEATURES,
    PROTO_NAMES,
    SESSION_FEATURES,
    extract_flow_features,
)
from probewatch.temporal import COUNT_COLUMNS, TemporalFeatureRow


def _columns(names: Sequence[str], origin: Origin) -> List[Column]:
    columns = []
    for n in names:
        if n in CATEGORICAL_FEATURES:
            columns.append(Column(n, ColumnKind.CATEGORICAL, origin))
        else:
            columns.append(Column(n, ColumnKind.NUMERIC, origin))
    return columns


def flow_tables(
    flows: Sequence[FlowRecord], temporal_rows: Sequence[TemporalFeatureRow]
) -> Tuple[FeatureTable, FeatureTable, FeatureTable]:
    """
    Builds the flow, session and temporal feature sets of a capture.

    The session set holds the TCP-only features of TCP flows; the other two
    sets hold every flow.

    Args:
        flows (Sequence[FlowRecord]): Assembled flows.
        temporal_rows (Sequence[TemporalFeatureRow]): Temporal rows of those flows.

    Returns:
        Tuple[FeatureTable, FeatureTable, FeatureTable]: The flow, session and
        temporal sets.
    """
    vectors = [extract_flow_features(f) for f in flows]
    keys = [f.row_key() for f in flows]

    flow_set = table_from_records(
        _columns(FLOW_FEATURES, Origin.FLOW),
        [{n: v.values[n] for n in FLOW_FEATURES} for v in vectors],
        [{n: r for n, r in v.missing.items() if n in FLOW_FEATURES} for v in vectors],
        keys,
    )
    tcp = [i for i, f in enumerate(flows) if f.proto == Protocol.TCP]
    session_set = table_from_records(
        _columns(SESSION_FEATURES, Origin.FLOW),
        [{n: vectors[i].values[n] for n in SESSION_FEATURES} for i in tcp],
        [
            {n: r for n, r in vectors[i].missing.items() if n in SESSION_FEATURES}
            for i in tcp
        ],
        [keys[i] for i in tcp],
    )
    temporal_set = table_from_records(
        _columns(COUNT_COLUMNS, Origin.TEMPORAL),
        [{n: float(v) for n, v in row.as_dict().items()} for row in temporal_rows],
        None,
        [row.key for row in temporal_rows],
    )
    return flow_set, session_set, temporal_set


def build_feature_table(
    flows: Sequence[FlowRecord], temporal_rows: Sequence[TemporalFeatureRow]
) -> FeatureTable:
    """Merged feature table of a capture, one row per flow."""
    return merge_feature_sets(*flow_tables(flows, temporal_rows))


@dataclass
class FlowSummary:
    """Capture profile over assembled flows."""

    flows: int
    mean_duration: float
    mean_bytes: float
    mean_packets: float
    protocols: Dict[str, int]

    def to_dict(self) -> Dict:
        return {
            "flows": self.flows,
            "mean_duration": self.mean_duration,
            "mean_bytes": self.mean_bytes,
            "mean_packets": self.mean_packets,
            "protocols": self.protocols,
        }


def describe_flows(flows: Sequence[FlowRecord]) -> FlowSummary:
    """
    Mean duration, bytes and packets per flow and the protocol mix.

    Args:
        flows (Sequence[FlowRecord]): Assembled flows.

    Returns:
        FlowSummary: The profile; means are 0 for no flows.
    """
    if not flows:
        return FlowSummary(0, 0.0, 0.0, 0.0, {})
    protocols = Counter(PROTO_NAMES[Protocol(f.proto)] for f in flows)
    return FlowSummary(
        flows=len(flows),
        mean_duration=float(np.mean([f.duration for f in flows])),
        mean_bytes=float(np.mean([f.bytes_a2b + f.bytes_b2a for f in flows])),
        mean_packets=float(np.mean([f.packets_a2b + f.packets_b2a for f in flows])),
        protocols=dict(sorted(protocols.items())),
    )
