"""
Per-flow feature extraction.
"""

from dataclasses import dataclass, field
from typing import Dict, Optional, Union

from probewatch.constants import MICROS, MissingReason, Protocol
from probewatch.flows.assembler import FlowRecord, flow_state

Value = Union[float, str, None]

CATEGORICAL_FEATURES = ("state", "proto")

FLOW_FEATURES = (
    "state",
    "proto",
    "sTtl",
    "dTtl",
    "Dport",
    "Dur",
    "Spkts",
    "Dpkts",
    "sbytes",
    "dbytes",
    "sMeanPktSz",
    "dMeanPktSz",
    "PCRatio",
    "idletime_max_a2b",
    "idletime_max_b2a",
)

# defined for TCP flows only
SESSION_FEATURES = (
    "mss_requested_a2b",
    "mss_requested_b2a",
    "SrcTCPBase",
    "DstTCPBase",
    "min_segm_size_a2b",
    "max_segm_size_a2b",
    "min_segm_size_b2a",
    "max_segm_size_b2a",
    "adv_wind_scale_a2b",
    "adv_wind_scale_b2a",
    "FIN_pkts_a2b",
    "FIN_pkts_b2a",
)

PROTO_NAMES = {Protocol.TCP: "tcp", Protocol.UDP: "udp", Protocol.ICMP: "icmp"}


@dataclass
class FlowFeatureVector:
    """
    Named feature values of one flow.

    Attributes:
        values (Dict[str, Value]): Feature name to value; None where missing.
        missing (Dict[str, MissingReason]): Reasons for the missing names.
    """

    values: Dict[str, Value]
    missing: Dict[str, MissingReason] = field(default_factory=dict)

    def __getitem__(self, name: str) -> Value:
        return self.values[name]

    def get(self, name: str, default: Value = None) -> Value:
        return self.values.get(name, default)

    def is_missing(self, name: str) -> bool:
        return name in self.missing


def pc_ratio(bytes_a2b: int, bytes_b2a: int) -> float:
    """Producer/consumer ratio in [-1, 1]; 0 when no bytes flowed."""
    total = bytes_a2b + bytes_b2a
    if total == 0:
        return 0.0
    return (bytes_a2b - bytes_b2a) / total


def _mean(total: int, count: int) -> float:
    return total / count if count else 0.0


def extract_flow_features(flow: FlowRecord) -> FlowFeatureVector:
    """
    Computes the feature vector of a flow.

    TCP-only features of UDP and ICMP flows, and ``DstTCPBase`` of a TCP flow
    whose responder never answered, are marked structurally missing.

    Args:
        flow (FlowRecord): The flow.

    Returns:
        FlowFeatureVector: The features.
    """
    a2b, b2a = flow.a2b, flow.b2a
    values: Dict[str, Value] = {
        "state": flow_state(flow).value,
        "proto": PROTO_NAMES[Protocol(flow.proto)],
        "sTtl": float(a2b.ttl or 0),
        "dTtl": float(b2a.ttl or 0),
        "Dport": float(flow.key.responder_port),
        "Dur": (flow.end_us - flow.start_us) / MICROS,
        "Spkts": float(a2b.packets),
        "Dpkts": float(b2a.packets),
        "sbytes": float(a2b.bytes),
        "dbytes": float(b2a.bytes),
        "sMeanPktSz": _mean(a2b.bytes, a2b.packets),
        "dMeanPktSz": _mean(b2a.bytes, b2a.packets),
        "PCRatio": pc_ratio(a2b.bytes, b2a.bytes),
        "idletime_max_a2b": a2b.max_idle_us / MICROS,
        "idletime_max_b2a": b2a.max_idle_us / MICROS,
    }
    missing: Dict[str, MissingReason] = {}
    if flow.proto != Protocol.TCP:
        for name in SESSION_FEATURES:
            values[name] = None
            missing[name] = MissingReason.STRUCTURAL
        return FlowFeatureVector(values, missing)

    values.update(
        {
            "mss_requested_a2b": float(a2b.mss),
            "mss_requested_b2a": float(b2a.mss),
            "SrcTCPBase": _opt(a2b.seq_base),
            "DstTCPBase": _opt(b2a.seq_base),
            "min_segm_size_a2b": float(a2b.min_segment or 0),
            "max_segm_size_a2b": float(a2b.max_segment or 0),
            "min_segm_size_b2a": float(b2a.min_segment or 0),
            "max_segm_size_b2a": float(b2a.max_segment or 0),
            "adv_wind_scale_a2b": float(a2b.wscale),
            "adv_wind_scale_b2a": float(b2a.wscale),
            "FIN_pkts_a2b": float(a2b.fins),
            "FIN_pkts_b2a": float(b2a.fins),
        }
    )
    if b2a.seq_base is None:
        missing["DstTCPBase"] = MissingReason.STRUCTURAL
    return FlowFeatureVector(values, missing)


def _opt(value: Optional[int]) -> Optional[float]:
    return None if value is None else float(value)
