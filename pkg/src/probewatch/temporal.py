"""
Probe-signal classification and per-source windowed signal counts.
"""

import logging
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Sequence, Tuple

from probewatch.constants import (
    FIN_ACK,
    ICMP_ECHO_REQUEST,
    MICROS,
    SYN_ACK,
    TEMPORAL_WINDOW,
    XMAS,
    Protocol,
    TCPFlag,
)
from probewatch.errors import ArgumentError
from probewatch.flows.assembler import FlowRecord
from probewatch.packet import PacketRecord

logger = logging.getLogger(__name__)


class ProbeSignal(str, Enum):
    ICMP_ECHO = "ICMP"
    SYN = "SYN"
    SYNACK = "SYNACK"
    NULL = "NULL"
    FIN = "FIN"
    XMAS = "XMAS"
    FINACK = "FINACK"
    NONE = "NONE"


COUNTED_SIGNALS = tuple(s for s in ProbeSignal if s is not ProbeSignal.NONE)
COUNT_COLUMNS = tuple(f"{s.value}_count" for s in COUNTED_SIGNALS)

_TCP_SIGNALS = {
    int(TCPFlag.SYN): ProbeSignal.SYN,
    int(SYN_ACK): ProbeSignal.SYNACK,
    0: ProbeSignal.NULL,
    int(TCPFlag.FIN): ProbeSignal.FIN,
    int(XMAS): ProbeSignal.XMAS,
    int(FIN_ACK): ProbeSignal.FINACK,
}


@dataclass
class TemporalFeatureRow:
    """
    Signal counts of a flow initiator around the flow's start.

    Attributes:
        key (tuple): The flow's join key ``(start_us, initiator, responder, ports, proto)``.
        counts (Dict[ProbeSignal, int]): One non-negative count per counted signal.
    """

    key: Tuple
    counts: Dict[ProbeSignal, int]

    @property
    def start_us(self) -> int:
        return self.key[0]

    @property
    def src_ip(self) -> str:
        return self.key[1]

    def as_dict(self) -> Dict[str, int]:
        return {f"{s.value}_count": self.counts[s] for s in COUNTED_SIGNALS}


def classify_probe_signal(packet: PacketRecord) -> ProbeSignal:
    """
    Maps a packet to its probe signal.

    ICMP echo requests are ICMP_ECHO; TCP packets match on their exact flag
    mask; everything else is NONE.

    Args:
        packet (PacketRecord): The packet.

    Returns:
        ProbeSignal: The signal.
    """
    if packet.proto == Protocol.ICMP:
        if packet.icmp_type == ICMP_ECHO_REQUEST:
            return ProbeSignal.ICMP_ECHO
        return ProbeSignal.NONE
    if packet.proto == Protocol.TCP:
        return _TCP_SIGNALS.get(packet.tcp_flags, ProbeSignal.NONE)
    return ProbeSignal.NONE


def count_signals_windowed(
    packets: Sequence[PacketRecord],
    flows: Sequence[FlowRecord],
    window: float = TEMPORAL_WINDOW,
    trailing: bool = False,
) -> List[TemporalFeatureRow]:
    """
    Counts each initiator's probe signals in a window anchored at its flow's start.

    The forward window is ``[t0, t0 + window)``; trailing mode uses
    ``(t0 - window, t0]``. Counts are produced by a two-pointer sweep over each
    source's signal packets.

    Args:
        packets (Sequence[PacketRecord]): Packets of the capture.
        flows (Sequence[FlowRecord]): Flows of the same capture.
        window (float, optional): Window width in seconds. Defaults to 2.0.
        trailing (bool, optional): Anchor the window's end at the flow start. Defaults to False.

    Returns:
        List[TemporalFeatureRow]: One row per flow, in flow order.
    """
    if window <= 0:
        raise ArgumentError(f"window must be positive, got {window}")
    width = int(round(window * MICROS))

    events: Dict[str, List[Tuple[int, ProbeSignal]]] = defaultdict(list)
    for packet in packets:
        signal = classify_probe_signal(packet)
        if signal is not ProbeSignal.NONE:
            events[packet.src_ip].append((packet.ts_us, signal))
    for series in events.values():
        series.sort(key=lambda e: e[0])

    by_source: Dict[str, List[int]] = defaultdict(list)
    for i, flow in enumerate(flows):
        by_source[flow.key.initiator_ip].append(i)

    rows: List[TemporalFeatureRow] = [None] * len(flows)
    for src, flow_ids in by_source.items():
        series = events.get(src, [])
        flow_ids.sort(key=lambda i: flows[i].start_us)
        counts = {s: 0 for s in COUNTED_SIGNALS}
        lo = hi = 0
        for i in flow_ids:
            t0 = flows[i].start_us
            if trailing:
                upper, lower = t0, t0 - width
                while hi < len(series) and series[hi][0] <= upper:
                    counts[series[hi][1]] += 1
                    hi += 1
                while lo < hi and series[lo][0] <= lower:
                    counts[series[lo][1]] -= 1
                    lo += 1
            else:
                end = t0 + width
                while hi < len(series) and series[hi][0] < end:
                    counts[series[hi][1]] += 1
                    hi += 1
                while lo < hi and series[lo][0] < t0:
                    counts[series[lo][1]] -= 1
                    lo += 1
            rows[i] = TemporalFeatureRow(key=flows[i].row_key(), counts=dict(counts))
    logger.debug("computed temporal rows for %d flows", len(rows))
    return rows
