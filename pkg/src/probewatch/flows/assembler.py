"""
Bidirectional flow assembly.

Packets sharing a 5-tuple (in either direction) form one flow until the flow
closes: on RST, on the final ACK after FINs in both directions, or when the
gap to the next packet exceeds the protocol's idle timeout. A packet on the
5-tuple of a closed flow opens a new flow.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

from probewatch.constants import (
    ICMP_ECHO_REQUEST,
    MICROS,
    OTHER_IDLE_TIMEOUT,
    TCP_IDLE_TIMEOUT,
    TCP_OPT_MSS,
    TCP_OPT_WSCALE,
    Protocol,
    TCPFlag,
)
from probewatch.packet import PacketRecord

logger = logging.getLogger(__name__)


class FlowState(str, Enum):
    CON = "CON"
    REQ = "REQ"
    RST = "RST"
    FIN = "FIN"
    INT = "INT"


@dataclass(frozen=True)
class FlowKey:
    """
    Directed flow key; the initiator sent the flow's first packet.
    """

    initiator_ip: str
    responder_ip: str
    initiator_port: int
    responder_port: int
    proto: Protocol

    @classmethod
    def of(cls, packet: PacketRecord) -> "FlowKey":
        return cls(
            packet.src_ip, packet.dst_ip, packet.src_port, packet.dst_port, packet.proto
        )

    def canonical(self) -> Tuple:
        a = (self.initiator_ip, self.initiator_port)
        b = (self.responder_ip, self.responder_port)
        return (min(a, b), max(a, b), int(self.proto))

    def as_tuple(self) -> Tuple[str, str, int, int, int]:
        return (
            self.initiator_ip,
            self.responder_ip,
            self.initiator_port,
            self.responder_port,
            int(self.proto),
        )


@dataclass
class Direction:
    """Per-direction accumulators of a flow."""

    packets: int = 0
    bytes: int = 0
    ttl: Optional[int] = None
    seq_base: Optional[int] = None
    mss: int = 0
    wscale: int = 0
    syn_seen: bool = False
    min_segment: Optional[int] = None
    max_segment: Optional[int] = None
    max_idle_us: int = 0
    last_us: Optional[int] = None
    fins: int = 0

    def add(self, packet: PacketRecord):
        ts = packet.ts_us
        if self.last_us is not None:
            self.max_idle_us = max(self.max_idle_us, ts - self.last_us)
        self.last_us = ts
        self.packets += 1
        self.bytes += packet.wire_len
        if self.ttl is None:
            self.ttl = packet.ttl
        if packet.proto != Protocol.TCP:
            return
        if self.seq_base is None:
            self.seq_base = packet.seq
        flags = packet.tcp_flags
        if TCPFlag.is_set(flags, TCPFlag.SYN) and not self.syn_seen:
            self.syn_seen = True
            self.mss = packet.option(TCP_OPT_MSS) or 0
            self.wscale = packet.option(TCP_OPT_WSCALE) or 0
        if TCPFlag.is_set(flags, TCPFlag.FIN):
            self.fins += 1
        if packet.payload_len > 0:
            size = packet.payload_len
            if self.min_segment is None:
                self.min_segment = self.max_segment = size
            else:
                self.min_segment = min(self.min_segment, size)
                self.max_segment = max(self.max_segment, size)


@dataclass
class FlowRecord:
    """
    A bidirectional session.

    Attributes:
        key (FlowKey): Directed key, initiator first.
        start_us (int): Timestamp of the first packet in microseconds.
        end_us (int): Timestamp of the last packet in microseconds.
        a2b (Direction): Initiator to responder accumulators.
        b2a (Direction): Responder to initiator accumulators.
    """

    key: FlowKey
    start_us: int
    end_us: int
    a2b: Direction = field(default_factory=Direction)
    b2a: Direction = field(default_factory=Direction)
    rst_seen: bool = False
    syn_ack_seen: bool = False
    handshake_done: bool = False
    first_icmp_type: Optional[int] = None
    ordinal: int = 0

    @property
    def packets_a2b(self) -> int:
        return self.a2b.packets

    @property
    def packets_b2a(self) -> int:
        return self.b2a.packets

    @property
    def bytes_a2b(self) -> int:
        return self.a2b.bytes

    @property
    def bytes_b2a(self) -> int:
        return self.b2a.bytes

    @property
    def duration(self) -> float:
        return (self.end_us - self.start_us) / MICROS

    @property
    def proto(self) -> Protocol:
        return self.key.proto

    @property
    def state(self) -> FlowState:
        return flow_state(self)

    def row_key(self) -> Tuple:
        """(start_us, initiator, responder, ports, proto) join key."""
        return (self.start_us,) + self.key.as_tuple()

    def add(self, packet: PacketRecord):
        forward = (
            packet.src_ip == self.key.initiator_ip
            and packet.src_port == self.key.initiator_port
        )
        direction = self.a2b if forward else self.b2a
        direction.add(packet)
        self.end_us = packet.ts_us
        if packet.proto == Protocol.ICMP and self.first_icmp_type is None:
            self.first_icmp_type = packet.icmp_type
        if packet.proto != Protocol.TCP:
            return
        flags = packet.tcp_flags
        if TCPFlag.is_set(flags, TCPFlag.RST):
            self.rst_seen = True
        elif not forward and TCPFlag.is_set(flags, TCPFlag.SYN | TCPFlag.ACK):
            self.syn_ack_seen = self.a2b.syn_seen
        elif (
            forward
            and self.syn_ack_seen
            and TCPFlag.is_set(flags, TCPFlag.ACK)
            and not TCPFlag.is_set(flags, TCPFlag.SYN)
        ):
            self.handshake_done = True

    def fins_both_ways(self) -> bool:
        return self.a2b.fins > 0 and self.b2a.fins > 0


def flow_state(flow: FlowRecord) -> FlowState:
    """
    Classifies a flow's connection state.

    TCP: RST if any RST was seen, FIN after FINs in both directions, CON when
    the handshake completed, REQ otherwise. Non-TCP: CON when both directions
    carried packets, REQ for an unanswered ICMP echo request, INT otherwise.

    Args:
        flow (FlowRecord): The flow.

    Returns:
        FlowState: The state.
    """
    if flow.proto == Protocol.TCP:
        if flow.rst_seen:
            return FlowState.RST
        if flow.fins_both_ways():
            return FlowState.FIN
        if flow.handshake_done and flow.packets_b2a > 0:
            return FlowState.CON
        return FlowState.REQ
    if flow.packets_b2a > 0:
        return FlowState.CON
    if flow.proto == Protocol.ICMP and flow.first_icmp_type == ICMP_ECHO_REQUEST:
        return FlowState.REQ
    return FlowState.INT


class FlowAssembler:
    """
    Stateful flow table fed one packet at a time.

    Args:
        tcp_idle_timeout (float, optional): TCP idle timeout in seconds. Defaults to 60.
        other_idle_timeout (float, optional): UDP and ICMP idle timeout in
            seconds. Defaults to 30.
    """

    def __init__(
        self,
        tcp_idle_timeout: float = TCP_IDLE_TIMEOUT,
        other_idle_timeout: float = OTHER_IDLE_TIMEOUT,
    ):
        self._tcp_timeout_us = int(round(tcp_idle_timeout * MICROS))
        self._other_timeout_us = int(round(other_idle_timeout * MICROS))
        self._open: Dict[Tuple, FlowRecord] = {}
        self._closing: Dict[Tuple, bool] = {}
        self._done: List[FlowRecord] = []
        self._count = 0

    def _timeout_us(self, proto: Protocol) -> int:
        return self._tcp_timeout_us if proto == Protocol.TCP else self._other_timeout_us

    def _close(self, canon: Tuple):
        self._done.append(self._open.pop(canon))
        self._closing.pop(canon, None)

    def _start(self, canon: Tuple, packet: PacketRecord) -> FlowRecord:
        flow = FlowRecord(
            key=FlowKey.of(packet),
            start_us=packet.ts_us,
            end_us=packet.ts_us,
            ordinal=self._count,
        )
        self._count += 1
        self._open[canon] = flow
        return flow

    def add(self, packet: PacketRecord):
        canon = FlowKey.of(packet).canonical()
        flow = self._open.get(canon)
        timeout = self._timeout_us(packet.proto)
        if flow is not None and packet.ts_us - flow.end_us > timeout:
            self._close(canon)
            flow = None
        if flow is None:
            flow = self._start(canon, packet)
        flow.add(packet)
        if packet.proto != Protocol.TCP:
            return
        if flow.rst_seen:
            self._close(canon)
        elif canon in self._closing:
            if packet.tcp_flags == TCPFlag.ACK and packet.payload_len == 0:
                self._close(canon)
        elif flow.fins_both_ways():
            self._closing[canon] = True

    def flush(self) -> List[FlowRecord]:
        """
        Closes every open flow and returns all flows seen so far.

        Returns:
            List[FlowRecord]: Flows ordered by start time, then by first appearance.
        """
        for canon in list(self._open):
            self._close(canon)
        flows = sorted(self._done, key=lambda f: (f.start_us, f.ordinal))
        self._done = []
        return flows


def assemble_flows(
    packets: Sequence[PacketRecord],
    tcp_idle_timeout: float = TCP_IDLE_TIMEOUT,
    other_idle_timeout: float = OTHER_IDLE_TIMEOUT,
) -> List[FlowRecord]:
    """
    Assembles time-ordered packets into bidirectional flows.

    Args:
        packets (Sequence[PacketRecord]): Time-ordered packets.
        tcp_idle_timeout (float, optional): Seconds. Defaults to 60.
        other_idle_timeout (float, optional): Seconds. Defaults to 30.

    Returns:
        List[FlowRecord]: Every flow, each packet assigned to exactly one.
    """
    assembler = FlowAssembler(tcp_idle_timeout, other_idle_timeout)
    for packet in packets:
        assembler.add(packet)
    flows = assembler.flush()
    logger.debug("assembled %d flows from %d packets", len(flows), len(packets))
    return flows
