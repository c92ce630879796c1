"""
The packet module holds the decoded header record of one captured frame and
its Ethernet/IPv4 encoding.
"""

import socket
import struct
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import dpkt

from probewatch.constants import (
    ETHERNET_HEADER_LEN,
    ETHERNET_MIN_FRAME,
    ICMP_HEADER_LEN,
    IPV4_HEADER_LEN,
    MICROS,
    PCAP_SNAPLEN,
    TCP_HEADER_LEN,
    TCP_OPT_MSS,
    TCP_OPT_WSCALE,
    UDP_HEADER_LEN,
    Protocol,
)
from probewatch.errors import InvalidPacketError

TcpOptions = Tuple[Tuple[int, int], ...]


@dataclass(frozen=True)
class PacketRecord:
    """
    One captured IPv4 frame reduced to the header fields the pipeline consumes.

    Attributes:
        ts_sec (int): Seconds since epoch.
        ts_usec (int): Microseconds within the second.
        src_ip (str): Dotted-quad source address.
        dst_ip (str): Dotted-quad destination address.
        src_port (int): Source port, 0 for ICMP.
        dst_port (int): Destination port, 0 for ICMP.
        proto (Protocol): Transport protocol.
        tcp_flags (int): TCP flag mask, 0 unless TCP.
        icmp_type (int): ICMP type, 0 unless ICMP.
        ttl (int): IP time to live.
        wire_len (int): Frame length on the wire.
        payload_len (int): Transport payload length.
        seq (int): TCP sequence number.
        window (int): TCP advertised window.
        tcp_options (tuple): ``(kind, value)`` pairs for MSS (2) and window scale (3).
    """

    ts_sec: int
    ts_usec: int
    src_ip: str
    dst_ip: str
    src_port: int
    dst_port: int
    proto: Protocol
    tcp_flags: int = 0
    icmp_type: int = 0
    ttl: int = 64
    wire_len: int = 0
    payload_len: int = 0
    seq: int = 0
    window: int = 0
    tcp_options: TcpOptions = field(default_factory=tuple)

    @property
    def ts_us(self) -> int:
        """Timestamp in integer microseconds."""
        return self.ts_sec * MICROS + self.ts_usec

    @property
    def ts(self) -> float:
        return self.ts_sec + self.ts_usec / MICROS

    def option(self, kind: int) -> Optional[int]:
        """Returns the value of TCP option ``kind`` or None when absent."""
        for k, v in self.tcp_options:
            if k == kind:
                return v
        return None

    def header_len(self) -> int:
        """Bytes of Ethernet, IPv4 and transport headers this record encodes to."""
        if self.proto == Protocol.TCP:
            return ETHERNET_HEADER_LEN + IPV4_HEADER_LEN + TCP_HEADER_LEN + len(
                _tcp_option_bytes(self.tcp_options)
            )
        if self.proto == Protocol.UDP:
            return ETHERNET_HEADER_LEN + IPV4_HEADER_LEN + UDP_HEADER_LEN
        return ETHERNET_HEADER_LEN + IPV4_HEADER_LEN + ICMP_HEADER_LEN

    def validate(self) -> "PacketRecord":
        """
        Checks the record invariants.

        Returns:
            PacketRecord: self, for chaining.

        Raises:
            InvalidPacketError: If any invariant is violated.
        """
        try:
            proto = Protocol(self.proto)
        except ValueError as e:
            raise InvalidPacketError(f"unsupported protocol {self.proto}") from e
        for name in ("src_ip", "dst_ip"):
            try:
                socket.inet_aton(getattr(self, name))
            except (OSError, TypeError) as e:
                raise InvalidPacketError(f"{name} is not an IPv4 address") from e
        if not 0 <= self.ts_usec < MICROS or self.ts_sec < 0:
            raise InvalidPacketError("timestamp out of range")
        _check_range("src_port", self.src_port, 0xFFFF)
        _check_range("dst_port", self.dst_port, 0xFFFF)
        _check_range("tcp_flags", self.tcp_flags, 0xFF)
        _check_range("icmp_type", self.icmp_type, 0xFF)
        _check_range("ttl", self.ttl, 0xFF)
        _check_range("seq", self.seq, 0xFFFFFFFF)
        _check_range("window", self.window, 0xFFFF)
        if proto == Protocol.ICMP and (self.src_port or self.dst_port):
            raise InvalidPacketError("ICMP packets carry no ports")
        if proto != Protocol.TCP and (
            self.tcp_flags or self.seq or self.window or self.tcp_options
        ):
            raise InvalidPacketError("TCP fields set on a non-TCP packet")
        if proto != Protocol.ICMP and self.icmp_type:
            raise InvalidPacketError("icmp_type set on a non-ICMP packet")
        for kind, value in self.tcp_options:
            if kind == TCP_OPT_MSS:
                _check_range("MSS option", value, 0xFFFF)
            elif kind == TCP_OPT_WSCALE:
                _check_range("window scale option", value, 0xFF)
            else:
                raise InvalidPacketError(f"unsupported TCP option kind {kind}")
        if self.payload_len < 0 or self.payload_len > self.wire_len:
            raise InvalidPacketError("payload_len must lie in [0, wire_len]")
        if self.header_len() + self.payload_len > self.wire_len:
            raise InvalidPacketError(
                f"wire_len {self.wire_len} cannot hold headers and payload "
                f"({self.header_len() + self.payload_len} bytes)"
            )
        if self.wire_len > PCAP_SNAPLEN:
            raise InvalidPacketError("wire_len exceeds the snapshot length")
        return self


@dataclass
class CaptureSegment:
    """
    A contiguous run of packets cut from a capture.

    Attributes:
        packets (List[PacketRecord]): Packets in non-decreasing time order.
        index (int): Segment ordinal.
    """

    packets: List[PacketRecord]
    index: int

    def __len__(self):
        return len(self.packets)


def build_packet(
    ts_us: int, src_ip: str, dst_ip: str, src_port: int, dst_port: int, proto, **fields
) -> PacketRecord:
    """
    Builds a record from a microsecond timestamp, sizing ``wire_len`` to fit.

    ``wire_len`` is the header length plus ``payload_len``, raised to the
    minimum Ethernet frame size.
    """
    record = PacketRecord(
        ts_sec=int(ts_us) // MICROS,
        ts_usec=int(ts_us) % MICROS,
        src_ip=src_ip,
        dst_ip=dst_ip,
        src_port=int(src_port),
        dst_port=int(dst_port),
        proto=Protocol(proto),
        **fields,
    )
    wire_len = max(ETHERNET_MIN_FRAME, record.header_len() + record.payload_len)
    return replace(record, wire_len=wire_len)


def _check_range(name: str, value: int, upper: int):
    if not isinstance(value, int) or not 0 <= value <= upper:
        raise InvalidPacketError(
            f"{name} must be an integer in [0, {upper}], got {value!r}"
        )


def mac_for(ip: str) -> bytes:
    """Locally administered MAC address derived from an IPv4 address."""
    return b"\x02\x00" + socket.inet_aton(ip)


def _tcp_option_bytes(options: Sequence[Tuple[int, int]]) -> bytes:
    opts = b""
    for kind, value in options:
        if kind == TCP_OPT_MSS:
            opts += struct.pack("!BBH", TCP_OPT_MSS, 4, value)
        elif kind == TCP_OPT_WSCALE:
            opts += struct.pack("!BBB", TCP_OPT_WSCALE, 3, value)
    if len(opts) % 4:
        opts += bytes([dpkt.tcp.TCP_OPT_NOP]) * (4 - len(opts) % 4)
    return opts


def encode_frame(packet: PacketRecord) -> bytes:
    """
    Encodes a record into an Ethernet frame of exactly ``wire_len`` bytes.

    The transport payload is zero filled and the frame is zero padded up to
    ``wire_len``.
    """
    payload = bytes(packet.payload_len)
    if packet.proto == Protocol.TCP:
        l4 = dpkt.tcp.TCP(
            sport=packet.src_port,
            dport=packet.dst_port,
            seq=packet.seq,
            flags=packet.tcp_flags,
            win=packet.window,
        )
        l4.opts = _tcp_option_bytes(packet.tcp_options)
        l4.off = 5 + len(l4.opts) // 4
        l4.data = payload
    elif packet.proto == Protocol.UDP:
        l4 = dpkt.udp.UDP(sport=packet.src_port, dport=packet.dst_port)
        l4.data = payload
        l4.ulen = UDP_HEADER_LEN + len(payload)
    else:
        l4 = dpkt.icmp.ICMP(type=packet.icmp_type, code=0)
        l4.data = bytes(4) + payload
    ip = dpkt.ip.IP(
        src=socket.inet_aton(packet.src_ip),
        dst=socket.inet_aton(packet.dst_ip),
        p=int(packet.proto),
        ttl=packet.ttl,
    )
    ip.data = l4
    ip.len = IPV4_HEADER_LEN + len(bytes(l4))
    eth = dpkt.ethernet.Ethernet(
        src=mac_for(packet.src_ip),
        dst=mac_for(packet.dst_ip),
        type=dpkt.ethernet.ETH_TYPE_IP,
    )
    eth.data = ip
    frame = bytes(eth)
    return frame + bytes(packet.wire_len - len(frame))


def decode_frame(
    buf: bytes, ts_sec: int, ts_usec: int, wire_len: int
) -> Optional[PacketRecord]:
    """
    Decodes an Ethernet frame into a record.

    Returns:
        Optional[PacketRecord]: None when the frame is not IPv4 TCP, UDP or ICMP.
    """
    try:
        eth = dpkt.ethernet.Ethernet(buf)
    except (dpkt.UnpackError, struct.error):
        return None
    ip = eth.data
    if not isinstance(ip, dpkt.ip.IP) or ip.v != 4:
        return None
    try:
        proto = Protocol(ip.p)
    except ValueError:
        return None
    ip_payload = ip.len - ip.hl * 4
    l4 = ip.data
    common = dict(
        ts_sec=ts_sec,
        ts_usec=ts_usec,
        src_ip=socket.inet_ntoa(ip.src),
        dst_ip=socket.inet_ntoa(ip.dst),
        proto=proto,
        ttl=ip.ttl,
        wire_len=wire_len,
    )
    if proto == Protocol.TCP:
        if not isinstance(l4, dpkt.tcp.TCP):
            return None
        options = []
        for kind, data in dpkt.tcp.parse_opts(l4.opts):
            if kind == TCP_OPT_MSS and len(data) == 2:
                options.append((TCP_OPT_MSS, struct.unpack("!H", data)[0]))
            elif kind == TCP_OPT_WSCALE and len(data) == 1:
                options.append((TCP_OPT_WSCALE, data[0]))
        return PacketRecord(
            src_port=l4.sport,
            dst_port=l4.dport,
            tcp_flags=l4.flags,
            seq=l4.seq,
            window=l4.win,
            tcp_options=tuple(options),
            payload_len=max(ip_payload - l4.off * 4, 0),
            **common,
        )
    if proto == Protocol.UDP:
        if not isinstance(l4, dpkt.udp.UDP):
            return None
        return PacketRecord(
            src_port=l4.sport,
            dst_port=l4.dport,
            payload_len=max(ip_payload - UDP_HEADER_LEN, 0),
            **common,
        )
    if isinstance(l4, dpkt.icmp.ICMP):
        icmp_type = l4.type
    elif len(bytes(l4)) >= ICMP_HEADER_LEN:
        icmp_type = bytes(l4)[0]
    else:
        return None
    return PacketRecord(
        src_port=0,
        dst_port=0,
        icmp_type=icmp_type,
        payload_len=max(ip_payload - ICMP_HEADER_LEN, 0),
        **common,
    )
