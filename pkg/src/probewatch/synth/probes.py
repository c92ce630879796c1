"""
nmap-style probe traffic.
"""

from typing import List, Union

import numpy as np

from probewatch.constants import (
    ICMP_ECHO_REPLY,
    ICMP_ECHO_REQUEST,
    MICROS,
    RST_ACK,
    SYN_ACK,
    TCP_OPT_MSS,
    TCP_OPT_WSCALE,
    XMAS,
    Protocol,
    TCPFlag,
)
from probewatch.packet import PacketRecord, build_packet
from probewatch.synth.scenario import ScanBurst, ScanType, SyntheticFlow

PROBE_WINDOW = 1024
CONNECT_WINDOW = 64240
TARGET_WINDOW = 65535
TARGET_TTL = 64
SCANNER_TTL = (37, 60)
FIRST_SOURCE_PORT = 20000
MSS = 1460
RTT_US = (100, 2000)
SEQ_SPACE = 2**32

# Flag masks of the single-packet stealth scans.
STEALTH_FLAGS = {
    ScanType.FIN: int(TCPFlag.FIN),
    ScanType.NULL: 0,
    ScanType.XMAS: int(XMAS),
}

Seed = Union[int, np.random.SeedSequence]


class _Probe:
    """Addressing of one probe; builds packets in either direction."""

    def __init__(
        self, scanner: str, target: str, source_port: int, port: int, ttl: int
    ):
        self.scanner = scanner
        self.target = target
        self.source_port = source_port
        self.port = port
        self.ttl = ttl

    def out(
        self, ts: int, flags: int, window: int, seq: int = 0, options=()
    ) -> PacketRecord:
        return build_packet(
            ts,
            self.scanner,
            self.target,
            self.source_port,
            self.port,
            Protocol.TCP,
            tcp_flags=int(flags),
            ttl=self.ttl,
            window=window,
            seq=seq,
            tcp_options=tuple(options),
        )

    def back(
        self, ts: int, flags: int, window: int = 0, seq: int = 0, options=()
    ) -> PacketRecord:
        return build_packet(
            ts,
            self.target,
            self.scanner,
            self.port,
            self.source_port,
            Protocol.TCP,
            tcp_flags=int(flags),
            ttl=TARGET_TTL,
            window=window,
            seq=seq,
            tcp_options=tuple(options),
        )

    def echo(self, ts: int, reply: bool) -> PacketRecord:
        src, dst = (self.target, self.scanner) if reply else (self.scanner, self.target)
        return build_packet(
            ts,
            src,
            dst,
            0,
            0,
            Protocol.ICMP,
            icmp_type=ICMP_ECHO_REPLY if reply else ICMP_ECHO_REQUEST,
            ttl=TARGET_TTL if reply else self.ttl,
        )


def probe_exchange(
    rng: np.random.Generator, kind: ScanType, probe: _Probe, at: int, is_open: bool
) -> List[PacketRecord]:
    """
    Packets of one probe and the target's answer.

    ``syn``: SYN, then SYN-ACK and the scanner's RST when open, RST-ACK when
    closed. ``connect``: a full handshake torn down with RST-ACK when open,
    RST-ACK when closed. ``fin``/``null``/``xmas``: one packet, answered with
    RST-ACK only by a closed port. ``ping_sweep``: an echo request, answered
    when the host is up.
    """
    rtt = int(rng.integers(*RTT_US))
    seq = int(rng.integers(0, SEQ_SPACE))
    if kind == ScanType.PING_SWEEP:
        packets = [probe.echo(at, reply=False)]
        if is_open:
            packets.append(probe.echo(at + rtt, reply=True))
        return packets
    if kind in STEALTH_FLAGS:
        packets = [probe.out(at, STEALTH_FLAGS[kind], PROBE_WINDOW, seq)]
        if not is_open:
            packets.append(probe.back(at + rtt, RST_ACK))
        return packets

    connect = kind == ScanType.CONNECT
    if connect:
        window, options = CONNECT_WINDOW, ((TCP_OPT_MSS, MSS), (TCP_OPT_WSCALE, 7))
    else:
        window, options = PROBE_WINDOW, ((TCP_OPT_MSS, MSS),)
    packets = [probe.out(at, TCPFlag.SYN, window, seq, options)]
    if not is_open:
        packets.append(probe.back(at + rtt, RST_ACK))
        return packets
    reply_seq = int(rng.integers(0, SEQ_SPACE))
    mss = ((TCP_OPT_MSS, MSS),)
    packets.append(probe.back(at + rtt, SYN_ACK, TARGET_WINDOW, reply_seq, mss))
    seq = (seq + 1) % SEQ_SPACE
    if connect:
        packets.append(probe.out(at + rtt + 1, TCPFlag.ACK, window, seq))
        packets.append(probe.out(at + rtt + 2, RST_ACK, window, seq))
    else:
        packets.append(probe.out(at + rtt + 1, TCPFlag.RST, 0, seq))
    return packets


def gen_probe(
    burst: ScanBurst,
    seed: Seed = 0,
    start_us: int = 0,
    first_port: int = FIRST_SOURCE_PORT,
) -> List[SyntheticFlow]:
    """
    Generates every probe of a burst.

    Probes go out every ``burst.gap`` seconds, target by target and port by
    port; sweeps send one echo request per target. ``round(open_fraction * n)``
    probes, chosen at random, hit an open port or a live host. Each TCP probe
    uses its own source port counting up from ``first_port``, so no two probes
    share a flow.

    Args:
        burst (ScanBurst): The scanning run.
        seed: Integer seed or seed sequence.
        start_us (int): Scenario start in microseconds; the burst begins
            ``burst.start`` seconds later.
        first_port (int): First scanner source port.

    Returns:
        List[SyntheticFlow]: One probing flow per probe.
    """
    rng = np.random.default_rng(seed)
    ttl = int(rng.integers(*SCANNER_TTL))
    if burst.type == ScanType.PING_SWEEP:
        destinations = [(target, 0) for target in burst.targets]
    else:
        destinations = [
            (target, port) for target in burst.targets for port in burst.port_list
        ]
    n = len(destinations)
    open_mask = np.zeros(n, dtype=bool)
    n_open = int(round(burst.open_fraction * n))
    open_mask[rng.choice(n, size=n_open, replace=False)] = True

    begin = start_us + int(round(burst.start * MICROS))
    gap = int(round(burst.gap * MICROS))
    flows: List[SyntheticFlow] = []
    for i, (target, port) in enumerate(destinations):
        source_port = 0 if burst.type == ScanType.PING_SWEEP else first_port + i
        probe = _Probe(burst.source_ip, target, source_port, port, ttl)
        at = begin + i * gap
        packets = probe_exchange(rng, burst.type, probe, at, bool(open_mask[i]))
        flows.append(SyntheticFlow(packets, 1))
    return flows
