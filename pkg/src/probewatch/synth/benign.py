"""
Benign sessions: complete TCP conversations and DNS exchanges.
"""

import ipaddress
from typing import Dict, List, Union

import numpy as np

from probewatch.constants import (
    ETHERNET_MIN_FRAME,
    FIN_ACK,
    MICROS,
    PSH_ACK,
    SYN_ACK,
    TCP_OPT_MSS,
    TCP_OPT_WSCALE,
    Protocol,
    TCPFlag,
)
from probewatch.errors import ScenarioError
from probewatch.packet import PacketRecord, build_packet
from probewatch.synth.scenario import (
    BENIGN_CLIENTS,
    BENIGN_SERVERS,
    BenignProfile,
    SyntheticFlow,
)

MSS = 1460
WINDOW_SCALE = 7
CLIENT_WINDOW = 64240
SERVER_WINDOW = 65535
CLIENT_TTL = 64
SERVER_TTL = 128
EPHEMERAL_PORTS = (49152, 65535)
DNS_PORT = 53
# HTTP, HTTPS, SSH, telnet, SMTP, SMB, SQL Server.
TCP_SERVICES = (80, 443, 22, 23, 25, 445, 1433)
TCP_SERVICE_WEIGHTS = (0.35, 0.25, 0.1, 0.05, 0.1, 0.1, 0.05)
DNS_REQUEST = (20, 60)
DNS_RESPONSE = (60, 300)
SEQ_SPACE = 2**32

Seed = Union[int, np.random.SeedSequence]

# Bytes of the six control packets of a session: SYN and SYN-ACK carry the
# MSS and window-scale options, the rest are minimum frames.
_CONTROL_BYTES = 2 * 62 + 4 * ETHERNET_MIN_FRAME
_DATA_HEADER = 54
_DNS_MEAN_BYTES = 2 * 42 + sum(DNS_REQUEST) / 2 + sum(DNS_RESPONSE) / 2


class _PortPool:
    """Hands out each client's ephemeral ports in order, never twice."""

    def __init__(self):
        self._next: Dict[str, int] = {}

    def take(self, client: str) -> int:
        port = self._next.get(client, EPHEMERAL_PORTS[0])
        if port > EPHEMERAL_PORTS[1]:
            raise ScenarioError(f"client {client} ran out of ephemeral ports")
        self._next[client] = port + 1
        return port


class _TcpTargets:
    """Per-session TCP targets keeping the TCP and DNS mix on the profile means."""

    def __init__(self, profile: BenignProfile):
        tcp_share = 1.0 - profile.udp_fraction
        self.duration = profile.mean_duration / tcp_share
        self.packets = (profile.mean_packets - 2 * profile.udp_fraction) / tcp_share
        dns_bytes = _DNS_MEAN_BYTES * profile.udp_fraction
        tcp_bytes = (profile.mean_bytes - dns_bytes) / tcp_share
        data_packets = max(self.packets - 6, 1.0)
        payload = (tcp_bytes - _CONTROL_BYTES) / data_packets - _DATA_HEADER
        self.payload = float(np.clip(payload, 1.0, MSS))


def _timeline(start_us: int, duration_us: int, n: int) -> List[int]:
    duration_us = max(duration_us, n - 1)
    return [start_us + int(t) for t in np.rint(np.linspace(0, duration_us, n))]


def tcp_session(
    rng: np.random.Generator,
    client: str,
    server: str,
    client_port: int,
    server_port: int,
    start_us: int,
    duration_us: int,
    n_data: int,
    mean_payload: float,
) -> List[PacketRecord]:
    """
    One complete TCP conversation.

    Handshake with MSS and window-scale options, ``n_data`` data segments
    (the first from the client, later ones mostly from the server), then a
    FIN/ACK exchange closed by the client's final ACK. Packets are spread
    evenly over ``duration_us``.

    Returns:
        List[PacketRecord]: The session's packets in time order.
    """
    times = iter(_timeline(start_us, duration_us, n_data + 6))
    seq = {
        client: int(rng.integers(0, SEQ_SPACE)),
        server: int(rng.integers(0, SEQ_SPACE)),
    }
    packets: List[PacketRecord] = []

    def emit(src: str, flags: int, payload: int = 0, options=()):
        from_client = src == client
        packets.append(
            build_packet(
                next(times),
                src,
                server if from_client else client,
                client_port if from_client else server_port,
                server_port if from_client else client_port,
                Protocol.TCP,
                tcp_flags=int(flags),
                seq=seq[src],
                window=CLIENT_WINDOW if from_client else SERVER_WINDOW,
                ttl=CLIENT_TTL if from_client else SERVER_TTL,
                payload_len=payload,
                tcp_options=options,
            )
        )
        consumed = payload + (1 if flags & (TCPFlag.SYN | TCPFlag.FIN) else 0)
        seq[src] = (seq[src] + consumed) % SEQ_SPACE

    options = ((TCP_OPT_MSS, MSS), (TCP_OPT_WSCALE, WINDOW_SCALE))
    emit(client, TCPFlag.SYN, options=options)
    emit(server, SYN_ACK, options=options)
    emit(client, TCPFlag.ACK)
    high = max(2, int(round(2 * mean_payload)))
    for i in range(n_data):
        src = client if i == 0 or rng.random() < 0.3 else server
        emit(src, PSH_ACK, min(int(rng.integers(1, high)), MSS))
    emit(client, FIN_ACK)
    emit(server, FIN_ACK)
    emit(client, TCPFlag.ACK)
    return packets


def dns_exchange(
    rng: np.random.Generator, client: str, server: str, client_port: int, start_us: int
) -> List[PacketRecord]:
    """A UDP query to port 53 and its answer a few milliseconds later."""
    request = build_packet(
        start_us,
        client,
        server,
        client_port,
        DNS_PORT,
        Protocol.UDP,
        ttl=CLIENT_TTL,
        payload_len=int(rng.integers(*DNS_REQUEST)),
    )
    response = build_packet(
        start_us + int(rng.integers(200, 5000)),
        server,
        client,
        DNS_PORT,
        client_port,
        Protocol.UDP,
        ttl=SERVER_TTL,
        payload_len=int(rng.integers(*DNS_RESPONSE)),
    )
    return [request, response]


def _hosts(network: str, n: int) -> List[str]:
    base = ipaddress.ip_network(network).network_address
    return [str(base + i) for i in range(1, n + 1)]


def gen_benign(
    profile: BenignProfile,
    n: int,
    seed: Seed = 0,
    start_us: int = 0,
) -> List[SyntheticFlow]:
    """
    Generates ``n`` benign sessions.

    Session starts follow a Poisson process with mean gap ``profile.mean_gap``.
    TCP durations are gamma distributed (shape 4) around the profile mean and
    capped at ``profile.max_duration``; packet and byte counts are drawn
    around the profile means.

    Args:
        profile (BenignProfile): Traffic targets.
        n (int): Sessions to generate.
        seed: Integer seed or seed sequence.
        start_us (int): Earliest session start in microseconds.

    Returns:
        List[SyntheticFlow]: One benign flow per session, in start order.
    """
    rng = np.random.default_rng(seed)
    ports = _PortPool()
    targets = _TcpTargets(profile)
    clients = _hosts(BENIGN_CLIENTS, profile.clients)
    servers = _hosts(BENIGN_SERVERS, profile.servers)
    cap_us = int(profile.max_duration * MICROS)

    flows: List[SyntheticFlow] = []
    t = float(start_us)
    for _ in range(n):
        t += rng.exponential(profile.mean_gap) * MICROS
        at = int(t)
        client = clients[int(rng.integers(len(clients)))]
        server = servers[int(rng.integers(len(servers)))]
        port = ports.take(client)
        if rng.random() < profile.udp_fraction:
            packets = dns_exchange(rng, client, server, port, at)
        else:
            service = int(rng.choice(TCP_SERVICES, p=TCP_SERVICE_WEIGHTS))
            duration = min(int(rng.gamma(4.0, targets.duration / 4.0) * MICROS), cap_us)
            n_data = max(1, int(rng.poisson(targets.packets - 6)))
            packets = tcp_session(
                rng,
                client,
                server,
                port,
                service,
                at,
                duration,
                n_data,
                targets.payload,
            )
        flows.append(SyntheticFlow(packets, 0))
    return flows
