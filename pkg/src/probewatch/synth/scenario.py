"""
Traffic scenarios: what the generator is asked to produce.
"""

import ipaddress
from dataclasses import dataclass, field, fields
from enum import Enum
from typing import Any, Dict, List, Tuple

from probewatch.errors import ScenarioError
from probewatch.packet import PacketRecord

BENIGN_CLIENTS = "10.0.0.0/16"
BENIGN_SERVERS = "10.1.0.0/24"
SCANNERS = "10.9.0.0/16"
PROBE_TARGETS = "10.2.0.0/16"


class ScanType(str, Enum):
    SYN = "syn"
    FIN = "fin"
    NULL = "null"
    XMAS = "xmas"
    PING_SWEEP = "ping_sweep"
    CONNECT = "connect"


# Scan types the shipped misuse rules look for.
KNOWN_SCANS = (ScanType.SYN, ScanType.CONNECT, ScanType.PING_SWEEP)
# Scan types that slip past them.
NOVEL_SCANS = (ScanType.FIN, ScanType.NULL, ScanType.XMAS)


@dataclass
class BenignProfile:
    """
    Targets of the benign session generator.

    Attributes:
        mean_duration (float): Mean session length in seconds.
        max_duration (float): Session length cap, below the TCP idle timeout.
        mean_bytes (float): Mean bytes per session, both directions.
        mean_packets (float): Mean packets per session, both directions.
        udp_fraction (float): Share of sessions that are DNS request/response pairs.
        clients (int): Distinct client hosts.
        servers (int): Distinct server hosts.
        mean_gap (float): Mean gap between session starts in seconds.
    """

    mean_duration: float = 6.06
    max_duration: float = 55.0
    mean_bytes: float = 41385.0
    mean_packets: float = 62.0
    udp_fraction: float = 0.1
    clients: int = 250
    servers: int = 50
    mean_gap: float = 0.02

    def __post_init__(self):
        if self.mean_duration <= 0 or self.max_duration <= 0 or self.mean_gap <= 0:
            raise ScenarioError("benign durations and gaps must be positive")
        if self.mean_packets < 8 or self.mean_bytes <= 0:
            raise ScenarioError("mean_packets must be >= 8 and mean_bytes positive")
        if not 0.0 <= self.udp_fraction < 1.0:
            raise ScenarioError("udp_fraction must lie in [0, 1)")
        if not 1 <= self.clients <= 65534 or not 1 <= self.servers <= 254:
            raise ScenarioError(
                "clients must lie in [1, 65534] and servers in [1, 254]"
            )


@dataclass
class ScanBurst:
    """
    One scanning run from one source.

    Attributes:
        type (ScanType): Probe technique.
        source_ip (str): Scanner address.
        targets (List[str]): Target addresses.
        ports (Tuple[int, int]): Inclusive destination port range; ping sweeps
            ignore it.
        gap (float): Seconds between consecutive probes.
        start (float): Seconds after the scenario start.
        open_fraction (float): Share of ports (or hosts, for sweeps) that answer.
    """

    type: ScanType
    source_ip: str
    targets: List[str]
    ports: Tuple[int, int] = (1, 100)
    gap: float = 0.01
    start: float = 0.0
    open_fraction: float = 0.1

    def __post_init__(self):
        try:
            self.type = ScanType(self.type)
        except ValueError as e:
            raise ScenarioError(f"unknown scan type {self.type!r}") from e
        self.ports = tuple(self.ports)
        self.targets = list(self.targets)
        if self.gap <= 0:
            raise ScenarioError("probe gap must be positive")
        if self.start < 0:
            raise ScenarioError("burst start must be >= 0")
        if not self.targets:
            raise ScenarioError("a burst needs at least one target")
        if len(self.ports) != 2 or not 1 <= self.ports[0] <= self.ports[1] <= 65535:
            raise ScenarioError(f"invalid port range {self.ports}")
        if not 0.0 <= self.open_fraction <= 1.0:
            raise ScenarioError("open_fraction must lie in [0, 1]")
        for ip in [self.source_ip] + self.targets:
            try:
                ipaddress.IPv4Address(ip)
            except ValueError as e:
                raise ScenarioError(f"{ip!r} is not an IPv4 address") from e

    @property
    def port_list(self) -> List[int]:
        return list(range(self.ports[0], self.ports[1] + 1))

    @property
    def n_flows(self) -> int:
        if self.type == ScanType.PING_SWEEP:
            return len(self.targets)
        return len(self.targets) * len(self.port_list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "type": self.type.value,
            "source_ip": self.source_ip,
            "targets": list(self.targets),
            "ports": list(self.ports),
            "gap": self.gap,
            "start": self.start,
            "open_fraction": self.open_fraction,
        }


@dataclass
class ScenarioConfig:
    """
    A complete generator request.

    Attributes:
        n_benign_flows (int): Benign sessions.
        bursts (List[ScanBurst]): Probing runs.
        benign (BenignProfile): Benign traffic targets.
        seed (int): Generator seed.
        start_time (int): Capture start in seconds since epoch.
    """

    n_benign_flows: int = 4500
    bursts: List[ScanBurst] = field(default_factory=list)
    benign: BenignProfile = field(default_factory=BenignProfile)
    seed: int = 0
    start_time: int = 1_600_000_000

    def __post_init__(self):
        if isinstance(self.benign, dict):
            self.benign = BenignProfile(**self.benign)
        self.bursts = [
            ScanBurst(**b) if isinstance(b, dict) else b for b in self.bursts
        ]
        if self.n_benign_flows < 0:
            raise ScenarioError("n_benign_flows must be >= 0")
        self.validate()

    @property
    def n_probe_flows(self) -> int:
        return sum(b.n_flows for b in self.bursts)

    def validate(self):
        """
        Rejects scenarios whose flows would be ambiguous after assembly.

        Raises:
            ScenarioError: If a scanner sits in a benign range or two sweeps
                from one source share a target.
        """
        benign = [
            ipaddress.ip_network(BENIGN_CLIENTS),
            ipaddress.ip_network(BENIGN_SERVERS),
        ]
        swept = set()
        for burst in self.bursts:
            if any(ipaddress.IPv4Address(burst.source_ip) in net for net in benign):
                raise ScenarioError(
                    f"scanner {burst.source_ip} lies in a benign address range"
                )
            if burst.type == ScanType.PING_SWEEP:
                for target in burst.targets:
                    if (burst.source_ip, target) in swept:
                        raise ScenarioError(
                            f"{burst.source_ip} sweeps {target} twice; "
                            "the echo flows would merge"
                        )
                    swept.add((burst.source_ip, target))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n_benign_flows": self.n_benign_flows,
            "bursts": [b.to_dict() for b in self.bursts],
            "benign": {
                f.name: getattr(self.benign, f.name) for f in fields(self.benign)
            },
            "seed": self.seed,
            "start_time": self.start_time,
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ScenarioError(f"unknown scenario keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class SyntheticFlow:
    """
    Packets of one generated flow and its ground-truth label.

    The key matches ``FlowRecord.row_key()`` of the flow the assembler recovers.
    """

    packets: List[PacketRecord]
    label: int

    @property
    def key(self) -> Tuple:
        first = self.packets[0]
        return (
            first.ts_us,
            first.src_ip,
            first.dst_ip,
            first.src_port,
            first.dst_port,
            int(first.proto),
        )


def _host(network: str, index: int) -> str:
    return str(ipaddress.ip_network(network).network_address + index)


def default_scenario(
    n_flows: int = 5000,
    probe_fraction: float = 0.1,
    novel_fraction: float = 0.0,
    seed: int = 0,
    burst_size: int = 100,
) -> ScenarioConfig:
    """
    A mixed scenario with an exact probe flow count.

    ``round(n_flows * probe_fraction)`` flows are probes, split into bursts of
    at most ``burst_size`` flows. ``round(probes * novel_fraction)`` of them use
    FIN, NULL or XMAS scans; the rest cycle through SYN, connect and ping sweeps.
    Every burst has its own scanner and target host.

    Args:
        n_flows (int): Total flows.
        probe_fraction (float): Share of probe flows, in [0, 1].
        novel_fraction (float): Share of the probe flows using scan types the
            default rules miss.
        seed (int): Generator seed.
        burst_size (int): Flow cap per burst.

    Returns:
        ScenarioConfig: The scenario.
    """
    fractions = (probe_fraction, novel_fraction)
    if n_flows < 0 or not all(0.0 <= f <= 1.0 for f in fractions):
        raise ScenarioError("n_flows must be >= 0 and fractions must lie in [0, 1]")
    if not 1 <= burst_size <= 254:
        raise ScenarioError("burst_size must lie in [1, 254]")
    n_probe = int(round(n_flows * probe_fraction))
    n_novel = int(round(n_probe * novel_fraction))
    plan: List[Tuple[ScanType, int]] = []
    for kinds, total in ((KNOWN_SCANS, n_probe - n_novel), (NOVEL_SCANS, n_novel)):
        for j, offset in enumerate(range(0, total, burst_size)):
            plan.append((kinds[j % len(kinds)], min(burst_size, total - offset)))

    benign_span = max(n_flows - n_probe, 1) * BenignProfile().mean_gap
    targets_base = ipaddress.ip_network(PROBE_TARGETS).network_address
    bursts: List[ScanBurst] = []
    for i, (kind, size) in enumerate(plan):
        net = targets_base + (i + 1) * 256
        if kind == ScanType.PING_SWEEP:
            targets, ports = [str(net + h) for h in range(1, size + 1)], (1, 1)
        else:
            targets, ports = [str(net + 1)], (1, size)
        start = round(benign_span * (i + 1) / (len(plan) + 1), 6)
        scanner = _host(SCANNERS, i + 1)
        bursts.append(ScanBurst(kind, scanner, targets, ports, 0.01, start))
    return ScenarioConfig(n_benign_flows=n_flows - n_probe, bursts=bursts, seed=seed)
