from probewatch.synth.benign import dns_exchange, gen_benign, tcp_session
from probewatch.synth.generator import (
    GeneratedTrace,
    GroundTruth,
    gen_dataset,
    read_ground_truth,
)
from probewatch.synth.probes import gen_probe, probe_exchange
from probewatch.synth.scenario import (
    KNOWN_SCANS,
    NOVEL_SCANS,
    BenignProfile,
    ScanBurst,
    ScanType,
    ScenarioConfig,
    SyntheticFlow,
    default_scenario,
)
