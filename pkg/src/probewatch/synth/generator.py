"""
Whole-scenario generation: the interleaved capture and its ground-truth labels.
"""

import csv
import io
import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np
import pandas as pd

from probewatch.capture import write_pcap
from probewatch.constants import KEY_COLUMNS, LABEL_COLUMN, MICROS
from probewatch.dataset.labels import LabelSet, LabelSource
from probewatch.dataset.table import keys_frame
from probewatch.errors import ScenarioError, SchemaMismatchError
from probewatch.packet import PacketRecord
from probewatch.synth.benign import gen_benign
from probewatch.synth.probes import FIRST_SOURCE_PORT, gen_probe
from probewatch.synth.scenario import ScanType, ScenarioConfig, SyntheticFlow
from probewatch.utils import Source, read_source

logger = logging.getLogger(__name__)


@dataclass
class GroundTruth:
    """
    Label of every generated flow, keyed like ``FlowRecord.row_key()``.
    """

    labels: Dict[Tuple, int]

    def __len__(self):
        return len(self.labels)

    @property
    def positives(self) -> int:
        return sum(self.labels.values())

    def to_label_set(self) -> LabelSet:
        return LabelSet(LabelSource.EXPERT_GROUND_TRUTH, dict(self.labels))

    def to_csv(self) -> bytes:
        """Key columns and ``label``, one row per flow in key order, CRLF terminated."""
        keys = sorted(self.labels)
        frame = keys_frame(keys)
        frame[LABEL_COLUMN] = [self.labels[k] for k in keys]
        buf = io.StringIO()
        frame.to_csv(buf, index=False, lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL)
        return buf.getvalue().encode("utf-8")


def read_ground_truth(source: Source) -> GroundTruth:
    """
    Loads a label file written by ``GroundTruth.to_csv``.

    Raises:
        SchemaMismatchError: If a key column or the label column is absent.
    """
    text = read_source(source).decode("utf-8")
    frame = pd.read_csv(io.StringIO(text), dtype=str, keep_default_na=False)
    missing = [c for c in list(KEY_COLUMNS) + [LABEL_COLUMN] if c not in frame.columns]
    if missing:
        raise SchemaMismatchError(f"label file lacks columns {missing}")
    for name in ("start_us", "src_port", "dst_port", "proto", LABEL_COLUMN):
        frame[name] = frame[name].astype(np.int64)
    keys = frame[list(KEY_COLUMNS)].itertuples(index=False, name=None)
    return GroundTruth({tuple(k): int(v) for k, v in zip(keys, frame[LABEL_COLUMN])})


@dataclass
class GeneratedTrace:
    """
    Output of one scenario.

    Attributes:
        packets (List[PacketRecord]): Every packet in global time order.
        flows (List[SyntheticFlow]): Generated flows, benign first.
        truth (GroundTruth): Flow labels.
    """

    packets: List[PacketRecord]
    flows: List[SyntheticFlow]
    truth: GroundTruth

    def pcap_bytes(self, byteorder: str = "little") -> bytes:
        return write_pcap(self.packets, byteorder)


def gen_dataset(scenario: ScenarioConfig) -> GeneratedTrace:
    """
    Generates a scenario's benign sessions and probe bursts and interleaves them.

    Benign traffic and every burst draw from independent streams spawned from
    ``scenario.seed``, so adding a burst leaves the others unchanged. Packets are
    merged by timestamp; ties keep flow order.

    Args:
        scenario (ScenarioConfig): What to generate.

    Returns:
        GeneratedTrace: Packets, flows and ground truth.

    Raises:
        ScenarioError: If a scanner runs out of source ports or two flows share a key.
    """
    start_us = scenario.start_time * MICROS
    seeds = np.random.SeedSequence(scenario.seed).spawn(1 + len(scenario.bursts))
    flows = gen_benign(scenario.benign, scenario.n_benign_flows, seeds[0], start_us)

    next_port: Dict[str, int] = defaultdict(lambda: FIRST_SOURCE_PORT)
    for burst, seed in zip(scenario.bursts, seeds[1:]):
        first = next_port[burst.source_ip]
        if burst.type != ScanType.PING_SWEEP:
            if first + burst.n_flows - 1 > 0xFFFF:
                raise ScenarioError(
                    f"scanner {burst.source_ip} ran out of source ports"
                )
            next_port[burst.source_ip] = first + burst.n_flows
        flows.extend(gen_probe(burst, seed, start_us, first))

    labels: Dict[Tuple, int] = {}
    for flow in flows:
        if flow.key in labels:
            raise ScenarioError(f"two generated flows share the key {flow.key}")
        labels[flow.key] = flow.label
    order = [
        (p.ts_us, i, j, p)
        for i, f in enumerate(flows)
        for j, p in enumerate(f.packets)
    ]
    order.sort(key=lambda e: e[:3])
    packets = [e[3] for e in order]
    truth = GroundTruth(labels)
    logger.info(
        "generated %d flows (%d probing) in %d packets",
        len(flows),
        truth.positives,
        len(packets),
    )
    return GeneratedTrace(packets, flows, truth)
