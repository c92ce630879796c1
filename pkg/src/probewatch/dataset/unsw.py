"""
Adapter for the public UNSW-NB15 CSV files, reduced to the binary
reconnaissance-vs-rest task.
"""

import io
import logging
from typing import Dict, List

import numpy as np
import pandas as pd

from probewatch.constants import KEY_COLUMNS, MICROS, UNSW_RECON_CATEGORY, MissingReason
from probewatch.dataset.table import Column, ColumnKind, FeatureTable, Origin
from probewatch.errors import MissingColumnError
from probewatch.utils import Source, read_source

logger = logging.getLogger(__name__)

# column order of the headerless UNSW-NB15_{1..4}.csv files
UNSW_COLUMNS = [
    "srcip", "sport", "dstip", "dsport", "proto", "state", "dur", "sbytes",
    "dbytes", "sttl", "dttl", "sloss", "dloss", "service", "sload", "dload",
    "spkts", "dpkts", "swin", "dwin", "stcpb", "dtcpb", "smeansz", "dmeansz",
    "trans_depth", "res_bdy_len", "sjit", "djit", "stime", "ltime", "sintpkt",
    "dintpkt", "tcprtt", "synack", "ackdat", "is_sm_ips_ports", "ct_state_ttl",
    "ct_flw_http_mthd", "is_ftp_login", "ct_ftp_cmd", "ct_srv_src", "ct_srv_dst",
    "ct_dst_ltm", "ct_src_ltm", "ct_src_dport_ltm", "ct_dst_sport_ltm",
    "ct_dst_src_ltm", "attack_cat", "label",
]

REQUIRED_COLUMNS = [
    "ct_dst_sport_ltm", "ct_state_ttl", "smeansz", "dmeansz", "ackdat", "state",
    "dload", "service", "dsport", "ct_ftp_cmd", "dttl", "proto", "spkts",
]

CATEGORY_COLUMN = "attack_cat"
CATEGORICAL = {"proto", "state", "service"}
NOT_FEATURES = {"srcip", "dstip", "attack_cat", "label", "id"}
ALIASES = {"smean": "smeansz", "dmean": "dmeansz"}
PORT_COLUMNS = {"sport", "dsport"}
PROTO_NUMBERS = {"tcp": 6, "udp": 17, "icmp": 1}


def _parse_port(value: str) -> float:
    try:
        return float(int(value.strip(), 0))
    except ValueError:
        return np.nan


def _read(data: bytes) -> pd.DataFrame:
    first = data.split(b"\n", 1)[0].decode("utf-8", errors="replace").lower()
    has_header = CATEGORY_COLUMN in first
    frame = pd.read_csv(
        io.BytesIO(data),
        dtype=str,
        keep_default_na=False,
        header=0 if has_header else None,
        low_memory=False,
    )
    if not has_header:
        if frame.shape[1] != len(UNSW_COLUMNS):
            raise MissingColumnError(
                f"headerless file has {frame.shape[1]} columns, "
                f"expected {len(UNSW_COLUMNS)}"
            )
        frame.columns = UNSW_COLUMNS
    names = [c.strip().lower() for c in frame.columns]
    frame.columns = [ALIASES.get(n, n) for n in names]
    return frame


def _reasons(flags) -> np.ndarray:
    return np.where(flags, MissingReason.PLAUSIBLE, MissingReason.NONE)


def load_unsw_csv(source: Source) -> FeatureTable:
    """
    Loads a UNSW-NB15 CSV as a labelled feature table.

    The label is 1 for rows whose attack category is reconnaissance and 0 for
    every other row. Column names are matched case-insensitively; files
    without a header are read with the published 49-column order.

    Args:
        source (Source): CSV bytes, a path, an ``http(s)`` URL or a handle.

    Returns:
        FeatureTable: Features of origin EXTERNAL with labels.

    Raises:
        MissingColumnError: If a required column or the attack category is absent.
    """
    frame = _read(read_source(source))
    absent = [c for c in REQUIRED_COLUMNS + [CATEGORY_COLUMN] if c not in frame.columns]
    if absent:
        raise MissingColumnError(f"UNSW-NB15 file lacks columns {absent}")

    labels = (
        frame[CATEGORY_COLUMN].str.strip().str.lower() == UNSW_RECON_CATEGORY
    ).to_numpy(dtype=np.int64)

    columns: List[Column] = []
    cells: Dict[str, pd.Series] = {}
    masks = []
    for name in frame.columns:
        if name in NOT_FEATURES:
            continue
        raw = frame[name].str.strip()
        if name in CATEGORICAL:
            columns.append(Column(name, ColumnKind.CATEGORICAL, Origin.EXTERNAL))
            values = raw.str.lower()
            cells[name] = values.where(values != "", None)
            masks.append(_reasons(values == ""))
            continue
        if name in PORT_COLUMNS:
            values = raw.map(_parse_port)
        else:
            values = pd.to_numeric(raw, errors="coerce")
        columns.append(Column(name, ColumnKind.NUMERIC, Origin.EXTERNAL))
        cells[name] = values.astype(float)
        masks.append(_reasons(values.isna()))

    keys = None
    if {"srcip", "dstip", "sport", "dsport", "stime"} <= set(frame.columns):
        start = pd.to_numeric(frame["stime"], errors="coerce").fillna(0)
        proto = frame["proto"].str.strip().str.lower().map(PROTO_NUMBERS)
        keys = pd.DataFrame(
            {
                "start_us": (start * MICROS).astype(np.int64),
                "src_ip": frame["srcip"].str.strip(),
                "dst_ip": frame["dstip"].str.strip(),
                "src_port": frame["sport"].map(_parse_port).fillna(0).astype(np.int64),
                "dst_port": frame["dsport"].map(_parse_port).fillna(0).astype(np.int64),
                "proto": proto.fillna(0).astype(np.int64),
            },
            columns=list(KEY_COLUMNS),
        )
    table = FeatureTable(
        columns,
        pd.DataFrame(cells, columns=[c.name for c in columns]),
        np.stack(masks, axis=1).astype(np.int8),
        labels,
        keys,
    )
    logger.info(
        "loaded %d UNSW-NB15 rows, %d reconnaissance", table.n_rows, int(labels.sum())
    )
    return table
