"""
Signature-based baseline: every flow is flagged when any rule matches its raw
(unencoded, unimputed) feature row.
"""

import csv
import io
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from probewatch.constants import KEY_COLUMNS
from probewatch.dataset.table import FeatureTable
from probewatch.errors import SchemaMismatchError
from probewatch.evaluation.rules import MisuseRule
from probewatch.utils import Source, read_source

logger = logging.getLogger(__name__)

VERDICT_COLUMN = "misuse"
RULES_COLUMN = "rules"


@dataclass
class MisuseResult:
    """
    Per-flow verdicts of a ruleset.

    Attributes:
        verdicts (np.ndarray): 1 where some rule matched.
        hits (Dict[str, int]): Matching rows per rule id.
        matched (List[List[str]]): Ids of the rules that matched each row.
        keys (List[Tuple], optional): Row keys of the evaluated table.
    """

    verdicts: np.ndarray
    hits: Dict[str, int]
    matched: List[List[str]] = field(default_factory=list)
    keys: Optional[List[Tuple]] = None

    def to_dict(self) -> Dict:
        return {
            "rows": len(self.verdicts),
            "flagged": int(self.verdicts.sum()),
            "hits": dict(self.hits),
        }

    def to_csv(self) -> bytes:
        """Row keys, the 0/1 verdict and the matching rule ids, as CRLF CSV."""
        out: Dict[str, List[str]] = {}
        if self.keys is not None:
            for j, name in enumerate(KEY_COLUMNS):
                out[name] = [str(k[j]) for k in self.keys]
        out[VERDICT_COLUMN] = [str(int(v)) for v in self.verdicts]
        out[RULES_COLUMN] = [";".join(ids) for ids in self.matched]
        buf = io.StringIO()
        pd.DataFrame(out, columns=list(out)).to_csv(
            buf, index=False, lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL
        )
        return buf.getvalue().encode("utf-8")


def misuse_detect(table: FeatureTable, rules: Sequence[MisuseRule]) -> MisuseResult:
    """
    Applies a ruleset to every row of a raw merged feature table.

    Args:
        table (FeatureTable): Flow and temporal features before encoding.
        rules (Sequence[MisuseRule]): Signatures; an empty ruleset flags nothing.

    Returns:
        MisuseResult: OR-combined verdicts with per-rule hit counts.
    """
    records = table.data.to_dict(orient="records")
    hits = {rule.id: 0 for rule in rules}
    matched: List[List[str]] = []
    verdicts = np.zeros(len(records), dtype=np.int64)
    for i, row in enumerate(records):
        ids = [rule.id for rule in rules if rule.matches(row)]
        for rule_id in ids:
            hits[rule_id] += 1
        matched.append(ids)
        verdicts[i] = 1 if ids else 0
    logger.info(
        "misuse rules flagged %d of %d flows", int(verdicts.sum()), len(verdicts)
    )
    keys = table.row_keys() if table.keys is not None else None
    return MisuseResult(verdicts, hits, matched, keys)


def read_misuse_csv(source: Source) -> MisuseResult:
    """
    Loads verdicts written by ``MisuseResult.to_csv``.

    Raises:
        SchemaMismatchError: If the verdict column is absent.
    """
    text = read_source(source).decode("utf-8")
    frame = pd.read_csv(
        io.StringIO(text), dtype=str, keep_default_na=False, na_filter=False
    )
    if VERDICT_COLUMN not in frame.columns:
        raise SchemaMismatchError(f"misuse CSV lacks the {VERDICT_COLUMN!r} column")
    verdicts = frame[VERDICT_COLUMN].astype(np.int64).to_numpy()
    matched = (
        [cell.split(";") if cell else [] for cell in frame[RULES_COLUMN]]
        if RULES_COLUMN in frame.columns
        else [[] for _ in range(len(frame))]
    )
    hits: Dict[str, int] = {}
    for ids in matched:
        for rule_id in ids:
            hits[rule_id] = hits.get(rule_id, 0) + 1
    keys = None
    if all(name in frame.columns for name in KEY_COLUMNS):
        kf = frame[list(KEY_COLUMNS)].copy()
        for name in ("start_us", "src_port", "dst_port", "proto"):
            kf[name] = kf[name].astype(np.int64)
        keys = list(kf.itertuples(index=False, name=None))
    return MisuseResult(verdicts, hits, matched, keys)
