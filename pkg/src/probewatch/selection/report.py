from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence

from probewatch.errors import ArgumentError


class SelectionStage(str, Enum):
    FILTER = "filter"
    PRUNED = "pruned"
    WRAPPED = "wrapped"


@dataclass
class FeatureSubset:
    """
    Ordered column names surviving a selection stage.

    Attributes:
        names (List[str]): Columns in source-table order.
        stage (SelectionStage): Stage that produced the subset.
    """

    names: List[str]
    stage: SelectionStage

    def __post_init__(self):
        self.names = list(self.names)
        self.stage = SelectionStage(self.stage)
        if len(set(self.names)) != len(self.names):
            raise ArgumentError("a feature subset cannot repeat a column")

    def __len__(self):
        return len(self.names)

    def __iter__(self):
        return iter(self.names)

    def __contains__(self, name):
        return name in self.names

    def to_dict(self) -> Dict:
        return {"names": list(self.names), "stage": self.stage.value}

    @classmethod
    def from_dict(cls, d: Dict) -> "FeatureSubset":
        return cls(d["names"], SelectionStage(d["stage"]))


@dataclass
class PrunedPair:
    kept: str
    dropped: str
    correlation: float

    def to_dict(self) -> Dict:
        return {
            "kept": self.kept,
            "dropped": self.dropped,
            "correlation": self.correlation,
        }


@dataclass
class SelectionReport:
    """
    Everything the hybrid selection run decided.

    Attributes:
        scores (Dict[str, Dict[str, float]]): Per scorer, the score of every column.
        selected (Dict[str, List[str]]): Per scorer, the columns it kept.
        union (List[str]): Union of the scorers' selections.
        pruned_pairs (List[PrunedPair]): Correlated pairs resolved by pruning.
        pruned (List[str]): Columns left after pruning.
        ga_history (List[float]): Best fitness after each generation, starting
            with the initial population.
        final (List[str]): Columns chosen by the wrapper.
    """

    scores: Dict[str, Dict[str, float]] = field(default_factory=dict)
    selected: Dict[str, List[str]] = field(default_factory=dict)
    union: List[str] = field(default_factory=list)
    pruned_pairs: List[PrunedPair] = field(default_factory=list)
    pruned: List[str] = field(default_factory=list)
    ga_history: List[float] = field(default_factory=list)
    ga_best_fitness: Optional[float] = None
    ga_repairs: int = 0
    final: List[str] = field(default_factory=list)

    @property
    def union_size(self) -> int:
        return len(self.union)

    def to_dict(self) -> Dict:
        return {
            "scores": self.scores,
            "selected": self.selected,
            "union": self.union,
            "union_size": self.union_size,
            "pruned_pairs": [p.to_dict() for p in self.pruned_pairs],
            "pruned": self.pruned,
            "ga_history": self.ga_history,
            "ga_best_fitness": self.ga_best_fitness,
            "ga_repairs": self.ga_repairs,
            "final": self.final,
        }


def ordered_union(order: Sequence[str], subsets: Sequence[Sequence[str]]) -> List[str]:
    """Union of ``subsets`` listed in ``order``."""
    chosen = set()
    for s in subsets:
        chosen.update(s)
    return [name for name in order if name in chosen]

