"""
Run configuration: one block per pipeline stage, loaded from JSON.

Every default equals the pipeline constant it mirrors, so an empty JSON
object is a valid configuration. Unknown keys are rejected rather than
ignored.
"""

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from probewatch.cnn.network import CnnSpec
from probewatch.constants import (
    DEFAULT_SEGMENT_SIZE,
    FILTER_TOP_K,
    MISSING_THRESHOLD,
    OTHER_IDLE_TIMEOUT,
    PRUNE_THRESHOLD,
    SPLIT_RATIOS,
    STRUCTURAL_SENTINEL,
    TARGET_CORRELATION_THRESHOLD,
    TCP_IDLE_TIMEOUT,
    TEMPORAL_WINDOW,
)
from probewatch.ensemble.bagging import BaggingSpec
from probewatch.ensemble.presets import bagging_preset
from probewatch.errors import ArgumentError, ConfigError
from probewatch.selection.genetic import GeneticConfig
from probewatch.utils import dump_json

DEFAULT_TUNING_SPACE: Dict[str, Any] = {
    "kind": ["svm", "knn", "gnb", "logreg"],
    "n_estimators": [5, 10, 20],
    "max_samples": {"low": 0.3, "high": 1.0},
    "max_features": {"low": 0.5, "high": 1.0},
    "bootstrap": [True, False],
    "knn.k": [1, 3, 5, 7],
    "svm.C": {"low": 0.1, "high": 100.0, "log": True},
    "logreg.C": {"low": 0.01, "high": 200.0, "log": True},
    "gnb.variance_smoothing": {"low": 1e-9, "high": 1.0, "log": True},
}


@dataclass
class SynthConfig:
    """
    Generator request of the ``synth`` command.

    Attributes:
        n_flows (int): Total flows of the default scenario.
        probe_fraction (float): Share of probing flows.
        novel_fraction (float): Share of probing flows the default rules miss.
        burst_size (int): Flow cap per scan burst.
        scenario (str, optional): Path of a scenario JSON replacing the default scenario.
    """

    n_flows: int = 5000
    probe_fraction: float = 0.1
    novel_fraction: float = 0.0
    burst_size: int = 100
    scenario: Optional[str] = None


@dataclass
class CaptureConfig:
    segment_size: int = DEFAULT_SEGMENT_SIZE
    byteorder: str = "little"

    def __post_init__(self):
        if self.segment_size < 1:
            raise ArgumentError("segment_size must be >= 1")
        if self.byteorder not in ("little", "big"):
            raise ArgumentError("byteorder must be 'little' or 'big'")


@dataclass
class FlowConfig:
    tcp_idle_timeout: float = TCP_IDLE_TIMEOUT
    other_idle_timeout: float = OTHER_IDLE_TIMEOUT

    def __post_init__(self):
        if self.tcp_idle_timeout <= 0 or self.other_idle_timeout <= 0:
            raise ArgumentError("idle timeouts must be positive")


@dataclass
class TemporalConfig:
    window: float = TEMPORAL_WINDOW
    trailing: bool = False

    def __post_init__(self):
        if self.window <= 0:
            raise ArgumentError("window must be positive")


@dataclass
class DatasetConfig:
    """
    Preparation of the feature table.

    Attributes:
        missing_threshold (float): Columns missing more than this are dropped.
        imputation (str): ``mean`` or ``median``.
        sentinel (float): Fill of STRUCTURAL-missing numeric cells.
        ratios (List[float]): Train, validation and test fractions.
        stratify (bool): Split each class on its own.
        sample (int, optional): Rows drawn at random before splitting.
        label_sources (List[str]): Sources OR-combined into the label: ``expert``, ``rules``.
    """

    missing_threshold: float = MISSING_THRESHOLD
    imputation: str = "mean"
    sentinel: float = STRUCTURAL_SENTINEL
    ratios: List[float] = field(default_factory=lambda: list(SPLIT_RATIOS))
    stratify: bool = True
    sample: Optional[int] = None
    label_sources: List[str] = field(default_factory=lambda: ["expert"])

    def __post_init__(self):
        self.ratios = list(self.ratios)
        if self.imputation not in ("mean", "median"):
            raise ArgumentError("imputation must be 'mean' or 'median'")
        if len(self.ratios) != 3 or abs(sum(self.ratios) - 1.0) > 1e-9:
            raise ArgumentError("ratios must be three fractions summing to 1")
        unknown = set(self.label_sources) - {"expert", "rules"}
        if unknown or not self.label_sources:
            raise ArgumentError(
                "label_sources must be a non-empty subset of ['expert', 'rules']"
            )
        if self.sample is not None and self.sample < 1:
            raise ArgumentError("sample must be >= 1")


@dataclass
class SelectionConfig:
    """
    Hybrid feature selection.

    Attributes:
        k (int): Columns kept by each ranking scorer.
        threshold (float): Minimum absolute target correlation.
        prune_threshold (float): Maximum pairwise correlation after pruning.
        n_trees (int): Trees of the importance scorer.
        genetic (GeneticConfig): Wrapper search; its seed and n_jobs come from the run.
    """

    k: int = FILTER_TOP_K
    threshold: float = TARGET_CORRELATION_THRESHOLD
    prune_threshold: float = PRUNE_THRESHOLD
    n_trees: int = 100
    genetic: GeneticConfig = field(default_factory=GeneticConfig)

    def __post_init__(self):
        if isinstance(self.genetic, dict):
            self.genetic = _build(GeneticConfig, self.genetic, "selection.genetic")


@dataclass
class EnsembleConfig:
    """
    Bagging model and its tuner.

    Attributes:
        spec (BaggingSpec): Model trained by ``train --model ensemble``.
        space (Dict[str, Any]): Random-search space of ``tune``.
        budget (int): Tuning trials.
        metric (str): Validation metric maximised by the tuner.
        strict_convergence (bool): Fail when a member's solver did not converge.
    """

    spec: BaggingSpec = field(default_factory=lambda: bagging_preset("knn"))
    space: Dict[str, Any] = field(default_factory=lambda: dict(DEFAULT_TUNING_SPACE))
    budget: int = 20
    metric: str = "f1"
    strict_convergence: bool = False

    def __post_init__(self):
        if isinstance(self.spec, dict):
            self.spec = BaggingSpec.from_dict(self.spec)
        if self.budget < 1:
            raise ArgumentError("budget must be >= 1")


@dataclass
class CnnConfig:
    """
    Attributes:
        spec (CnnSpec): Network and training hyperparameters; JSON keys override the
            institutional preset.
        sides (List[int]): Image sides visited by ``sweep``.
    """

    spec: CnnSpec = field(default_factory=CnnSpec.institutional)
    sides: List[int] = field(default_factory=lambda: [16, 32])

    def __post_init__(self):
        if isinstance(self.spec, dict):
            self.spec = CnnSpec.institutional(**self.spec)
        self.sides = [int(s) for s in self.sides]
        if not self.sides:
            raise ArgumentError("sides must not be empty")


@dataclass
class EvaluationConfig:
    """
    Attributes:
        threshold (float): Decision threshold on the probing probability.
        rules (str, optional): Path of a misuse rule file; the shipped rules when None.
    """

    threshold: float = 0.5
    rules: Optional[str] = None


_BLOCKS = {
    "synth": SynthConfig,
    "capture": CaptureConfig,
    "flows": FlowConfig,
    "temporal": TemporalConfig,
    "dataset": DatasetConfig,
    "selection": SelectionConfig,
    "ensemble": EnsembleConfig,
    "cnn": CnnConfig,
    "evaluation": EvaluationConfig,
}


def _build(cls, d: Any, where: str):
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be a JSON object")
    unknown = set(d) - {f.name for f in fields(cls)}
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    try:
        return cls(**d)
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as e:
        raise ConfigError(f"invalid {where}: {e}") from e


@dataclass
class RunConfig:
    """
    Complete configuration of a pipeline run.

    Attributes:
        seed (int, optional): Seed of every stochastic stage; stochastic stages
            refuse to run without one.
        out_dir (str): Directory receiving artifacts and manifests.
        n_jobs (int): Parallel workers for forests, bagging, the GA and tuning.
    """

    seed: Optional[int] = None
    out_dir: str = "out"
    n_jobs: int = 1
    synth: SynthConfig = field(default_factory=SynthConfig)
    capture: CaptureConfig = field(default_factory=CaptureConfig)
    flows: FlowConfig = field(default_factory=FlowConfig)
    temporal: TemporalConfig = field(default_factory=TemporalConfig)
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    cnn: CnnConfig = field(default_factory=CnnConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)

    def __post_init__(self):
        seed = self.seed
        valid = isinstance(seed, int) and not isinstance(seed, bool) and seed >= 0
        if seed is not None and not valid:
            raise ConfigError(f"seed must be a non-negative integer, got {seed!r}")
        if self.n_jobs == 0:
            raise ConfigError("n_jobs must not be 0")

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "RunConfig":
        """
        Builds a configuration from its JSON object.

        Raises:
            ConfigError: On unknown keys or invalid values.
        """
        if not isinstance(d, dict):
            raise ConfigError("a run configuration must be a JSON object")
        top = {f.name for f in fields(cls)}
        unknown = set(d) - top
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        kwargs = {}
        for name, value in d.items():
            if name in _BLOCKS:
                value = _build(_BLOCKS[name], value, name)
            kwargs[name] = value
        return cls(**kwargs)

    @classmethod
    def from_json(cls, path: Union[str, Path]) -> "RunConfig":
        """
        Loads a configuration file.

        Raises:
            ConfigError: If the file is missing, is not JSON or is invalid.
        """
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"configuration file {path} does not exist")
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path} is not valid JSON: {e}") from e
        return cls.from_dict(doc)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "seed": self.seed,
            "out_dir": self.out_dir,
            "n_jobs": self.n_jobs,
            "synth": asdict(self.synth),
            "capture": asdict(self.capture),
            "flows": asdict(self.flows),
            "temporal": asdict(self.temporal),
            "dataset": asdict(self.dataset),
            "selection": asdict(self.selection),
            "ensemble": {
                "spec": self.ensemble.spec.to_dict(),
                "space": self.ensemble.space,
                "budget": self.ensemble.budget,
                "metric": self.ensemble.metric,
                "strict_convergence": self.ensemble.strict_convergence,
            },
            "cnn": {"spec": self.cnn.spec.to_dict(), "sides": list(self.cnn.sides)},
            "evaluation": asdict(self.evaluation),
        }

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON rendering."""
        return hashlib.sha256(dump_json(self.to_dict()).encode("utf-8")).hexdigest()
