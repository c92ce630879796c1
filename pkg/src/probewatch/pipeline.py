"""

The pipeline module contains the Pipeline class, which runs the detection
stages one at a time and persists every intermediate artifact under the
run's output directory.
"""

import csv
import io
import logging
import time
from contextlib import contextmanager
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from probewatch.capture import read_pcap, segment
from probewatch.cnn import CnnModel, CnnSpec, saliency, to_pgm, train_cnn_table
from probewatch.config import RunConfig
from probewatch.constants import KEY_COLUMNS, LABEL_COLUMN
from probewatch.dataset import (
    FeatureTable,
    Imputer,
    LabelSet,
    LabelSource,
    build_feature_table,
    combine_labels,
    describe_flows,
    drop_uninformative,
    from_csv,
    load_unsw_csv,
    one_hot_encode,
    sample_rows,
    scale,
    schema_json,
    split,
    to_csv,
)
from probewatch.ensemble import (
    BENCHMARK_KINDS,
    BaggingModel,
    TuningResult,
    bagging_preset,
    fit_bagging_table,
    random_search_tune,
)
from probewatch.errors import (
    ConfigError,
    LengthMismatchError,
    NonConvergenceError,
    RowSetMismatchError,
    SchemaMismatchError,
)
from probewatch.evaluation import (
    BenchmarkTable,
    ComparisonReport,
    EvalReport,
    benchmark,
    compare,
    default_rules,
    evaluate,
    load_rules,
    misuse_detect,
    read_misuse_csv,
    roc_csv,
)
from probewatch.flows import FlowAssembler
from probewatch.selection import (
    FeatureSubset,
    SelectionReport,
    SelectionStage,
    correlation_prune,
    filter_select,
    ga_wrapper_select,
)
from probewatch.synth import (
    GeneratedTrace,
    ScenarioConfig,
    default_scenario,
    gen_dataset,
    read_ground_truth,
)
from probewatch.temporal import count_signals_windowed
from probewatch.utils import Source, format_float, read_json, read_source, write_json

logger = logging.getLogger(__name__)

Model = Union[BaggingModel, CnnModel]

CAPTURE_FILE = "capture.pcap"
LABELS_FILE = "labels.csv"
FLOWS_TABLE = "flows"
MISUSE_FILE = "misuse.csv"
SPLITS = ("train", "val", "test")
SCORE_COLUMN = "score"
PREDICTION_COLUMN = "prediction"


def table_path(path: Union[str, Path]) -> Path:
    """The CSV of a table artifact, given either the CSV or its stem."""
    path = Path(path)
    return path if path.suffix == ".csv" else path.with_suffix(".csv")


def read_table(path: Union[str, Path]) -> FeatureTable:
    """
    Reads a table artifact, using its ``.schema.json`` sibling when present.

    Raises:
        ConfigError: If the CSV does not exist.
    """
    path = table_path(path)
    if not path.is_file():
        raise ConfigError(f"table {path} does not exist")
    schema_file = path.with_suffix(".schema.json")
    schema = read_json(schema_file) if schema_file.is_file() else None
    return from_csv(path, schema=schema)


def load_model(source: Source) -> Model:
    """
    Restores a model written by ``Pipeline.train``.

    Raises:
        SchemaMismatchError: If the document is not a known model type.
    """
    d = read_json(source)
    kind = d.get("model") if isinstance(d, dict) else None
    if kind == "bagging":
        return BaggingModel.from_dict(d)
    if kind == "cnn":
        return CnnModel.from_dict(d)
    raise SchemaMismatchError(f"unknown model type {kind!r}")


def read_subset(source: Source) -> List[str]:
    """Final feature names of a ``selection.json`` artifact."""
    d = read_json(source)
    return FeatureSubset.from_dict(d["subset"]).names


class Pipeline:
    """
    Runs pipeline stages against one output directory.

    Every stage writes its artifacts through the pipeline, which records the
    written paths and the wall time spent per stage for the run manifest.

    Args:
        config (RunConfig, optional): Run configuration. Defaults to ``RunConfig()``.
    """

    def __init__(self, config: Optional[RunConfig] = None):
        self.config = config or RunConfig()
        self.timings: Dict[str, float] = {}
        self.artifacts: List[str] = []

    @property
    def out_dir(self) -> Path:
        """The directory receiving every artifact.

        Returns:
            Path: The output directory, created on first use.
        """
        path = Path(self.config.out_dir)
        path.mkdir(parents=True, exist_ok=True)
        return path

    @property
    def seed(self) -> int:
        """The run seed, required by every stochastic stage.

        Raises:
            ConfigError: If neither the configuration nor the command line set one.
        """
        if self.config.seed is None:
            raise ConfigError("this stage is stochastic; set a seed with --seed")
        return self.config.seed

    @contextmanager
    def timed(self, stage: str):
        start = time.perf_counter()
        logger.info("%s: started", stage)
        try:
            yield
        finally:
            self.timings[stage] = time.perf_counter() - start
            logger.info("%s: finished in %.2fs", stage, self.timings[stage])

    def _record(self, path: Path) -> Path:
        self.artifacts.append(str(path))
        logger.info("wrote %s", path)
        return path

    def write_bytes(self, name: str, data: bytes) -> Path:
        path = self.out_dir / name
        path.write_bytes(data)
        return self._record(path)

    def write_json(self, name: str, obj) -> Path:
        return self._record(write_json(self.out_dir / name, obj))

    def write_table(self, stem: str, table: FeatureTable) -> Path:
        """Writes ``<stem>.csv`` and its ``<stem>.schema.json`` companion."""
        self.write_json(f"{stem}.schema.json", schema_json(table))
        return self.write_bytes(f"{stem}.csv", to_csv(table))

    def rules(self):
        """The misuse ruleset of the run."""
        path = self.config.evaluation.rules
        if path is None:
            return default_rules()
        if not Path(path).is_file():
            raise ConfigError(f"rule file {path} does not exist")
        return load_rules(path)

    def synth(self) -> GeneratedTrace:
        """Generates the scenario's capture and label file.

        Returns:
            GeneratedTrace: The generated packets, flows and ground truth.

        Raises:
            ConfigError: If the scenario file does not exist.
        """
        cfg = self.config.synth
        with self.timed("synth"):
            if cfg.scenario is not None:
                if not Path(cfg.scenario).is_file():
                    raise ConfigError(f"scenario file {cfg.scenario} does not exist")
                doc = {**read_json(cfg.scenario), "seed": self.seed}
                scenario = ScenarioConfig.from_dict(doc)
            else:
                scenario = default_scenario(
                    cfg.n_flows,
                    cfg.probe_fraction,
                    cfg.novel_fraction,
                    self.seed,
                    cfg.burst_size,
                )
            trace = gen_dataset(scenario)
            pcap = trace.pcap_bytes(self.config.capture.byteorder)
            self.write_json("scenario.json", scenario.to_dict())
            self.write_bytes(CAPTURE_FILE, pcap)
            self.write_bytes(LABELS_FILE, trace.truth.to_csv())
        return trace

    def extract(self, pcap: Source) -> FeatureTable:
        """Turns a capture into the raw feature table and the misuse verdicts.

        Packets are fed to one flow assembler segment by segment, so flows
        spanning a segment boundary stay whole.

        Args:
            pcap (Source): Classic pcap bytes, path or URL.

        Returns:
            FeatureTable: One row per flow, before encoding.
        """
        with self.timed("extract"):
            packets = read_pcap(pcap)
            timeouts = self.config.flows
            assembler = FlowAssembler(
                timeouts.tcp_idle_timeout, timeouts.other_idle_timeout
            )
            for seg in segment(packets, self.config.capture.segment_size):
                for packet in seg.packets:
                    assembler.add(packet)
                logger.debug("segment %d: %d packets", seg.index, len(seg.packets))
            flows = assembler.flush()
            temporal = self.config.temporal
            rows = count_signals_windowed(
                packets, flows, temporal.window, temporal.trailing
            )
            table = build_feature_table(flows, rows)
            verdicts = misuse_detect(table, self.rules())
            self.write_table(FLOWS_TABLE, table)
            self.write_bytes(MISUSE_FILE, verdicts.to_csv())
            self.write_json(
                "flows.summary.json",
                {"flows": describe_flows(flows), "misuse": verdicts.to_dict()},
            )
        return table

    def _labelled(
        self, table: FeatureTable, labels: Optional[Source], misuse: Optional[Source]
    ) -> FeatureTable:
        sets: List[LabelSet] = []
        sources = self.config.dataset.label_sources
        if "expert" in sources:
            if labels is None:
                raise ConfigError("the expert label source needs a label file")
            sets.append(read_ground_truth(labels).to_label_set())
        if "rules" in sources:
            if misuse is None:
                raise ConfigError("the rules label source needs a misuse verdict file")
            result = read_misuse_csv(misuse)
            if result.keys is None:
                raise SchemaMismatchError("misuse verdicts carry no row keys")
            verdicts = {k: int(v) for k, v in zip(result.keys, result.verdicts)}
            sets.append(LabelSet(LabelSource.RULE_ENGINE, verdicts))
        y, conflicts = combine_labels(sets, table.row_keys())
        self.write_json("labels.conflicts.json", conflicts)
        return table.with_labels(y)

    def dataset(
        self,
        features: Optional[Source] = None,
        labels: Optional[Source] = None,
        misuse: Optional[Source] = None,
        unsw: Optional[Source] = None,
    ) -> Dict[str, FeatureTable]:
        """Labels, cleans, encodes, splits, imputes and scales a feature table.

        Encoding runs on the whole table so every split shares one column
        set; imputation statistics and scaling ranges come from the training
        rows only.

        Args:
            features (Source, optional): A ``flows.csv`` written by ``extract``.
            labels (Source, optional): Ground-truth label file.
            misuse (Source, optional): Misuse verdicts, for the ``rules`` label source.
            unsw (Source, optional): A UNSW-NB15 CSV, used instead of ``features``.

        Returns:
            Dict[str, FeatureTable]: The ``train``, ``val`` and ``test`` tables.
        """
        cfg = self.config.dataset
        with self.timed("dataset"):
            if unsw is not None:
                table = load_unsw_csv(unsw)
            elif features is not None:
                table = self._labelled(read_table(features), labels, misuse)
            else:
                raise ConfigError("dataset needs a feature table or a UNSW-NB15 file")
            if cfg.sample is not None:
                table = sample_rows(table, cfg.sample, self.seed)
            table, dropped = drop_uninformative(table, cfg.missing_threshold)
            table = one_hot_encode(table)
            parts = dict(zip(SPLITS, split(table, cfg.ratios, self.seed, cfg.stratify)))
            imputer = Imputer(cfg.imputation, cfg.sentinel).fit(parts["train"])
            parts = {name: imputer.transform(t) for name, t in parts.items()}
            scaler = scale(parts["train"])
            parts = {name: scaler.transform(t) for name, t in parts.items()}
            for name, t in parts.items():
                self.write_table(name, t)
            self.write_json(
                "preprocess.json",
                {
                    "dropped": dropped,
                    "imputer": imputer,
                    "scaler": scaler,
                    "rows": {name: t.n_rows for name, t in parts.items()},
                    "positives": {
                        name: int(t.labels.sum()) for name, t in parts.items()
                    },
                },
            )
        return parts

    def select(self, train: FeatureTable, val: FeatureTable) -> FeatureSubset:
        """Runs the filter, pruning and wrapper stages.

        The wrapper is skipped when pruning leaves fewer than two columns.

        Args:
            train (FeatureTable): Labelled, encoded training rows.
            val (FeatureTable): Labelled validation rows.

        Returns:
            FeatureSubset: The final columns.
        """
        cfg = self.config.selection
        report = SelectionReport()
        with self.timed("select"):
            union = filter_select(
                train,
                cfg.k,
                cfg.threshold,
                cfg.n_trees,
                self.seed,
                self.config.n_jobs,
                report,
            )
            pruned = correlation_prune(train, union.names, cfg.prune_threshold, report)
            if len(pruned) >= 2:
                genetic = replace(
                    cfg.genetic, seed=self.seed, n_jobs=self.config.n_jobs
                )
                subset = ga_wrapper_select(train, val, pruned.names, genetic, report)
            else:
                logger.warning(
                    "pruning left %d columns; skipping the wrapper", len(pruned)
                )
                report.final = list(pruned.names)
                subset = FeatureSubset(pruned.names, SelectionStage.PRUNED)
            self.write_json("selection.json", {"report": report, "subset": subset})
        return subset

    def _columns(
        self, table: FeatureTable, features: Optional[Sequence[str]]
    ) -> List[str]:
        if features is None:
            return table.names
        absent = [n for n in features if n not in table.names]
        if absent:
            raise SchemaMismatchError(
                f"selected features {absent} are not table columns"
            )
        return list(features)

    def _check_convergence(self, model: BaggingModel):
        stalled = [
            i
            for i, m in enumerate(model.members)
            if not getattr(m.learner, "converged", True)
        ]
        if stalled:
            message = f"{len(stalled)} of {len(model.members)} members did not converge"
            if self.config.ensemble.strict_convergence:
                raise NonConvergenceError(message)
            logger.warning(message)

    def fit_ensemble(
        self, train: FeatureTable, spec, names: Sequence[str]
    ) -> BaggingModel:
        spec = replace(spec, seed=self.seed, n_jobs=self.config.n_jobs)
        model = fit_bagging_table(train, spec, names)
        self._check_convergence(model)
        return model

    def fit_cnn(
        self, train: FeatureTable, val: Optional[FeatureTable], spec, names
    ) -> CnnModel:
        return train_cnn_table(train, replace(spec, seed=self.seed), val, names)

    def train(
        self,
        train: FeatureTable,
        val: Optional[FeatureTable] = None,
        model: str = "ensemble",
        features: Optional[Sequence[str]] = None,
    ) -> Model:
        """Fits the bagging ensemble or the CNN and writes ``model.json``.

        Args:
            train (FeatureTable): Training rows.
            val (FeatureTable, optional): Validation rows, tracked per CNN epoch.
            model (str): ``ensemble`` or ``cnn``.
            features (Sequence[str], optional): Columns to train on; all when None.

        Returns:
            Model: The fitted model.
        """
        names = self._columns(train, features)
        with self.timed(f"train.{model}"):
            if model == "ensemble":
                fitted = self.fit_ensemble(train, self.config.ensemble.spec, names)
            elif model == "cnn":
                fitted = self.fit_cnn(train, val, self.config.cnn.spec, names)
            else:
                raise ConfigError(f"unknown model {model!r}; use 'ensemble' or 'cnn'")
            self.write_json("model.json", fitted)
        return fitted

    def tune(
        self,
        train: FeatureTable,
        val: FeatureTable,
        features: Optional[Sequence[str]] = None,
    ) -> TuningResult:
        """Random-searches bagging hyperparameters on the validation rows."""
        cfg = self.config.ensemble
        names = self._columns(train, features)
        with self.timed("tune"):
            result = random_search_tune(
                cfg.space,
                cfg.budget,
                train.matrix(names),
                train.require_labels(),
                val.matrix(names),
                val.require_labels(),
                replace(cfg.spec, seed=self.seed, n_jobs=1),
                metric=cfg.metric,
                seed=self.seed,
                n_jobs=self.config.n_jobs,
                feature_names=names,
            )
            self.write_json("tuning.json", result)
        return result

    def score(self, model: Model, table: FeatureTable) -> EvalReport:
        """Evaluates a model on labelled rows without writing anything."""
        proba = model.predict_proba_table(table)[:, 1]
        rows = table.row_keys() if table.keys is not None else None
        return evaluate(
            table.require_labels(), proba, self.config.evaluation.threshold, rows=rows
        )

    def _write_predictions(
        self, table: FeatureTable, report: EvalReport, scores
    ) -> Path:
        out: Dict[str, List[str]] = {}
        if table.keys is not None:
            for name in KEY_COLUMNS:
                out[name] = [str(v) for v in table.keys[name]]
        out[SCORE_COLUMN] = [format_float(s) for s in scores]
        out[PREDICTION_COLUMN] = [str(int(p)) for p in report.predictions]
        out[LABEL_COLUMN] = [str(int(v)) for v in report.labels]
        buf = io.StringIO()
        pd.DataFrame(out, columns=list(out)).to_csv(
            buf, index=False, lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL
        )
        return self.write_bytes("predictions.csv", buf.getvalue().encode("utf-8"))

    def evaluate(self, model: Model, test: FeatureTable) -> EvalReport:
        """Scores a model on the test rows; writes the report, ROC and predictions.

        Args:
            model (Model): A fitted model.
            test (FeatureTable): Labelled test rows.

        Returns:
            EvalReport: The report.
        """
        with self.timed("eval"):
            report = self.score(model, test)
            scores = model.predict_proba_table(test)[:, 1]
            self._write_eval(test, report, scores)
        return report

    def evaluate_predictions(
        self, predictions: Source, test: FeatureTable
    ) -> EvalReport:
        """Evaluates a CSV of per-row ``score`` values against the test labels.

        Raises:
            SchemaMismatchError: If the CSV has no numeric ``score`` column.
            LengthMismatchError: If the CSV and the table differ in row count.
        """
        with self.timed("eval"):
            frame = pd.read_csv(io.BytesIO(read_source(predictions)))
            if SCORE_COLUMN not in frame.columns:
                raise SchemaMismatchError(
                    f"predictions lack the {SCORE_COLUMN!r} column"
                )
            try:
                scores = frame[SCORE_COLUMN].to_numpy(dtype=float)
            except ValueError as e:
                raise SchemaMismatchError(f"non-numeric {SCORE_COLUMN!r}: {e}") from e
            if len(scores) != test.n_rows:
                raise LengthMismatchError(
                    f"{len(scores)} predictions for {test.n_rows} rows"
                )
            rows = test.row_keys() if test.keys is not None else None
            threshold = self.config.evaluation.threshold
            report = evaluate(test.require_labels(), scores, threshold, rows=rows)
            self._write_eval(test, report, scores)
        return report

    def _write_eval(self, test: FeatureTable, report: EvalReport, scores):
        self.write_json("eval.json", report)
        self.write_bytes("roc.csv", roc_csv(report.roc).encode("utf-8"))
        self._write_predictions(test, report, scores)

    def compare(self, report: EvalReport, misuse: Source) -> ComparisonReport:
        """Compares an evaluation report with the misuse verdicts of the same rows.

        Args:
            report (EvalReport): The anomaly model's report, with row keys.
            misuse (Source): ``misuse.csv`` written by ``extract``.

        Returns:
            ComparisonReport: Both reports and their disagreements.

        Raises:
            RowSetMismatchError: If a report row has no misuse verdict.
        """
        with self.timed("compare"):
            if report.rows is None or report.labels is None:
                raise RowSetMismatchError(
                    "the report carries no row keys to align verdicts on"
                )
            result = read_misuse_csv(misuse)
            if result.keys is None:
                raise RowSetMismatchError("misuse verdicts carry no row keys")
            verdicts = {tuple(k): int(v) for k, v in zip(result.keys, result.verdicts)}
            absent = [r for r in report.rows if tuple(r) not in verdicts]
            if absent:
                raise RowSetMismatchError(
                    f"{len(absent)} report rows have no misuse verdict"
                )
            baseline = evaluate(
                report.labels,
                [verdicts[tuple(r)] for r in report.rows],
                0.5,
                rows=report.rows,
            )
            comparison = compare(report, baseline)
            self.write_json("comparison.json", comparison)
        return comparison

    def saliency(
        self,
        model: Model,
        table: FeatureTable,
        row: int = 0,
        target_class: int = 1,
        guided: bool = False,
    ) -> np.ndarray:
        """Writes the input image and saliency map of one row as PGM files.

        Raises:
            ConfigError: If the model is not a CNN or the row does not exist.
        """
        if not isinstance(model, CnnModel) or model.encoding is None:
            raise ConfigError("saliency needs a CNN model with a row encoding")
        if not 0 <= row < table.n_rows:
            raise ConfigError(f"row {row} is outside the table's {table.n_rows} rows")
        with self.timed("saliency"):
            image = model.encoding.encode(table.matrix(model.feature_names)[row])
            heat = saliency(model, image, target_class, guided)
            self.write_bytes("input.pgm", to_pgm(image).encode("ascii"))
            self.write_bytes("saliency.pgm", to_pgm(heat).encode("ascii"))
        return heat

    def benchmark(
        self,
        train: FeatureTable,
        val: FeatureTable,
        test: FeatureTable,
        features: Optional[Sequence[str]] = None,
        preset: str = "institutional",
    ) -> BenchmarkTable:
        """Fits the four tuned bagging ensembles and the CNN on one split.

        Args:
            train (FeatureTable): Training rows.
            val (FeatureTable): Validation rows for the CNN.
            test (FeatureTable): Rows every model is scored on.
            features (Sequence[str], optional): Columns; all when None.
            preset (str): ``institutional`` or ``unsw`` hyperparameters.

        Returns:
            BenchmarkTable: One row per model.
        """
        names = self._columns(train, features)
        cnn_spec = self.config.cnn.spec
        if preset == "unsw":
            cnn_spec = CnnSpec.unsw(side=cnn_spec.side)
        reports: Dict[str, EvalReport] = {}
        with self.timed("benchmark"):
            for kind in BENCHMARK_KINDS:
                model = self.fit_ensemble(train, bagging_preset(kind, preset), names)
                reports[f"bagging-{kind.value}"] = self.score(model, test)
            reports["cnn"] = self.score(self.fit_cnn(train, val, cnn_spec, names), test)
            table = benchmark(reports)
            self.write_json("benchmark.json", table)
            self.write_bytes("benchmark.csv", table.to_csv())
        return table

    def sweep(
        self,
        train: FeatureTable,
        val: FeatureTable,
        test: FeatureTable,
        features: Optional[Sequence[str]] = None,
        sides: Optional[Sequence[int]] = None,
    ) -> List[Dict]:
        """Trains the CNN once per image side and scores each on the test rows.

        Training time per side goes into the manifest timings as ``sweep.<side>``.

        Returns:
            List[Dict]: ``side``, ``f1`` and ``auc`` per side.
        """
        names = self._columns(train, features)
        rows = []
        for side in sides or self.config.cnn.sides:
            with self.timed(f"sweep.{side}"):
                spec = replace(self.config.cnn.spec, side=int(side))
                report = self.score(self.fit_cnn(train, val, spec, names), test)
            rows.append({"side": int(side), "f1": report.f1, "auc": report.auc})
        self.write_json("sweep.json", {"rows": rows})
        return rows
