"""
Command-line entry point: one subcommand per pipeline stage.

Each command reads the artifacts of earlier stages from the output directory
(or from explicit paths), writes its own artifacts there, and records a run
manifest ``manifest.<command>.json``. Exit codes: 0 success, 2 invalid input
or configuration, 3 degenerate data or non-convergence, 4 anything else.
"""

import argparse
import logging
import platform
import sys
from dataclasses import replace
from pathlib import Path
from typing import Callable, Dict, List, Optional

import dpkt
import joblib
import numpy as np
import pandas as pd
import requests
import scipy

from probewatch import __version__
from probewatch.config import RunConfig
from probewatch.errors import (
    ConfigError,
    DegenerateDataError,
    EnsembleMemberError,
    InvalidInputError,
)
from probewatch.evaluation import EvalReport
from probewatch.pipeline import (
    CAPTURE_FILE,
    LABELS_FILE,
    MISUSE_FILE,
    Pipeline,
    load_model,
    read_subset,
    read_table,
)
from probewatch.utils import read_json, write_json

logger = logging.getLogger("probewatch")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_DEGENERATE = 3
EXIT_INTERNAL = 4


def exit_code(error: BaseException) -> int:
    """Maps an exception onto the command-line exit code."""
    if isinstance(error, EnsembleMemberError):
        return exit_code(error.cause)
    if isinstance(error, InvalidInputError):
        return EXIT_INVALID
    if isinstance(error, DegenerateDataError):
        return EXIT_DEGENERATE
    return EXIT_INTERNAL


def versions() -> Dict[str, str]:
    return {
        "probewatch": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
        "dpkt": dpkt.__version__,
        "joblib": joblib.__version__,
        "requests": requests.__version__,
    }


def _existing(path: Optional[str], default: Path, what: str) -> Path:
    path = Path(path) if path is not None else default
    if not path.is_file():
        raise ConfigError(f"{what} {path} does not exist")
    return path


def _features(args, pipeline: Pipeline) -> Optional[List[str]]:
    if args.features is None:
        default = pipeline.out_dir / "selection.json"
        return read_subset(default) if default.is_file() else None
    return read_subset(_existing(args.features, Path(), "selection file"))


def _table(args, name: str, pipeline: Pipeline):
    path = getattr(args, name)
    default = pipeline.out_dir / f"{name}.csv"
    return read_table(_existing(path, default, f"{name} table"))


def cmd_synth(args, pipeline: Pipeline):
    pipeline.synth()


def cmd_extract(args, pipeline: Pipeline):
    pipeline.extract(_existing(args.pcap, pipeline.out_dir / CAPTURE_FILE, "capture"))


def cmd_dataset(args, pipeline: Pipeline):
    out = pipeline.out_dir
    if args.unsw is not None:
        remote = args.unsw.startswith(("http://", "https://"))
        source = args.unsw if remote else _existing(args.unsw, Path(), "UNSW file")
        pipeline.dataset(unsw=source)
        return
    sources = pipeline.config.dataset.label_sources
    features = _existing(args.features, out / "flows.csv", "feature table")
    labels = misuse = None
    if "expert" in sources:
        labels = _existing(args.labels, out / LABELS_FILE, "label file")
    if "rules" in sources:
        misuse = _existing(args.misuse, out / MISUSE_FILE, "misuse file")
    pipeline.dataset(features, labels, misuse)


def cmd_select(args, pipeline: Pipeline):
    pipeline.select(_table(args, "train", pipeline), _table(args, "val", pipeline))


def cmd_train(args, pipeline: Pipeline):
    train = _table(args, "train", pipeline)
    val = _table(args, "val", pipeline)
    pipeline.train(train, val, args.model, _features(args, pipeline))


def cmd_tune(args, pipeline: Pipeline):
    train = _table(args, "train", pipeline)
    val = _table(args, "val", pipeline)
    pipeline.tune(train, val, _features(args, pipeline))


def _model(args, pipeline: Pipeline):
    return load_model(_existing(args.model, pipeline.out_dir / "model.json", "model"))


def cmd_eval(args, pipeline: Pipeline):
    test = _table(args, "test", pipeline)
    if args.predictions is not None:
        predictions = _existing(args.predictions, Path(), "predictions")
        pipeline.evaluate_predictions(predictions, test)
        return
    pipeline.evaluate(_model(args, pipeline), test)


def cmd_compare(args, pipeline: Pipeline):
    out = pipeline.out_dir
    report = EvalReport.from_dict(
        read_json(_existing(args.eval, out / "eval.json", "evaluation report"))
    )
    pipeline.compare(report, _existing(args.misuse, out / MISUSE_FILE, "misuse file"))


def cmd_saliency(args, pipeline: Pipeline):
    model = _model(args, pipeline)
    test = _table(args, "test", pipeline)
    pipeline.saliency(model, test, args.row, args.target, args.guided)


def cmd_benchmark(args, pipeline: Pipeline):
    pipeline.benchmark(
        _table(args, "train", pipeline),
        _table(args, "val", pipeline),
        _table(args, "test", pipeline),
        _features(args, pipeline),
        args.preset,
    )


def cmd_sweep(args, pipeline: Pipeline):
    pipeline.sweep(
        _table(args, "train", pipeline),
        _table(args, "val", pipeline),
        _table(args, "test", pipeline),
        _features(args, pipeline),
        args.sides,
    )


COMMANDS: Dict[str, Callable] = {
    "synth": cmd_synth,
    "extract": cmd_extract,
    "dataset": cmd_dataset,
    "select": cmd_select,
    "train": cmd_train,
    "tune": cmd_tune,
    "eval": cmd_eval,
    "compare": cmd_compare,
    "saliency": cmd_saliency,
    "benchmark": cmd_benchmark,
    "sweep": cmd_sweep,
}


def _split_args(p: argparse.ArgumentParser, *names: str):
    for name in names:
        p.add_argument(
            f"--{name}", default=None, help=f"{name} table (default: <out>/{name}.csv)"
        )


def _path_arg(p: argparse.ArgumentParser, flag: str, what: str, default: str):
    p.add_argument(flag, default=None, help=f"{what} (default: <out>/{default})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="probewatch", description="Anomaly-based detection of network probing"
    )
    parser.add_argument("--config", default=None, help="run configuration JSON")
    parser.add_argument(
        "--seed", type=int, default=None, help="seed of every stochastic stage"
    )
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--n-jobs", type=int, default=None, help="parallel workers")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    verbosity.add_argument(
        "-q", "--quiet", action="store_true", help="warnings and errors only"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a labelled synthetic capture")
    p.add_argument("--flows", type=int, default=None, help="total flows")
    p.add_argument("--probe-fraction", type=float, default=None)
    p.add_argument("--novel-fraction", type=float, default=None)
    p.add_argument("--scenario", default=None, help="scenario JSON")

    p = sub.add_parser("extract", help="assemble flows and compute features")
    p.add_argument(
        "pcap",
        nargs="?",
        default=None,
        help=f"classic pcap (default: <out>/{CAPTURE_FILE})",
    )
    p.add_argument("--rules", default=None, help="misuse rule JSON")

    p = sub.add_parser("dataset", help="label, clean, encode and split a feature table")
    _path_arg(p, "--features", "feature table", "flows.csv")
    _path_arg(p, "--labels", "label file", LABELS_FILE)
    _path_arg(p, "--misuse", "misuse verdicts", MISUSE_FILE)
    p.add_argument("--unsw", default=None, help="UNSW-NB15 CSV path or URL")
    p.add_argument(
        "--sample", type=int, default=None, help="rows drawn before splitting"
    )

    p = sub.add_parser("select", help="hybrid feature selection")
    _split_args(p, "train", "val")

    p = sub.add_parser("train", help="fit a model")
    _split_args(p, "train", "val")
    p.add_argument("--features", default=None, help="selection JSON")
    p.add_argument("--model", choices=("ensemble", "cnn"), default="ensemble")

    p = sub.add_parser("tune", help="random-search bagging hyperparameters")
    _split_args(p, "train", "val")
    p.add_argument("--features", default=None, help="selection JSON")
    p.add_argument("--budget", type=int, default=None)

    p = sub.add_parser("eval", help="evaluate a model or a predictions CSV")
    _split_args(p, "test")
    group = p.add_mutually_exclusive_group()
    _path_arg(group, "--model", "model JSON", "model.json")
    group.add_argument("--predictions", default=None, help="CSV with a 'score' column")
    p.add_argument("--threshold", type=float, default=None)

    p = sub.add_parser("compare", help="compare the model with the misuse baseline")
    _path_arg(p, "--eval", "evaluation JSON", "eval.json")
    _path_arg(p, "--misuse", "misuse verdicts", MISUSE_FILE)

    p = sub.add_parser("saliency", help="saliency map of one test row")
    _split_args(p, "test")
    p.add_argument("--model", default=None)
    p.add_argument("--row", type=int, default=0)
    p.add_argument("--target", type=int, choices=(0, 1), default=1)
    p.add_argument("--guided", action="store_true")

    p = sub.add_parser(
        "benchmark", help="four bagging ensembles and the CNN on one split"
    )
    _split_args(p, "train", "val", "test")
    p.add_argument("--features", default=None)
    p.add_argument(
        "--preset", choices=("institutional", "unsw"), default="institutional"
    )

    p = sub.add_parser("sweep", help="CNN over several image sides")
    _split_args(p, "train", "val", "test")
    p.add_argument("--features", default=None)
    p.add_argument("--sides", type=int, nargs="+", default=None)
    return parser


def load_config(args) -> RunConfig:
    """The file configuration (or defaults) with command-line overrides applied."""
    config = RunConfig.from_json(args.config) if args.config else RunConfig()
    top = {}
    if args.seed is not None:
        top["seed"] = args.seed
    if args.out is not None:
        top["out_dir"] = args.out
    if args.n_jobs is not None:
        top["n_jobs"] = args.n_jobs
    if args.command == "synth":
        overrides = {
            "n_flows": args.flows,
            "probe_fraction": args.probe_fraction,
            "novel_fraction": args.novel_fraction,
            "scenario": args.scenario,
        }
        top["synth"] = replace(
            config.synth, **{k: v for k, v in overrides.items() if v is not None}
        )
    if args.command == "extract" and args.rules is not None:
        top["evaluation"] = replace(config.evaluation, rules=args.rules)
    if args.command == "dataset" and args.sample is not None:
        top["dataset"] = replace(config.dataset, sample=args.sample)
    if args.command == "tune" and args.budget is not None:
        top["ensemble"] = replace(config.ensemble, budget=args.budget)
    if args.command == "eval" and args.threshold is not None:
        top["evaluation"] = replace(config.evaluation, threshold=args.threshold)
    return replace(config, **top) if top else config


def _configure_logging(args):
    level = logging.INFO
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def run(args) -> int:
    """Runs one parsed command and writes its manifest."""
    config = load_config(args)
    pipeline = Pipeline(config)
    COMMANDS[args.command](args, pipeline)
    manifest = {
        "command": args.command,
        "arguments": {k: v for k, v in vars(args).items() if k != "command"},
        "config": config.to_dict(),
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "versions": versions(),
        "timings": pipeline.timings,
        "artifacts": pipeline.artifacts,
    }
    write_json(pipeline.out_dir / f"manifest.{args.command}.json", manifest)
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parses arguments, runs the command and maps failures onto exit codes.

    Args:
        argv (List[str], optional): Arguments without the program name.

    Returns:
        int: The exit code.
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args)
    try:
        return run(args)
    except Exception as e:  # pylint: disable=broad-except
        code = exit_code(e)
        logger.error("%s failed: %s", args.command, e)
        if code == EXIT_INTERNAL:
            logger.debug("traceback", exc_info=True)
        return code
