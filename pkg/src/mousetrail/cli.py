"""Command-line interface.

Subcommands mirror the pipeline stages (``ingest``, ``features``,
``simmatrix``, ``build-dataset``, ``train``, ``evaluate``, ``run``) plus
``synth`` for corpus generation.  Values come from an optional key-value
config file; explicit flags win.  Logs go to stderr, machine-readable
output to files.  Exit codes: 0 on success, 2 for configuration errors,
3 for data errors, 4 for anything else.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from mousetrail.config import ConfigError, PipelineConfig, load_config_file, parse_config_value
from mousetrail.dataset import MissingFeatureSource
from mousetrail.models import (EmptyGrid, FeatureLengthMismatch,
                               InconsistentFeatureLength, SingleClassTrainingSet)
from mousetrail.similarity import UnknownQuestion
from mousetrail.synth import ScenarioConfig, write_corpus
from mousetrail.trajectory import DataFormatError

logger = logging.getLogger("mousetrail")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4

_DATA_ERRORS = (DataFormatError, MissingFeatureSource, UnknownQuestion,
                SingleClassTrainingSet, InconsistentFeatureLength,
                FeatureLengthMismatch, EmptyGrid)

_FLAG_TO_KEY = {
    "trajectories": "trajectories",
    "submissions": "submissions",
    "questions": "questions",
    "out_dir": "out_dir",
    "input_format": "input_format",
    "window_size": "window_size",
    "density_threshold": "density_threshold",
    "score_bins": "score_bins",
    "recent_window_days": "recent_window_days",
    "sim_threshold": "sim_threshold",
    "variant": "variant",
    "model": "model",
    "n_runs": "n_runs",
    "seed": "seed",
    "test_fraction": "test_fraction",
    "smote_k": "smote_k",
    "experiment_start_ms": "experiment_start_ms",
    "session_gap_ms": "session_gap_ms",
    "jobs": "jobs",
}


def _add_pipeline_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key-value config file; flags override it")
    parser.add_argument("--trajectories", help="trajectory event log (CSV/JSONL)")
    parser.add_argument("--submissions", help="submission records file")
    parser.add_argument("--questions", help="question metadata file")
    parser.add_argument("--out-dir", dest="out_dir", help="artifact directory")
    parser.add_argument("--input-format", dest="input_format", choices=("csv", "jsonl"))
    parser.add_argument("--window-size", dest="window_size",
                        help="change-point window size in events")
    parser.add_argument("--density-threshold", dest="density_threshold",
                        help="drag-density threshold, a float or 'auto'")
    parser.add_argument("--score-bins", dest="score_bins",
                        help="three interior cut points, e.g. 25,50,75")
    parser.add_argument("--recent-window-days", dest="recent_window_days")
    parser.add_argument("--sim-threshold", dest="sim_threshold",
                        help="minimum similarity for the proposed block")
    parser.add_argument("--variant", choices=("baseline", "proposed", "both"))
    parser.add_argument("--model", choices=("lr", "rf", "gbdt"))
    parser.add_argument("--n-runs", dest="n_runs")
    parser.add_argument("--seed")
    parser.add_argument("--test-fraction", dest="test_fraction")
    parser.add_argument("--smote-k", dest="smote_k")
    parser.add_argument("--experiment-start-ms", dest="experiment_start_ms")
    parser.add_argument("--session-gap-ms", dest="session_gap_ms")
    parser.add_argument("--jobs", help="worker parallelism cap")
    parser.add_argument("--grid-search", dest="grid_search", action="store_true",
                        default=None)
    parser.add_argument("--plots", action="store_true", default=None)


def _build_config(args: argparse.Namespace) -> PipelineConfig:
    config = load_config_file(args.config) if args.config else PipelineConfig()
    overrides = {}
    for flag, key in _FLAG_TO_KEY.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = parse_config_value(key, str(value))
    for flag in ("grid_search", "plots"):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[flag] = value
    return replace(config, **overrides).validate()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mousetrail",
        description="Student performance prediction from mouse-trajectory features",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="generate a seeded synthetic corpus")
    synth.add_argument("--scenario", help="JSON scenario config file")
    synth.add_argument("--out-dir", dest="out_dir", required=True)

    for name, help_text in (
        ("ingest", "parse and validate the input logs"),
        ("features", "extract per-submission mouse features"),
        ("simmatrix", "build the question similarity matrix"),
        ("build-dataset", "assemble baseline/proposed datasets"),
        ("train", "fit models (optionally grid search)"),
        ("evaluate", "repeated-run evaluation and report"),
        ("run", "full pipeline end to end"),
    ):
        stage = sub.add_parser(name, help=help_text)
        _add_pipeline_flags(stage)
    return parser


def _run_command(args: argparse.Namespace) -> int:
    from mousetrail import pipeline

    if args.command == "synth":
        scenario = ScenarioConfig()
        if args.scenario:
            path = Path(args.scenario)
            if not path.exists():
                raise ConfigError(f"scenario file not found: {path}")
            try:
                scenario = ScenarioConfig.from_json(path.read_text(encoding="utf-8"))
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"bad scenario file {path}: {exc}") from None
        paths = write_corpus(scenario, args.out_dir)
        logger.info("wrote corpus: %s", ", ".join(sorted(paths)))
        return EXIT_OK

    cfg = _build_config(args)
    stage_of = {
        "ingest": pipeline.stage_ingest,
        "features": pipeline.stage_features,
        "simmatrix": pipeline.stage_simmatrix,
        "build-dataset": pipeline.stage_build_dataset,
        "train": pipeline.stage_train,
        "evaluate": pipeline.stage_evaluate,
        "run": pipeline.run_pipeline,
    }
    if args.command in ("ingest", "features", "simmatrix", "run"):
        cfg.require_inputs()
    result = stage_of[args.command](cfg)
    if args.command in ("run", "evaluate") and isinstance(result, dict):
        for variant, block in result.get("variants", {}).items():
            logger.info("%s: accuracy %.4f +/- %.4f, weighted F1 %.4f, AUC %.4f",
                        variant, block["accuracy_mean"], block["accuracy_std"],
                        block["weighted_f1_mean"], block["macro_auc_mean"])
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(stream=sys.stderr,
                        level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _run_command(args)
    except ConfigError as exc:
        logger.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except _DATA_ERRORS as exc:
        logger.error("data error: %s", exc)
        return EXIT_DATA
    except Exception:  # pragma: no cover - defensive
        logger.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    raise SystemExit(main())
