"""End-to-end pipeline stages and repeated-run evaluation.

Stages communicate through files under ``out_dir`` so that running the CLI
subcommands one by one produces exactly the same final report as ``run``:

* ``ingest``        -> ingest_summary.json
* ``features``      -> mouse_features.csv
* ``simmatrix``     -> similarity_matrix.csv
* ``build-dataset`` -> dataset_<variant>.csv + dataset_manifest.json
* ``train``         -> model_<variant>_<kind>.json (+ best_spec.json with grid search)
* ``evaluate``      -> report.json, roc_<variant>.csv, heatmap_<variant>.csv

Reports carry no wall-clock data, so identical configs reproduce them
bit-for-bit.  Question and student statistics use records before the
experiment start; recent statistics use each record's trailing window; the
similarity network uses only pre-experiment first submissions, so no
feature sees data at or past its record's submission time.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from mousetrail import dataset as ds
from mousetrail import evaluation as ev
from mousetrail import models as md
from mousetrail.changepoint import (ChangePoints, DensityParams,
                                    TrajectoryTooShort, detect_change_points)
from mousetrail.config import AUTO, ConfigError, PipelineConfig, derive_seed
from mousetrail.interaction import (MOUSE_FEATURE_NAMES, FeatureVector,
                                    extract_mouse_features)
from mousetrail.similarity import (ProblemSolvingNetwork, SimilarityMatrix,
                                   build_similarity_matrix)
from mousetrail.statistics import (FeatureSchema, compute_question_stats,
                                   compute_recent_stats, compute_student_stats)
from mousetrail.trajectory import (SubmissionRecord, match_trajectories,
                                   parse_events_log, parse_questions_log,
                                   parse_submissions_log)

logger = logging.getLogger(__name__)

FEATURE_CSV = "mouse_features.csv"
MATRIX_CSV = "similarity_matrix.csv"
REPORT_JSON = "report.json"


def _out(cfg: PipelineConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def load_inputs(cfg: PipelineConfig):
    cfg.require_inputs()
    trajectories = parse_events_log(Path(cfg.trajectories), cfg.input_format,
                                    session_gap_ms=cfg.session_gap_ms)
    submissions = parse_submissions_log(Path(cfg.submissions), cfg.bins(),
                                        cfg.input_format)
    questions = parse_questions_log(Path(cfg.questions), cfg.input_format)
    return trajectories, submissions, questions


def resolve_experiment_start(cfg: PipelineConfig,
                             submissions: Sequence[SubmissionRecord]) -> int:
    """Explicit config value, or two thirds through the observed time span."""
    if cfg.experiment_start_ms != AUTO:
        return int(cfg.experiment_start_ms)
    times = [r.submitted_at for r in submissions]
    lo, hi = min(times), max(times)
    return lo + (hi - lo) * 2 // 3


def stage_ingest(cfg: PipelineConfig) -> dict:
    trajectories, submissions, questions, = load_inputs(cfg)
    matched, unmatched = match_trajectories(trajectories, submissions)
    summary = {
        "config_hash": cfg.config_hash(),
        "n_trajectories": len(trajectories),
        "n_submissions": len(submissions),
        "n_questions": len(questions),
        "n_matched": len(matched),
        "n_unmatched": len(unmatched),
        "experiment_start_ms": resolve_experiment_start(cfg, submissions),
    }
    (_out(cfg) / "ingest_summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True), encoding="utf-8")
    return summary


def compute_mouse_feature_rows(cfg: PipelineConfig) -> list[tuple[str, str, int, FeatureVector]]:
    """37 mouse features for every first submission with a matched trajectory."""
    trajectories, submissions, _ = load_inputs(cfg)
    matched, _ = match_trajectories(trajectories, submissions)
    first_keys = {(r.student_id, r.question_id, r.submitted_at)
                  for r in submissions if r.attempt_index == 1}
    params = DensityParams(window_size=cfg.window_size, threshold=cfg.density_threshold)

    rows = []
    for key in sorted(matched):
        if key not in first_keys:
            continue
        traj = matched[key]
        try:
            cps = detect_change_points(traj, params)
        except TrajectoryTooShort:
            cps = ChangePoints(None, None)
        rows.append((key[0], key[1], key[2], extract_mouse_features(traj, cps)))
    return rows


def stage_features(cfg: PipelineConfig) -> Path:
    rows = compute_mouse_feature_rows(cfg)
    out = io.StringIO()
    out.write(f"# config_hash: {cfg.config_hash()}\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(("student_id", "question_id", "submitted_at") + MOUSE_FEATURE_NAMES)
    for sid, qid, ts, vec in rows:
        writer.writerow([sid, qid, ts] + [repr(float(v)) for v in vec.values])
    path = _out(cfg) / FEATURE_CSV
    path.write_text(out.getvalue(), encoding="utf-8")
    logger.info("wrote %d mouse feature rows to %s", len(rows), path)
    return path


def read_feature_csv(path) -> dict[tuple[str, str, int], FeatureVector]:
    text = Path(path).read_text(encoding="utf-8")
    rows: dict[tuple[str, str, int], FeatureVector] = {}
    header: list[str] | None = None
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        parts = next(csv.reader(io.StringIO(line)))
        if header is None:
            header = parts
            continue
        key = (parts[0], parts[1], int(parts[2]))
        values = np.array([float(v) for v in parts[3:]])
        rows[key] = FeatureVector(MOUSE_FEATURE_NAMES, values)
    if header is None:
        raise ConfigError(f"feature CSV {path} is empty")
    return rows


def _network_entries(feature_rows: Mapping[tuple[str, str, int], FeatureVector],
                     submissions: Sequence[SubmissionRecord],
                     before_ms: int) -> dict[tuple[str, str], np.ndarray]:
    """38-value submission vectors for first submissions before the cutoff."""
    score_of = {(r.student_id, r.question_id, r.submitted_at): r.raw_score
                for r in submissions if r.attempt_index == 1}
    entries: dict[tuple[str, str], np.ndarray] = {}
    for (sid, qid, ts), vec in feature_rows.items():
        if ts >= before_ms:
            continue
        raw_score = score_of.get((sid, qid, ts))
        if raw_score is None:
            continue
        entries[(sid, qid)] = np.concatenate([vec.values, [float(raw_score)]])
    return entries


def stage_simmatrix(cfg: PipelineConfig) -> Path:
    _, submissions, _ = load_inputs(cfg)
    feature_rows = read_feature_csv(_out(cfg) / FEATURE_CSV)
    start = resolve_experiment_start(cfg, submissions)
    entries = _network_entries(feature_rows, submissions, start)
    if not entries:
        raise ConfigError("no pre-experiment submissions to build the similarity network")
    net = ProblemSolvingNetwork.build(entries)
    matrix = build_similarity_matrix(net)
    path = _out(cfg) / MATRIX_CSV
    path.write_text(matrix.to_csv([f"config_hash: {cfg.config_hash()}"]),
                    encoding="utf-8")
    logger.info("similarity matrix over %d questions -> %s",
                len(matrix.question_ids), path)
    return path


def build_feature_store(cfg: PipelineConfig) -> tuple[ds.FeatureStore, list[SubmissionRecord]]:
    """Assemble the per-record feature sources and the prediction targets."""
    _, submissions, questions = load_inputs(cfg)
    feature_rows = read_feature_csv(_out(cfg) / FEATURE_CSV)
    matrix = SimilarityMatrix.from_csv((_out(cfg) / MATRIX_CSV).read_text(encoding="utf-8"))
    start = resolve_experiment_start(cfg, submissions)

    schema = FeatureSchema.from_questions(questions)
    metas = {q.question_id: q for q in questions}

    question_stats = {qid: compute_question_stats(submissions, meta, start)
                      for qid, meta in metas.items()}

    by_student: dict[str, list[SubmissionRecord]] = {}
    for r in submissions:
        by_student.setdefault(r.student_id, []).append(r)
    student_stats = {sid: compute_student_stats(recs, metas, start, schema)
                     for sid, recs in by_student.items()}

    class_of = {}
    mouse_features: dict[tuple[str, str], tuple[int, FeatureVector, int]] = {}
    for r in submissions:
        if r.attempt_index == 1:
            class_of[(r.student_id, r.question_id, r.submitted_at)] = r.score_class
    for (sid, qid, ts), vec in feature_rows.items():
        cls = class_of.get((sid, qid, ts))
        if cls is not None:
            mouse_features[(sid, qid)] = (ts, vec, cls)

    targets = [r for r in submissions
               if r.attempt_index == 1 and r.submitted_at >= start
               and r.question_id in metas]
    recent = {}
    for r in targets:
        key = (r.student_id, r.question_id, r.submitted_at)
        recent[key] = compute_recent_stats(by_student.get(r.student_id, []), metas,
                                           r.submitted_at, cfg.recent_window_days,
                                           schema)

    store = ds.FeatureStore(schema=schema, question_stats=question_stats,
                            student_stats=student_stats, recent_stats=recent,
                            mouse_features=mouse_features, matrix=matrix)
    return store, targets


def examples_to_csv(examples: Sequence[ds.LabeledExample], variant: str,
                    config_hash: str) -> str:
    out = io.StringIO()
    out.write(f"# config_hash: {config_hash}\n")
    out.write(f"# variant: {variant}\n")
    writer = csv.writer(out, lineterminator="\n")
    names = examples[0].features.names if examples else ()
    writer.writerow(("student_id", "question_id", "submitted_at") + names + ("label",))
    for ex in examples:
        writer.writerow([ex.key[0], ex.key[1], ex.key[2]]
                        + [repr(float(v)) for v in ex.features.values]
                        + [ex.label])
    return out.getvalue()


def examples_from_csv(text: str, variant: str) -> list[ds.LabeledExample]:
    header: tuple[str, ...] | None = None
    examples = []
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        parts = next(csv.reader(io.StringIO(line)))
        if header is None:
            header = tuple(parts)
            continue
        names = header[3:-1]
        values = np.array([float(v) for v in parts[3:-1]])
        examples.append(ds.LabeledExample(
            key=(parts[0], parts[1], int(parts[2])),
            features=FeatureVector(tuple(names), values),
            label=int(parts[-1]), variant=variant))
    return examples


def stage_build_dataset(cfg: PipelineConfig) -> dict:
    store, targets = build_feature_store(cfg)
    out_dir = _out(cfg)
    manifest: dict = {
        "config_hash": cfg.config_hash(),
        "sim_threshold": cfg.sim_threshold,
        "seed": cfg.seed,
        "n_targets": len(targets),
        "variants": {},
    }
    for variant in cfg.variants():
        examples = ds.assemble_examples(targets, store, variant, cfg.sim_threshold)
        path = out_dir / f"dataset_{variant}.csv"
        path.write_text(examples_to_csv(examples, variant, cfg.config_hash()),
                        encoding="utf-8")
        counts = np.bincount([ex.label for ex in examples], minlength=4).tolist()
        manifest["variants"][variant] = {
            "n_examples": len(examples),
            "n_features": len(examples[0].features) if examples else 0,
            "label_counts": counts,
        }
        logger.info("dataset %s: %d examples (%d features)", variant,
                    len(examples), manifest["variants"][variant]["n_features"])
    (out_dir / "dataset_manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
    return manifest


def load_datasets(cfg: PipelineConfig) -> dict[str, list[ds.LabeledExample]]:
    out_dir = _out(cfg)
    datasets = {}
    for variant in cfg.variants():
        path = out_dir / f"dataset_{variant}.csv"
        if not path.exists():
            raise ConfigError(f"dataset file missing: {path} (run build-dataset first)")
        datasets[variant] = examples_from_csv(path.read_text(encoding="utf-8"), variant)
    return datasets


def _resolve_spec(cfg: PipelineConfig) -> md.ModelSpec:
    best_path = _out(cfg) / "best_spec.json"
    if cfg.grid_search and best_path.exists():
        return md.ModelSpec.from_dict(json.loads(best_path.read_text(encoding="utf-8")))
    return md.default_spec(cfg.model)


def stage_train(cfg: PipelineConfig) -> dict:
    """Fit one model per variant on the first-run split; optionally grid search."""
    datasets = load_datasets(cfg)
    out_dir = _out(cfg)
    summary: dict = {"config_hash": cfg.config_hash(), "model": cfg.model, "variants": {}}

    if cfg.grid_search:
        grids = cfg.grids or md.default_grids(cfg.model)
        reference = datasets[cfg.variants()[0]]
        split = ds.split_train_test(reference, cfg.test_fraction, cfg.seed)
        balanced = ds.smote_oversample(split.train, cfg.smote_k,
                                       derive_seed(cfg.seed, "grid-smote"))
        best, table = md.grid_search(cfg.model, grids, balanced,
                                     validation_fraction=0.2, seed=cfg.seed)
        (out_dir / "best_spec.json").write_text(
            json.dumps(best.to_dict(), indent=2, sort_keys=True), encoding="utf-8")
        summary["grid"] = {
            "n_candidates": len(table),
            "best": best.to_dict(),
            "scores": [{"spec": s.to_dict(), "accuracy": a} for s, a in table],
        }

    spec = _resolve_spec(cfg)
    for variant, examples in datasets.items():
        result = run_once(examples, spec, cfg, run_seed=cfg.seed, variant=variant)
        model_path = out_dir / f"model_{variant}_{cfg.model}.json"
        md.save_model(result.pop("model"), model_path)
        summary["variants"][variant] = {
            "model_file": model_path.name,
            "accuracy": result["metrics"].accuracy,
            "weighted_f1": result["metrics"].weighted_f1,
            "macro_auc": result["metrics"].macro_auc,
        }
    (out_dir / "train_summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True), encoding="utf-8")
    return summary


def run_once(examples: Sequence[ds.LabeledExample], spec: md.ModelSpec,
             cfg: PipelineConfig, run_seed: int, variant: str) -> dict:
    """One split -> SMOTE -> train -> evaluate cycle."""
    split = ds.split_train_test(list(examples), cfg.test_fraction, run_seed)
    balanced = ds.smote_oversample(split.train, cfg.smote_k,
                                   derive_seed(run_seed, f"smote-{variant}"))
    model = md.train(md.ModelSpec(**{**spec.to_dict(),
                                     "seed": derive_seed(run_seed, f"train-{variant}")}),
                     balanced, jobs=cfg.jobs)
    x_test = np.stack([ex.features.values for ex in split.test])
    y_test = np.array([ex.label for ex in split.test], dtype=np.int64)
    proba = md.predict_proba(model, x_test)
    pred = np.argmax(proba, axis=1)
    confusion = ev.ConfusionMatrix.from_predictions(y_test.tolist(), pred.tolist())
    accuracy, weighted_f1 = ev.accuracy_weighted_f1(confusion)
    _, macro_curve, macro_auc = ev.roc_auc_ovr(proba, y_test)
    importance = model.importance
    metrics = ev.RunMetrics(accuracy=accuracy, weighted_f1=weighted_f1,
                            macro_auc=macro_auc, macro_curve=macro_curve,
                            confusion=confusion, importance=importance)
    return {"metrics": metrics, "model": model}


def repeated_runs(datasets: Mapping[str, Sequence[ds.LabeledExample]],
                  spec: md.ModelSpec, cfg: PipelineConfig, n_runs: int,
                  base_seed: int) -> ev.RunReport:
    """Repeat split/SMOTE/train/evaluate with seeds base_seed + i."""
    if n_runs < 1:
        raise ConfigError(f"n_runs must be >= 1, got {n_runs}")
    variant_reports: dict[str, ev.VariantReport] = {}
    for variant, examples in datasets.items():
        runs = []
        for i in range(n_runs):
            result = run_once(examples, spec, cfg, run_seed=base_seed + i,
                              variant=variant)
            runs.append(result["metrics"])
        variant_reports[variant] = ev.aggregate_runs(runs)

    signed = absolute = None
    pair = None
    if ds.PROPOSED in variant_reports and ds.BASELINE in variant_reports:
        signed, absolute = ev.compare_variants(variant_reports[ds.PROPOSED],
                                               variant_reports[ds.BASELINE])
        pair = (ds.PROPOSED, ds.BASELINE)
    return ev.RunReport(n_runs=n_runs, base_seed=base_seed,
                        variants=variant_reports, abroca_signed=signed,
                        abroca_absolute=absolute, reference_pair=pair)


def report_to_dict(report: ev.RunReport, cfg: PipelineConfig,
                   feature_names: Mapping[str, tuple[str, ...]]) -> dict:
    payload: dict = {
        "config_hash": cfg.config_hash(),
        "model": cfg.model,
        "n_runs": report.n_runs,
        "base_seed": report.base_seed,
        "variants": {},
    }
    for variant, vr in report.variants.items():
        payload["variants"][variant] = {
            "accuracy_mean": vr.accuracy_mean,
            "accuracy_std": vr.accuracy_std,
            "weighted_f1_mean": vr.weighted_f1_mean,
            "weighted_f1_std": vr.weighted_f1_std,
            "macro_auc_mean": vr.macro_auc_mean,
            "macro_auc_std": vr.macro_auc_std,
            "per_run": [
                {"accuracy": r.accuracy, "weighted_f1": r.weighted_f1,
                 "macro_auc": r.macro_auc}
                for r in vr.runs
            ],
            "confusion_total": vr.confusion_total.counts.tolist(),
            "heatmap_row_normalized": vr.confusion_total.row_normalized().tolist(),
            "feature_names": list(feature_names.get(variant, ())),
            "importance_mean": (None if vr.importance_mean is None
                                else vr.importance_mean.tolist()),
        }
    if report.abroca_signed is not None:
        payload["abroca"] = {
            "signed": report.abroca_signed,
            "absolute": report.abroca_absolute,
            "reference_pair": list(report.reference_pair),
        }
    return payload


def stage_evaluate(cfg: PipelineConfig) -> dict:
    datasets = load_datasets(cfg)
    spec = _resolve_spec(cfg)
    report = repeated_runs(datasets, spec, cfg, cfg.n_runs, cfg.seed)
    out_dir = _out(cfg)

    names = {variant: (examples[0].features.names if examples else ())
             for variant, examples in datasets.items()}
    payload = report_to_dict(report, cfg, names)
    (out_dir / REPORT_JSON).write_text(json.dumps(payload, indent=2, sort_keys=True),
                                       encoding="utf-8")

    for variant, vr in report.variants.items():
        rows = ev.roc_band_rows(vr)
        out = io.StringIO()
        out.write(f"# config_hash: {cfg.config_hash()}\n")
        out.write("fpr,tpr_mean,tpr_plus_std,tpr_minus_std\n")
        for row in rows:
            out.write(",".join(repr(v) for v in row) + "\n")
        (out_dir / f"roc_{variant}.csv").write_text(out.getvalue(), encoding="utf-8")

        heat = vr.confusion_total.row_normalized()
        out = io.StringIO()
        out.write(f"# config_hash: {cfg.config_hash()}\n")
        out.write("true_class," + ",".join(f"pred_{c}" for c in range(4)) + "\n")
        for c in range(4):
            out.write(f"{c}," + ",".join(repr(float(v)) for v in heat[c]) + "\n")
        (out_dir / f"heatmap_{variant}.csv").write_text(out.getvalue(), encoding="utf-8")

    if cfg.plots:
        write_plots(report, out_dir)
    return payload


def write_plots(report: ev.RunReport, out_dir: Path) -> None:
    """Self-contained SVG plots of the ROC bands and heatmaps."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 5))
    for variant, vr in report.variants.items():
        ax.plot(ev.FPR_GRID, vr.tpr_mean, label=f"{variant} (mean)")
        ax.fill_between(ev.FPR_GRID, vr.tpr_mean - vr.tpr_std,
                        vr.tpr_mean + vr.tpr_std, alpha=0.25)
    ax.plot([0, 1], [0, 1], "k--", linewidth=0.8)
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.legend(loc="lower right")
    fig.savefig(out_dir / "roc_bands.svg", format="svg", bbox_inches="tight")
    plt.close(fig)

    for variant, vr in report.variants.items():
        fig, ax = plt.subplots(figsize=(4.5, 4))
        heat = vr.confusion_total.row_normalized()
        im = ax.imshow(heat, cmap="Blues", vmin=0, vmax=1)
        for i in range(4):
            for j in range(4):
                ax.text(j, i, f"{heat[i, j]:.2f}", ha="center", va="center",
                        fontsize=8)
        ax.set_xlabel("predicted class")
        ax.set_ylabel("true class")
        fig.colorbar(im, ax=ax)
        fig.savefig(out_dir / f"heatmap_{variant}.svg", format="svg",
                    bbox_inches="tight")
        plt.close(fig)


def run_pipeline(cfg: PipelineConfig) -> dict:
    """Execute every stage in order; returns the report payload."""
    cfg.validate()
    cfg.require_inputs()
    out_dir = _out(cfg)
    stage_ingest(cfg)
    stage_features(cfg)
    stage_simmatrix(cfg)
    stage_build_dataset(cfg)
    stage_train(cfg)
    payload = stage_evaluate(cfg)
    manifest = {
        "config_hash": cfg.config_hash(),
        "config": dict(cfg.canonical_items()),
        "stages": ["ingest", "features", "simmatrix", "build-dataset", "train", "evaluate"],
        "run_seeds": [cfg.seed + i for i in range(cfg.n_runs)],
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True),
                                           encoding="utf-8")
    return payload
