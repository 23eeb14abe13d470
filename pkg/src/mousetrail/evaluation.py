"""Metrics and reports: accuracy, weighted F1, one-vs-rest ROC, ABROCA.

Multiclass ROC reduces one-vs-rest per class; the macro curve averages
per-class true-positive rates over a fixed 101-point false-positive-rate
grid, and the macro AUC is the unweighted mean of the per-class exact
(trapezoid) AUCs.  The signed area between two gridded curves equals the
difference of their gridded AUCs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

N_CLASSES = 4
FPR_GRID = np.linspace(0.0, 1.0, 101)


class EmptyMatrix(ValueError):
    pass


class GridMismatch(ValueError):
    pass


class DegenerateClass(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Rows are true classes, columns predicted."""

    counts: np.ndarray

    def __post_init__(self) -> None:
        if self.counts.shape != (N_CLASSES, N_CLASSES):
            raise ValueError(f"expected {N_CLASSES}x{N_CLASSES}, got {self.counts.shape}")
        if np.any(self.counts < 0):
            raise ValueError("negative counts")

    @classmethod
    def from_predictions(cls, y_true: Sequence[int], y_pred: Sequence[int]) -> "ConfusionMatrix":
        counts = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
        for t, p in zip(y_true, y_pred, strict=True):
            counts[t, p] += 1
        return cls(counts=counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def row_normalized(self) -> np.ndarray:
        """Per-true-class prediction proportions (heatmap payload)."""
        out = np.zeros((N_CLASSES, N_CLASSES))
        sums = self.counts.sum(axis=1)
        nonzero = sums > 0
        out[nonzero] = self.counts[nonzero] / sums[nonzero, None]
        return out


@dataclass(frozen=True, eq=False)
class RocCurve:
    """Monotone (fpr, tpr) points ending at (1,1).

    Curves built by :func:`binary_roc` start at (0,0); resampling onto the
    common fpr grid takes the upper envelope at each grid point, so a grid
    curve may start above 0 (a perfect classifier starts at (0,1)).
    """

    fpr: np.ndarray
    tpr: np.ndarray

    def __post_init__(self) -> None:
        f, t = self.fpr, self.tpr
        if f.shape != t.shape or f.ndim != 1 or f.shape[0] < 2:
            raise ValueError("fpr/tpr must be equal-length 1-d arrays")
        if f[0] != 0 or f[-1] != 1 or t[-1] != 1:
            raise ValueError("curve must span fpr 0..1 and end at tpr 1")
        if t[0] < 0:
            raise ValueError("tpr must be nonnegative")
        if np.any(np.diff(f) < 0) or np.any(np.diff(t) < 0):
            raise ValueError("fpr and tpr must be non-decreasing")

    def auc(self) -> float:
        return float(np.trapezoid(self.tpr, self.fpr))

    def on_grid(self, grid: np.ndarray = FPR_GRID) -> "RocCurve":
        """Resample tpr onto a common fpr grid (upper envelope at jumps)."""
        keep_fpr, keep_tpr = [], []
        for f, t in zip(self.fpr, self.tpr):
            if keep_fpr and f == keep_fpr[-1]:
                keep_tpr[-1] = max(keep_tpr[-1], t)
            else:
                keep_fpr.append(float(f))
                keep_tpr.append(float(t))
        tpr = np.interp(grid, np.array(keep_fpr), np.array(keep_tpr))
        return RocCurve(fpr=grid.copy(), tpr=tpr)


def accuracy_weighted_f1(cm: ConfusionMatrix) -> tuple[float, float]:
    """(trace/total, support-weighted mean of per-class F1)."""
    total = cm.total
    if total == 0:
        raise EmptyMatrix("confusion matrix has no entries")
    counts = cm.counts.astype(np.float64)
    accuracy = float(np.trace(counts)) / total

    weighted = 0.0
    for c in range(N_CLASSES):
        support = counts[c].sum()
        if support == 0:
            continue
        tp = counts[c, c]
        col = counts[:, c].sum()
        precision = tp / col if col > 0 else 0.0
        recall = tp / support
        f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
        weighted += (support / total) * f1
    return accuracy, weighted


def binary_roc(scores: np.ndarray, positives: np.ndarray) -> RocCurve:
    """ROC of a score column against boolean positives; ties share a threshold."""
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_pos = positives[order].astype(np.float64)
    n_pos = float(sorted_pos.sum())
    n_neg = float(len(sorted_pos) - n_pos)

    tps = np.cumsum(sorted_pos)
    fps = np.cumsum(1.0 - sorted_pos)
    distinct = np.flatnonzero(np.diff(sorted_scores)) if len(sorted_scores) > 1 else np.array([], dtype=int)
    cut = np.concatenate([distinct, [len(sorted_scores) - 1]])

    fpr = np.concatenate([[0.0], fps[cut] / n_neg])
    tpr = np.concatenate([[0.0], tps[cut] / n_pos])
    fpr[-1] = 1.0
    tpr[-1] = 1.0
    return RocCurve(fpr=fpr, tpr=tpr)


def roc_auc_ovr(scores: np.ndarray, labels: Sequence[int],
                ) -> tuple[dict[int, RocCurve], RocCurve, float]:
    """One-vs-rest ROC per class plus the macro grid curve and macro AUC.

    Classes with no positive or no negative example are skipped with a
    warning.  Macro AUC averages the exact per-class AUCs; the macro curve
    averages the gridded per-class curves.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.ndim != 2 or scores.shape[1] != N_CLASSES:
        raise ValueError(f"scores must be (n, {N_CLASSES})")

    curves: dict[int, RocCurve] = {}
    grid_tprs = []
    aucs = []
    for c in range(N_CLASSES):
        positives = labels == c
        if positives.sum() == 0 or positives.sum() == len(labels):
            warnings.warn(f"class {c} has no positives or no negatives; skipped",
                          DegenerateClass)
            continue
        curve = binary_roc(scores[:, c], positives)
        curves[c] = curve
        aucs.append(curve.auc())
        grid_tprs.append(curve.on_grid().tpr)
    if not curves:
        raise EmptyMatrix("no class had both positives and negatives")

    macro_curve = RocCurve(fpr=FPR_GRID.copy(),
                           tpr=np.mean(np.stack(grid_tprs), axis=0))
    macro_auc = float(np.mean(aucs))
    return curves, macro_curve, macro_auc


def abroca(curve_a: RocCurve, curve_b: RocCurve) -> tuple[float, float]:
    """(signed, absolute) area between two curves on the same fpr grid."""
    if curve_a.fpr.shape != curve_b.fpr.shape or not np.array_equal(curve_a.fpr, curve_b.fpr):
        raise GridMismatch("curves are not on a common fpr grid")
    diff = curve_a.tpr - curve_b.tpr
    signed = float(np.trapezoid(diff, curve_a.fpr))
    absolute = float(np.trapezoid(np.abs(diff), curve_a.fpr))
    return signed, absolute


@dataclass(frozen=True, eq=False)
class RunMetrics:
    """Metrics of a single train/evaluate run for one dataset layout."""

    accuracy: float
    weighted_f1: float
    macro_auc: float
    macro_curve: RocCurve
    confusion: ConfusionMatrix
    importance: np.ndarray | None = None


@dataclass(frozen=True, eq=False)
class VariantReport:
    """Aggregate over repeated runs of one layout."""

    runs: tuple[RunMetrics, ...]
    accuracy_mean: float
    accuracy_std: float
    weighted_f1_mean: float
    weighted_f1_std: float
    macro_auc_mean: float
    macro_auc_std: float
    tpr_mean: np.ndarray
    tpr_std: np.ndarray
    confusion_total: ConfusionMatrix
    importance_mean: np.ndarray | None = None

    @property
    def mean_curve(self) -> RocCurve:
        return RocCurve(fpr=FPR_GRID.copy(), tpr=self.tpr_mean)


@dataclass(frozen=True, eq=False)
class RunReport:
    """Evaluation outcome: per-variant aggregates plus their ABROCA."""

    n_runs: int
    base_seed: int
    variants: dict[str, VariantReport]
    abroca_signed: float | None = None
    abroca_absolute: float | None = None
    reference_pair: tuple[str, str] | None = None
    extras: dict = field(default_factory=dict)


def aggregate_runs(runs: Sequence[RunMetrics]) -> VariantReport:
    """Mean/population-std aggregation and the mean +/- std ROC band."""
    if not runs:
        raise ValueError("no runs to aggregate")
    acc = np.array([r.accuracy for r in runs])
    f1 = np.array([r.weighted_f1 for r in runs])
    auc = np.array([r.macro_auc for r in runs])
    tpr = np.stack([r.macro_curve.tpr for r in runs])
    confusion = ConfusionMatrix(counts=np.sum([r.confusion.counts for r in runs], axis=0))
    importances = [r.importance for r in runs if r.importance is not None]
    return VariantReport(
        runs=tuple(runs),
        accuracy_mean=float(acc.mean()), accuracy_std=float(acc.std()),
        weighted_f1_mean=float(f1.mean()), weighted_f1_std=float(f1.std()),
        macro_auc_mean=float(auc.mean()), macro_auc_std=float(auc.std()),
        tpr_mean=tpr.mean(axis=0), tpr_std=tpr.std(axis=0),
        confusion_total=confusion,
        importance_mean=None if not importances else np.mean(np.stack(importances), axis=0),
    )


def compare_variants(proposed: VariantReport, baseline: VariantReport) -> tuple[float, float]:
    """ABROCA of the mean proposed curve against the mean baseline curve."""
    return abroca(proposed.mean_curve, baseline.mean_curve)


def roc_band_rows(report: VariantReport) -> list[tuple[float, float, float, float]]:
    """(fpr, tpr_mean, tpr_plus_std, tpr_minus_std) rows for the ROC band CSV."""
    return [
        (float(f), float(m), float(m + s), float(m - s))
        for f, m, s in zip(FPR_GRID, report.tpr_mean, report.tpr_std)
    ]
