"""Question, student, and recent-window statistics.

These form the baseline feature block: per-question label and score
distribution features, per-student cross features over (dimension x grade
x difficulty) cells, and trailing-window performance statistics.  The cell
universe is fixed up front from the question metadata so every vector has
the same width.  Cells or windows with no data use the sentinel -1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from mousetrail.interaction import FeatureVector, SENTINEL
from mousetrail.trajectory import QuestionMeta, SubmissionRecord

DAY_MS = 86_400_000
DEFAULT_RECENT_WINDOW_DAYS = 14


@dataclass(frozen=True)
class FeatureSchema:
    """Observed universe of question labels, fixed at pipeline start."""

    dimensions: tuple[str, ...]
    grades: tuple[int, ...]
    difficulties: tuple[int, ...]

    @classmethod
    def from_questions(cls, metas: Sequence[QuestionMeta]) -> "FeatureSchema":
        return cls(
            dimensions=tuple(sorted({m.math_dimension for m in metas})),
            grades=tuple(sorted({m.grade for m in metas})),
            difficulties=tuple(sorted({m.difficulty for m in metas})),
        )

    @property
    def cells(self) -> tuple[tuple[str, int, int], ...]:
        return tuple(
            (dim, grade, diff)
            for dim in self.dimensions
            for grade in self.grades
            for diff in self.difficulties
        )

    def cell_index(self, dim: str, grade: int, diff: int) -> int:
        n_g = len(self.grades)
        n_d = len(self.difficulties)
        return (
            self.dimensions.index(dim) * n_g * n_d
            + self.grades.index(grade) * n_d
            + self.difficulties.index(diff)
        )

    def gd_index(self, grade: int, diff: int) -> int:
        return self.grades.index(grade) * len(self.difficulties) + self.difficulties.index(diff)


@dataclass(frozen=True, eq=False)
class QuestionStats:
    meta: QuestionMeta
    total_submissions: int
    second_submissions: int
    pct_per_class: np.ndarray

    def feature_vector(self, schema: FeatureSchema) -> FeatureVector:
        names = (
            [f"q_dim_{d}" for d in schema.dimensions]
            + ["q_grade", "q_difficulty", "q_total_submissions", "q_second_submissions"]
            + [f"q_pct_class_{c}" for c in range(4)]
        )
        onehot = [1.0 if d == self.meta.math_dimension else 0.0 for d in schema.dimensions]
        values = np.array(
            onehot
            + [float(self.meta.grade), float(self.meta.difficulty),
               float(self.total_submissions), float(self.second_submissions)]
            + self.pct_per_class.tolist(),
            dtype=np.float64,
        )
        return FeatureVector(tuple(names), values)


@dataclass(frozen=True, eq=False)
class StudentStats:
    total_submissions: int
    second_submissions: int
    pct_per_cell: np.ndarray
    first_avg_score_per_cell: np.ndarray

    def feature_vector(self, schema: FeatureSchema) -> FeatureVector:
        cell_tags = [f"{d}_g{g}_d{k}" for d, g, k in schema.cells]
        names = (
            ["s_total_submissions", "s_second_submissions"]
            + [f"s_pct_sub_{tag}" for tag in cell_tags]
            + [f"s_first_avg_{tag}" for tag in cell_tags]
        )
        values = np.concatenate([
            np.array([float(self.total_submissions), float(self.second_submissions)]),
            self.pct_per_cell,
            self.first_avg_score_per_cell,
        ])
        return FeatureVector(tuple(names), values)


@dataclass(frozen=True, eq=False)
class RecentStats:
    window_days: int
    count_per_dim: np.ndarray
    count_per_gd: np.ndarray
    avg_per_dim: np.ndarray
    avg_per_gd: np.ndarray
    std_per_dim: np.ndarray
    std_per_gd: np.ndarray

    def feature_vector(self, schema: FeatureSchema) -> FeatureVector:
        gd_tags = [f"g{g}_d{k}" for g in schema.grades for k in schema.difficulties]
        names = (
            [f"r_count_dim_{d}" for d in schema.dimensions]
            + [f"r_count_{t}" for t in gd_tags]
            + [f"r_avg_dim_{d}" for d in schema.dimensions]
            + [f"r_avg_{t}" for t in gd_tags]
            + [f"r_std_dim_{d}" for d in schema.dimensions]
            + [f"r_std_{t}" for t in gd_tags]
        )
        values = np.concatenate([
            self.count_per_dim, self.count_per_gd,
            self.avg_per_dim, self.avg_per_gd,
            self.std_per_dim, self.std_per_gd,
        ])
        return FeatureVector(tuple(names), values)


def compute_question_stats(records: Sequence[SubmissionRecord], meta: QuestionMeta,
                           cutoff: int) -> QuestionStats:
    """Submission counts and score-class proportions before ``cutoff``."""
    recs = [r for r in records
            if r.question_id == meta.question_id and r.submitted_at < cutoff]
    total = len(recs)
    second = sum(1 for r in recs if r.attempt_index == 2)
    if total == 0:
        pct = np.full(4, SENTINEL)
    else:
        counts = np.bincount([r.score_class for r in recs], minlength=4)
        pct = counts / total
    return QuestionStats(meta=meta, total_submissions=total,
                         second_submissions=second, pct_per_class=pct)


def compute_student_stats(records: Sequence[SubmissionRecord],
                          metas: Mapping[str, QuestionMeta],
                          cutoff: int,
                          schema: FeatureSchema) -> StudentStats:
    """Per-cell submission shares and first-attempt score means before ``cutoff``."""
    recs = [r for r in records if r.submitted_at < cutoff and r.question_id in metas]
    n_cells = len(schema.cells)
    total = len(recs)
    second = sum(1 for r in recs if r.attempt_index == 2)

    cell_counts = np.zeros(n_cells)
    first_sums = np.zeros(n_cells)
    first_counts = np.zeros(n_cells)
    for r in recs:
        meta = metas[r.question_id]
        ci = schema.cell_index(meta.math_dimension, meta.grade, meta.difficulty)
        cell_counts[ci] += 1
        if r.attempt_index == 1:
            first_sums[ci] += r.raw_score
            first_counts[ci] += 1

    pct = np.full(n_cells, SENTINEL)
    if total > 0:
        nonzero = cell_counts > 0
        pct[nonzero] = cell_counts[nonzero] / total
    first_avg = np.full(n_cells, SENTINEL)
    has_first = first_counts > 0
    first_avg[has_first] = first_sums[has_first] / first_counts[has_first]

    return StudentStats(total_submissions=total, second_submissions=second,
                        pct_per_cell=pct, first_avg_score_per_cell=first_avg)


def _grouped_count_avg_std(recs: Sequence[SubmissionRecord], group_of: dict[str, int],
                           n_groups: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    counts = np.zeros(n_groups)
    sums = np.zeros(n_groups)
    sqsums = np.zeros(n_groups)
    for r in recs:
        gi = group_of[r.question_id]
        counts[gi] += 1
        sums[gi] += r.raw_score
        sqsums[gi] += r.raw_score * r.raw_score
    avg = np.full(n_groups, SENTINEL)
    std = np.full(n_groups, SENTINEL)
    nonzero = counts > 0
    avg[nonzero] = sums[nonzero] / counts[nonzero]
    # population std: a single record gives 0, reserving -1 for "no data"
    var = np.zeros(n_groups)
    var[nonzero] = sqsums[nonzero] / counts[nonzero] - avg[nonzero] ** 2
    std[nonzero] = np.sqrt(np.maximum(var[nonzero], 0.0))
    return counts, avg, std


def compute_recent_stats(records: Sequence[SubmissionRecord],
                         metas: Mapping[str, QuestionMeta],
                         as_of: int,
                         window_days: int,
                         schema: FeatureSchema) -> RecentStats:
    """Counts, score means, and population stds in the trailing window.

    The window is ``[as_of - window_days * 86_400_000, as_of)``; an empty
    window (including ``window_days == 0``) yields all -1.
    """
    lo = as_of - window_days * DAY_MS
    recs = [r for r in records
            if lo <= r.submitted_at < as_of and r.question_id in metas]
    n_dim = len(schema.dimensions)
    n_gd = len(schema.grades) * len(schema.difficulties)

    if not recs:
        fill = lambda n: np.full(n, SENTINEL)  # noqa: E731
        return RecentStats(window_days=window_days,
                           count_per_dim=fill(n_dim), count_per_gd=fill(n_gd),
                           avg_per_dim=fill(n_dim), avg_per_gd=fill(n_gd),
                           std_per_dim=fill(n_dim), std_per_gd=fill(n_gd))

    dim_of = {qid: schema.dimensions.index(m.math_dimension) for qid, m in metas.items()}
    gd_of = {qid: schema.gd_index(m.grade, m.difficulty) for qid, m in metas.items()}
    count_d, avg_d, std_d = _grouped_count_avg_std(recs, dim_of, n_dim)
    count_g, avg_g, std_g = _grouped_count_avg_std(recs, gd_of, n_gd)
    return RecentStats(window_days=window_days,
                       count_per_dim=count_d, count_per_gd=count_g,
                       avg_per_dim=avg_d, avg_per_gd=avg_g,
                       std_per_dim=std_d, std_per_gd=std_g)
