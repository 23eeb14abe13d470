"""Question-to-question similarity through shared solvers.

Questions are linked through students who solved both: each such student
contributes one path instance scored by the cosine similarity of the
student's two submission feature vectors (37 mouse features plus the raw
score, 38 values).  A question pair's similarity is the mean over its path
instances, so it lies in [0, 1] after feature scaling; pairs with no
shared solver have no path.

Before any cosine, every dimension is min-max scaled to [0, 1] over all
submissions in the network (the -1 sentinel scales as the minimum) and
constant dimensions are dropped.  This keeps millisecond-scale features
from dominating and makes all components nonnegative.
"""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np

from mousetrail import kernels
from mousetrail.interaction import MOUSE_FEATURE_NAMES

logger = logging.getLogger(__name__)

SUBMISSION_VECTOR_NAMES = MOUSE_FEATURE_NAMES + ("raw_score",)
SUBMISSION_VECTOR_DIM = len(SUBMISSION_VECTOR_NAMES)

NO_PATH = -1.0


class UnknownQuestion(KeyError):
    pass


@dataclass(frozen=True, eq=False)
class ProblemSolvingNetwork:
    """Bipartite student-question network with one vector per edge.

    An edge exists iff the student has a first-submission trajectory on the
    question with extracted mouse features; its vector is the 38-value
    submission feature vector.
    """

    student_ids: tuple[str, ...]
    question_ids: tuple[str, ...]
    vectors: Mapping[tuple[str, str], np.ndarray]

    @classmethod
    def build(cls, entries: Mapping[tuple[str, str], np.ndarray]) -> "ProblemSolvingNetwork":
        for key, vec in entries.items():
            if vec.shape != (SUBMISSION_VECTOR_DIM,):
                raise ValueError(f"edge {key}: expected {SUBMISSION_VECTOR_DIM} values, "
                                 f"got {vec.shape}")
            if not np.all(np.isfinite(vec)):
                raise ValueError(f"edge {key}: non-finite feature values")
        students = tuple(sorted({s for s, _ in entries}))
        questions = tuple(sorted({q for _, q in entries}))
        return cls(student_ids=students, question_ids=questions, vectors=dict(entries))

    def questions_of(self, student_id: str) -> tuple[str, ...]:
        return tuple(q for q in self.question_ids if (student_id, q) in self.vectors)

    def students_of(self, question_id: str) -> tuple[str, ...]:
        if question_id not in self.question_ids:
            raise UnknownQuestion(question_id)
        return tuple(s for s in self.student_ids if (s, question_id) in self.vectors)

    @cached_property
    def _scaled(self) -> tuple[np.ndarray, np.ndarray, tuple[str, ...]]:
        """(unit vectors [S, Q, D_kept], edge mask [S, Q], dropped dim names)."""
        n_s, n_q = len(self.student_ids), len(self.question_ids)
        s_index = {s: i for i, s in enumerate(self.student_ids)}
        q_index = {q: i for i, q in enumerate(self.question_ids)}

        raw = np.zeros((n_s, n_q, SUBMISSION_VECTOR_DIM))
        has = np.zeros((n_s, n_q), dtype=np.bool_)
        for (s, q), vec in self.vectors.items():
            raw[s_index[s], q_index[q]] = vec
            has[s_index[s], q_index[q]] = True

        flat = raw[has]
        lo = flat.min(axis=0)
        hi = flat.max(axis=0)
        span = hi - lo
        keep = span > 0
        dropped = tuple(name for name, k in zip(SUBMISSION_VECTOR_NAMES, keep) if not k)
        if dropped:
            logger.info("dropping %d constant feature dimensions: %s",
                        len(dropped), ", ".join(dropped))

        scaled = np.zeros((n_s, n_q, int(keep.sum())))
        scaled[has] = (flat[:, keep] - lo[keep]) / span[keep]
        norms = np.linalg.norm(scaled, axis=2)
        unit = np.zeros_like(scaled)
        positive = norms > 0
        unit[positive] = scaled[positive] / norms[positive][:, None]
        n_zero = int(np.count_nonzero(has & ~positive))
        if n_zero:
            logger.warning("%d zero submission vectors after scaling; "
                           "their path instances score 0", n_zero)
        return unit, has, dropped

    def scaled_vector(self, student_id: str, question_id: str) -> np.ndarray:
        unit, _, _ = self._scaled
        return unit[self.student_ids.index(student_id), self.question_ids.index(question_id)]


def path_instance_similarity(fx: np.ndarray, fy: np.ndarray) -> float:
    """Cosine similarity of two scaled submission vectors; 0 for zero vectors."""
    nx = float(np.linalg.norm(fx))
    ny = float(np.linalg.norm(fy))
    if nx == 0.0 or ny == 0.0:
        logger.warning("zero-vector path instance scored 0")
        return 0.0
    return float(np.dot(fx, fy)) / (nx * ny)


def question_similarity(net: ProblemSolvingNetwork, qx: str, qy: str) -> float | None:
    """Mean path-instance cosine over all students who solved both.

    Returns None when the questions share no solver.
    """
    for q in (qx, qy):
        if q not in net.question_ids:
            raise UnknownQuestion(q)
    unit, has, _ = net._scaled
    xi = net.question_ids.index(qx)
    yi = net.question_ids.index(qy)
    shared = has[:, xi] & has[:, yi]
    count = int(shared.sum())
    if count == 0:
        return None
    dots = np.einsum("sd,sd->s", unit[shared, xi, :], unit[shared, yi, :])
    return float(dots.sum()) / count


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    """Dense symmetric question similarity with -1 marking no-path pairs."""

    question_ids: tuple[str, ...]
    values: np.ndarray
    dropped_dims: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        n = len(self.question_ids)
        if self.values.shape != (n, n):
            raise ValueError(f"matrix shape {self.values.shape} != ({n}, {n})")
        self.values.setflags(write=False)

    def value(self, qx: str, qy: str) -> float:
        try:
            xi = self.question_ids.index(qx)
            yi = self.question_ids.index(qy)
        except ValueError as exc:
            raise UnknownQuestion(str(exc)) from None
        return float(self.values[xi, yi])

    def to_csv(self, header_comments: Iterable[str] = ()) -> str:
        out = io.StringIO()
        for comment in header_comments:
            out.write(f"# {comment}\n")
        out.write("# dropped_dims: " + ",".join(self.dropped_dims) + "\n")
        out.write("question_id," + ",".join(self.question_ids) + "\n")
        for i, qid in enumerate(self.question_ids):
            row = ",".join(f"{v:.9f}" for v in self.values[i])
            out.write(f"{qid},{row}\n")
        return out.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "SimilarityMatrix":
        dropped: tuple[str, ...] = ()
        header: list[str] | None = None
        rows: list[tuple[str, list[float]]] = []
        for line in text.splitlines():
            if not line.strip():
                continue
            if line.startswith("#"):
                if line.startswith("# dropped_dims:"):
                    payload = line.split(":", 1)[1].strip()
                    dropped = tuple(p for p in payload.split(",") if p)
                continue
            parts = line.split(",")
            if header is None:
                header = parts[1:]
                continue
            rows.append((parts[0], [float(v) for v in parts[1:]]))
        if header is None:
            raise ValueError("similarity matrix CSV has no header")
        ids = tuple(header)
        values = np.array([vals for _, vals in rows])
        return cls(question_ids=ids, values=values, dropped_dims=dropped)


def build_similarity_matrix(net: ProblemSolvingNetwork) -> SimilarityMatrix:
    """All-pairs mean path-instance similarity; diagonal 1, no path -> -1."""
    unit, has, dropped = net._scaled
    values = kernels.pairwise_mean_cosine(np.ascontiguousarray(unit), has)
    return SimilarityMatrix(question_ids=net.question_ids, values=values,
                            dropped_dims=dropped)


def most_similar_solved(matrix: SimilarityMatrix, qx: str,
                        solved_by_student: Iterable[str],
                        threshold: float) -> tuple[str, float] | None:
    """Best previously-solved question at or above the threshold.

    Ties go to the lexicographically smallest question id; returns None when
    nothing qualifies (callers then discard the record).
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold {threshold} outside [0, 1]")
    if qx not in matrix.question_ids:
        raise UnknownQuestion(qx)
    best: tuple[str, float] | None = None
    for qy in sorted(set(solved_by_student)):
        if qy == qx or qy not in matrix.question_ids:
            continue
        sim = matrix.value(qx, qy)
        if sim >= threshold and (best is None or sim > best[1]):
            best = (qy, sim)
    return best
