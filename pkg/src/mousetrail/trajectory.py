"""Canonical data types, log parsing, and score-class mapping.

Input logs come as CSV (header required) or JSONL:

* trajectory rows: ``student_id,question_id,timestamp_ms,event_kind,x,y``
  with ``event_kind`` one of ``move``, ``down``, ``drag``, ``up``;
* submission rows: ``student_id,question_id,submitted_at_ms,attempt_index,raw_score``;
* question rows: ``question_id,math_dimension,grade,difficulty``.

Events are grouped into one trajectory per (student, question, session),
where a gap longer than ``session_gap_ms`` starts a new session.  All types
are immutable after construction.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from enum import IntEnum
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

DEFAULT_SESSION_GAP_MS = 30 * 60 * 1000
DEFAULT_SCORE_EDGES = (25, 50, 75)

TRAJECTORY_HEADER = ("student_id", "question_id", "timestamp_ms", "event_kind", "x", "y")
SUBMISSION_HEADER = ("student_id", "question_id", "submitted_at_ms", "attempt_index", "raw_score")
QUESTION_HEADER = ("question_id", "math_dimension", "grade", "difficulty")


class DataFormatError(ValueError):
    """Base class for malformed input data."""


class MalformedRow(DataFormatError):
    pass


class UnknownEventKind(DataFormatError):
    pass


class NonMonotoneTimestamps(DataFormatError):
    """Raised for timestamps that cannot be parsed as integers."""


class OutOfRangeScore(DataFormatError):
    pass


class EventKind(IntEnum):
    MOVE = 0
    DOWN = 1
    DRAG = 2
    UP = 3


_KIND_FROM_NAME = {"move": EventKind.MOVE, "down": EventKind.DOWN,
                   "drag": EventKind.DRAG, "up": EventKind.UP}
_NAME_FROM_KIND = {v: k for k, v in _KIND_FROM_NAME.items()}


@dataclass(frozen=True)
class MouseEvent:
    timestamp: int
    kind: EventKind
    x: float
    y: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.x) and np.isfinite(self.y)):
            raise MalformedRow(f"non-finite coordinates ({self.x}, {self.y})")
        if not isinstance(self.kind, EventKind):
            raise UnknownEventKind(f"bad event kind {self.kind!r}")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """One problem-solving session: the event stream of a single attempt.

    Events are stored as parallel numpy arrays sorted by timestamp; the
    ``events`` view materializes :class:`MouseEvent` objects on demand.
    """

    student_id: str
    question_id: str
    timestamps: np.ndarray = field(repr=False)
    kinds: np.ndarray = field(repr=False)
    xs: np.ndarray = field(repr=False)
    ys: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        n = self.timestamps.shape[0]
        if n == 0:
            raise MalformedRow("trajectory with no events")
        if not all(arr.shape[0] == n for arr in (self.kinds, self.xs, self.ys)):
            raise MalformedRow("event arrays of unequal length")
        if np.any(np.diff(self.timestamps) < 0):
            raise MalformedRow("event timestamps decrease")
        if not np.all(np.isfinite(self.xs)) or not np.all(np.isfinite(self.ys)):
            raise MalformedRow("non-finite coordinates")
        if np.any(self.kinds < 0) or np.any(self.kinds > 3):
            raise UnknownEventKind("event kind outside the enumerated set")
        for arr in (self.timestamps, self.kinds, self.xs, self.ys):
            arr.setflags(write=False)

    @classmethod
    def from_events(cls, student_id: str, question_id: str,
                    events: Sequence[MouseEvent]) -> "Trajectory":
        return cls(
            student_id=student_id,
            question_id=question_id,
            timestamps=np.array([e.timestamp for e in events], dtype=np.int64),
            kinds=np.array([int(e.kind) for e in events], dtype=np.int8),
            xs=np.array([e.x for e in events], dtype=np.float64),
            ys=np.array([e.y for e in events], dtype=np.float64),
        )

    @property
    def opened_at(self) -> int:
        return int(self.timestamps[0])

    def __len__(self) -> int:
        return int(self.timestamps.shape[0])

    @cached_property
    def events(self) -> tuple[MouseEvent, ...]:
        return tuple(
            MouseEvent(int(t), EventKind(int(k)), float(x), float(y))
            for t, k, x, y in zip(self.timestamps, self.kinds, self.xs, self.ys)
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (
            self.student_id == other.student_id
            and self.question_id == other.question_id
            and np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.kinds, other.kinds)
            and np.array_equal(self.xs, other.xs)
            and np.array_equal(self.ys, other.ys)
        )

    def __hash__(self) -> int:
        return hash((self.student_id, self.question_id, self.opened_at, len(self)))


@dataclass(frozen=True)
class SubmissionRecord:
    student_id: str
    question_id: str
    submitted_at: int
    attempt_index: int
    raw_score: int
    score_class: int

    def __post_init__(self) -> None:
        if self.attempt_index not in (1, 2):
            raise MalformedRow(f"attempt_index must be 1 or 2, got {self.attempt_index}")
        if not 0 <= self.raw_score <= 100:
            raise OutOfRangeScore(f"raw_score {self.raw_score} outside [0, 100]")
        if not 0 <= self.score_class <= 3:
            raise MalformedRow(f"score_class {self.score_class} outside [0, 3]")


@dataclass(frozen=True)
class QuestionMeta:
    question_id: str
    math_dimension: str
    grade: int
    difficulty: int

    def __post_init__(self) -> None:
        if not 1 <= self.difficulty <= 5:
            raise MalformedRow(f"difficulty {self.difficulty} outside [1, 5]")


@dataclass(frozen=True)
class ScoreClassBins:
    """Three interior cut points mapping raw scores in [0, 100] to classes 0-3."""

    edges: tuple[int, int, int] = DEFAULT_SCORE_EDGES

    def __post_init__(self) -> None:
        e = self.edges
        if len(e) != 3 or not (0 <= e[0] < e[1] < e[2] < 100):
            raise ValueError(f"edges must be strictly increasing inside (0, 100): {e}")


def map_score_to_class(raw_score: int, bins: ScoreClassBins = ScoreClassBins()) -> int:
    """Class 0 is [0, e1]; class k is (e_k, e_{k+1}]; class 3 is (e3, 100]."""
    if not 0 <= raw_score <= 100:
        raise OutOfRangeScore(f"raw_score {raw_score} outside [0, 100]")
    cls = 0
    for edge in bins.edges:
        if raw_score > edge:
            cls += 1
    return cls


def _parse_timestamp(text: str, line_no: int) -> int:
    try:
        return int(text)
    except ValueError:
        raise NonMonotoneTimestamps(f"line {line_no}: unparseable timestamp {text!r}") from None


def _parse_event_fields(fields: Sequence[str], line_no: int) -> tuple[str, str, int, EventKind, float, float]:
    if len(fields) != 6:
        raise MalformedRow(f"line {line_no}: expected 6 fields, got {len(fields)}")
    student_id, question_id, ts_text, kind_text, x_text, y_text = fields
    ts = _parse_timestamp(ts_text, line_no)
    kind = _KIND_FROM_NAME.get(kind_text)
    if kind is None:
        raise UnknownEventKind(f"line {line_no}: unknown event kind {kind_text!r}")
    try:
        x = float(x_text)
        y = float(y_text)
    except ValueError:
        raise MalformedRow(f"line {line_no}: bad coordinates ({x_text!r}, {y_text!r})") from None
    if not (np.isfinite(x) and np.isfinite(y)):
        raise MalformedRow(f"line {line_no}: non-finite coordinates")
    return student_id, question_id, ts, kind, x, y


def _iter_csv_rows(text: str, header: tuple[str, ...]) -> Iterable[tuple[int, list[str]]]:
    reader = csv.reader(io.StringIO(text))
    header_seen = False
    for line_no, row in enumerate(reader, start=1):
        if not row or row[0].startswith("#"):
            continue
        if not header_seen:
            if row != list(header):
                raise MalformedRow(f"missing header row, expected {','.join(header)}")
            header_seen = True
            continue
        yield line_no, row


def _iter_jsonl_rows(text: str, header: tuple[str, ...]) -> Iterable[tuple[int, list[str]]]:
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRow(f"line {line_no}: invalid JSON ({exc.msg})") from None
        if not isinstance(obj, dict) or set(obj) != set(header):
            raise MalformedRow(f"line {line_no}: expected keys {header}")
        yield line_no, [str(obj[key]) for key in header]


def _read_source(source) -> str:
    if isinstance(source, (str, bytes)):
        data = source
    elif hasattr(source, "read"):
        data = source.read()
    else:
        with open(source, "rb") as fh:
            data = fh.read()
    if isinstance(data, bytes):
        try:
            return data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedRow(f"input is not UTF-8: {exc}") from None
    return data


def parse_events_log(source, fmt: str = "csv",
                     session_gap_ms: int = DEFAULT_SESSION_GAP_MS) -> list[Trajectory]:
    """Parse a mouse-event log into trajectories.

    ``source`` may be a path, a readable stream, or raw text/bytes; ``fmt``
    is ``"csv"`` or ``"jsonl"``.  Rows are grouped by (student, question),
    stably sorted by timestamp, and split into sessions at gaps larger
    than ``session_gap_ms``.  The output is sorted by (student, question,
    opened_at) for reproducibility.
    """
    text = _read_source(source)
    row_iter = {"csv": _iter_csv_rows, "jsonl": _iter_jsonl_rows}.get(fmt.lower())
    if row_iter is None:
        raise ValueError(f"unknown format {fmt!r}")

    groups: dict[tuple[str, str], list[tuple[int, EventKind, float, float]]] = {}
    for line_no, row in row_iter(text, TRAJECTORY_HEADER):
        student_id, question_id, ts, kind, x, y = _parse_event_fields(row, line_no)
        groups.setdefault((student_id, question_id), []).append((ts, kind, x, y))

    trajectories: list[Trajectory] = []
    for (student_id, question_id), rows in sorted(groups.items()):
        rows.sort(key=lambda r: r[0])  # stable: input order preserved on equal stamps
        session_start = 0
        for i in range(1, len(rows) + 1):
            if i == len(rows) or rows[i][0] - rows[i - 1][0] > session_gap_ms:
                chunk = rows[session_start:i]
                trajectories.append(Trajectory(
                    student_id=student_id,
                    question_id=question_id,
                    timestamps=np.array([r[0] for r in chunk], dtype=np.int64),
                    kinds=np.array([int(r[1]) for r in chunk], dtype=np.int8),
                    xs=np.array([r[2] for r in chunk], dtype=np.float64),
                    ys=np.array([r[3] for r in chunk], dtype=np.float64),
                ))
                session_start = i
    return trajectories


def write_events_log(trajectories: Iterable[Trajectory], fmt: str = "csv") -> str:
    """Serialize trajectories back to the row format accepted by the parser."""
    if fmt.lower() == "csv":
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(TRAJECTORY_HEADER)
        for traj in trajectories:
            for t, k, x, y in zip(traj.timestamps, traj.kinds, traj.xs, traj.ys):
                writer.writerow([traj.student_id, traj.question_id, int(t),
                                 _NAME_FROM_KIND[EventKind(int(k))], repr(float(x)), repr(float(y))])
        return out.getvalue()
    if fmt.lower() == "jsonl":
        lines = []
        for traj in trajectories:
            for t, k, x, y in zip(traj.timestamps, traj.kinds, traj.xs, traj.ys):
                lines.append(json.dumps({
                    "student_id": traj.student_id,
                    "question_id": traj.question_id,
                    "timestamp_ms": int(t),
                    "event_kind": _NAME_FROM_KIND[EventKind(int(k))],
                    "x": float(x),
                    "y": float(y),
                }))
        return "\n".join(lines) + ("\n" if lines else "")
    raise ValueError(f"unknown format {fmt!r}")


def parse_submissions_log(source, bins: ScoreClassBins = ScoreClassBins(),
                          fmt: str = "csv") -> list[SubmissionRecord]:
    """Parse graded submissions; score classes come from ``bins``."""
    text = _read_source(source)
    row_iter = {"csv": _iter_csv_rows, "jsonl": _iter_jsonl_rows}.get(fmt.lower())
    if row_iter is None:
        raise ValueError(f"unknown format {fmt!r}")
    records = []
    for line_no, row in row_iter(text, SUBMISSION_HEADER):
        if len(row) != 5:
            raise MalformedRow(f"line {line_no}: expected 5 fields, got {len(row)}")
        student_id, question_id, ts_text, attempt_text, score_text = row
        ts = _parse_timestamp(ts_text, line_no)
        try:
            attempt = int(attempt_text)
            raw_score = int(score_text)
        except ValueError:
            raise MalformedRow(f"line {line_no}: bad attempt/score fields") from None
        records.append(SubmissionRecord(
            student_id=student_id, question_id=question_id, submitted_at=ts,
            attempt_index=attempt, raw_score=raw_score,
            score_class=map_score_to_class(raw_score, bins),
        ))
    records.sort(key=lambda r: (r.student_id, r.question_id, r.submitted_at, r.attempt_index))
    return records


def parse_questions_log(source, fmt: str = "csv") -> list[QuestionMeta]:
    text = _read_source(source)
    row_iter = {"csv": _iter_csv_rows, "jsonl": _iter_jsonl_rows}.get(fmt.lower())
    if row_iter is None:
        raise ValueError(f"unknown format {fmt!r}")
    metas = []
    for line_no, row in row_iter(text, QUESTION_HEADER):
        if len(row) != 4:
            raise MalformedRow(f"line {line_no}: expected 4 fields, got {len(row)}")
        question_id, dimension, grade_text, diff_text = row
        try:
            grade = int(grade_text)
            difficulty = int(diff_text)
        except ValueError:
            raise MalformedRow(f"line {line_no}: bad grade/difficulty fields") from None
        metas.append(QuestionMeta(question_id=question_id, math_dimension=dimension,
                                  grade=grade, difficulty=difficulty))
    metas.sort(key=lambda q: q.question_id)
    return metas


def match_trajectories(trajectories: Sequence[Trajectory],
                       records: Sequence[SubmissionRecord],
                       ) -> tuple[dict[tuple[str, str, int], Trajectory], list[Trajectory]]:
    """Associate each trajectory with a submission record.

    A trajectory belongs to the first record of the same (student, question)
    whose ``submitted_at`` is at or after the trajectory's last event.  When
    several sessions precede one record, the latest-opening session wins.
    Returns (record key -> trajectory, unmatched trajectories); unmatched
    ones are kept out of supervised datasets.
    """
    by_pair: dict[tuple[str, str], list[SubmissionRecord]] = {}
    for rec in records:
        by_pair.setdefault((rec.student_id, rec.question_id), []).append(rec)
    for recs in by_pair.values():
        recs.sort(key=lambda r: r.submitted_at)

    matched: dict[tuple[str, str, int], Trajectory] = {}
    unmatched: list[Trajectory] = []
    for traj in trajectories:
        candidates = by_pair.get((traj.student_id, traj.question_id), [])
        last_ts = int(traj.timestamps[-1])
        target = next((r for r in candidates if r.submitted_at >= last_ts), None)
        if target is None:
            unmatched.append(traj)
            continue
        key = (target.student_id, target.question_id, target.submitted_at)
        prior = matched.get(key)
        if prior is None or traj.opened_at > prior.opened_at:
            if prior is not None:
                unmatched.append(prior)
            matched[key] = traj
        else:
            unmatched.append(traj)
    return matched, unmatched
