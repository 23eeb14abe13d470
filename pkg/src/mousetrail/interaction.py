"""Mouse-gesture segmentation and per-trajectory interaction features.

Two feature families are extracted from each trajectory:

* stage features around the think stage, the first attempt, and the first
  drag-and-drop gesture (13 values);
* statistical aggregates (median / mean / IQR) of per-gesture measures and
  whole-trajectory counts (24 values).

A drag-and-drop is a maximal run of consecutive events matching
down, drag+, up.  Undefined quantities use the sentinel -1 so every
trajectory yields a fixed-width numeric vector of 37 values.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Sequence

import numpy as np

from mousetrail.changepoint import ChangePoints
from mousetrail.trajectory import EventKind, Trajectory

SENTINEL = -1.0

MOUSE_FEATURE_COUNT = 37


@dataclass(frozen=True)
class DragAndDrop:
    """One down/drag+/up gesture with its geometry.

    ``path_length`` is the polyline length from the down point through the
    up point, ``chord_length`` the straight-line distance between them, and
    ``curvature`` their ratio chord/path (1 for a straight drag, 0 for a
    degenerate zero-length one).
    """

    start_index: int
    end_index: int
    points: tuple[tuple[float, float], ...]
    start_time: int
    end_time: int
    path_length: float
    chord_length: float
    curvature: float
    duration_ms: int


@dataclass(frozen=True)
class StageFeatures:
    think_time_ms: float = SENTINEL
    think_time_pct: float = SENTINEL
    think_event_count: float = SENTINEL
    think_event_pct: float = SENTINEL
    first_attempt_end_index: float = SENTINEL
    first_dd_time_ms: float = SENTINEL
    first_dd_time_pct: float = SENTINEL
    first_dd_start_index: float = SENTINEL
    first_dd_event_pct: float = SENTINEL
    first_dd_end_index: float = SENTINEL
    first_dd_curvature: float = SENTINEL
    first_dd_length: float = SENTINEL
    first_dd_chord: float = SENTINEL


@dataclass(frozen=True)
class GestureAggregates:
    curvature_median: float = SENTINEL
    curvature_mean: float = SENTINEL
    curvature_iqr: float = SENTINEL
    drag_length_median: float = SENTINEL
    drag_length_mean: float = SENTINEL
    drag_length_iqr: float = SENTINEL
    drag_duration_median: float = SENTINEL
    drag_duration_mean: float = SENTINEL
    drag_duration_iqr: float = SENTINEL
    chord_length_median: float = SENTINEL
    chord_length_mean: float = SENTINEL
    chord_length_iqr: float = SENTINEL
    event_gap_median: float = SENTINEL
    event_gap_mean: float = SENTINEL
    event_gap_iqr: float = SENTINEL
    drag_gap_median: float = SENTINEL
    drag_gap_mean: float = SENTINEL
    drag_gap_iqr: float = SENTINEL
    dd_count: float = SENTINEL
    total_time_ms: float = SENTINEL
    total_events: float = SENTINEL
    events_per_second_mean: float = SENTINEL
    events_per_second_median: float = SENTINEL
    events_per_second_iqr: float = SENTINEL


STAGE_FEATURE_NAMES = tuple(f.name for f in fields(StageFeatures))
AGGREGATE_FEATURE_NAMES = tuple(f.name for f in fields(GestureAggregates))
MOUSE_FEATURE_NAMES = STAGE_FEATURE_NAMES + AGGREGATE_FEATURE_NAMES
assert len(MOUSE_FEATURE_NAMES) == MOUSE_FEATURE_COUNT


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """Named, ordered block of numeric features."""

    names: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        if len(self.names) != self.values.shape[0]:
            raise ValueError("names and values lengths differ")
        self.values.setflags(write=False)

    def __len__(self) -> int:
        return int(self.values.shape[0])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FeatureVector):
            return NotImplemented
        return self.names == other.names and np.array_equal(self.values, other.values)

    def __hash__(self) -> int:
        return hash((self.names, self.values.tobytes()))

    def concat(self, other: "FeatureVector") -> "FeatureVector":
        return FeatureVector(self.names + other.names,
                             np.concatenate([self.values, other.values]))


def segment_drag_and_drops(traj: Trajectory) -> list[DragAndDrop]:
    """Extract down/drag+/up gestures with their geometry.

    A lone down/up pair with no drag in between is a click, not a gesture;
    unmatched downs and ups yield nothing.
    """
    kinds = traj.kinds
    n = len(traj)
    gestures: list[DragAndDrop] = []
    i = 0
    while i < n:
        if kinds[i] != int(EventKind.DOWN):
            i += 1
            continue
        j = i + 1
        while j < n and kinds[j] == int(EventKind.DRAG):
            j += 1
        if j > i + 1 and j < n and kinds[j] == int(EventKind.UP):
            xs = traj.xs[i:j + 1]
            ys = traj.ys[i:j + 1]
            steps = np.hypot(np.diff(xs), np.diff(ys))
            path = float(np.sum(steps))
            chord = float(np.hypot(xs[-1] - xs[0], ys[-1] - ys[0]))
            curvature = chord / path if path > 0 else 0.0
            gestures.append(DragAndDrop(
                start_index=i,
                end_index=j,
                points=tuple(zip(xs.tolist(), ys.tolist())),
                start_time=int(traj.timestamps[i]),
                end_time=int(traj.timestamps[j]),
                path_length=path,
                chord_length=chord,
                curvature=curvature,
                duration_ms=int(traj.timestamps[j] - traj.timestamps[i]),
            ))
            i = j + 1
        else:
            i += 1
    return gestures


def extract_stage_features(traj: Trajectory, cps: ChangePoints,
                dds: Sequence[DragAndDrop]) -> StageFeatures:
    """Stage features; anything whose source is absent stays -1."""
    n = len(traj)
    duration = int(traj.timestamps[-1]) - traj.opened_at
    out: dict[str, float] = {}

    if cps.cp1 is not None:
        think_ms = float(traj.timestamps[cps.cp1] - traj.opened_at)
        out["think_time_ms"] = think_ms
        out["think_event_count"] = float(cps.cp1)
        out["think_event_pct"] = cps.cp1 / n
        if duration > 0:
            out["think_time_pct"] = think_ms / duration
        out["first_attempt_end_index"] = float(cps.cp2)

    if dds:
        first = dds[0]
        # the gesture's first drag event, one past the down
        first_drag_ts = int(traj.timestamps[first.start_index + 1])
        dd_ms = float(first_drag_ts - traj.opened_at)
        out["first_dd_time_ms"] = dd_ms
        if duration > 0:
            out["first_dd_time_pct"] = dd_ms / duration
        out["first_dd_start_index"] = float(first.start_index)
        out["first_dd_event_pct"] = first.start_index / n
        out["first_dd_end_index"] = float(first.end_index)
        out["first_dd_curvature"] = first.curvature
        out["first_dd_length"] = first.path_length
        out["first_dd_chord"] = first.chord_length

    return StageFeatures(**out)


def _median_mean_iqr(values: Sequence[float]) -> tuple[float, float, float]:
    if len(values) == 0:
        return SENTINEL, SENTINEL, SENTINEL
    arr = np.asarray(values, dtype=np.float64)
    q1, q3 = np.percentile(arr, [25, 75])  # linear interpolation
    return float(np.median(arr)), float(np.mean(arr)), float(q3 - q1)


def extract_gesture_aggregates(traj: Trajectory, dds: Sequence[DragAndDrop]) -> GestureAggregates:
    """Median/mean/IQR aggregates of gesture measures and event-rate stats."""
    out: dict[str, float] = {}

    measure_lists = {
        "curvature": [dd.curvature for dd in dds],
        "drag_length": [dd.path_length for dd in dds],
        "drag_duration": [float(dd.duration_ms) for dd in dds],
        "chord_length": [dd.chord_length for dd in dds],
        "event_gap": np.diff(traj.timestamps).astype(np.float64).tolist(),
        "drag_gap": [float(dds[i + 1].start_time - dds[i].end_time)
                     for i in range(len(dds) - 1)],
    }
    for name, values in measure_lists.items():
        med, mean, iqr = _median_mean_iqr(values)
        out[f"{name}_median"] = med
        out[f"{name}_mean"] = mean
        out[f"{name}_iqr"] = iqr

    out["dd_count"] = float(len(dds))
    duration = int(traj.timestamps[-1]) - traj.opened_at
    out["total_time_ms"] = float(duration)
    out["total_events"] = float(len(traj))

    seconds = (traj.timestamps - traj.opened_at) // 1000
    counts = np.bincount(seconds.astype(np.int64), minlength=int(seconds[-1]) + 1)
    med, mean, iqr = _median_mean_iqr(counts.astype(np.float64))
    out["events_per_second_mean"] = mean
    out["events_per_second_median"] = med
    out["events_per_second_iqr"] = iqr

    return GestureAggregates(**out)


def mouse_feature_vector(stage: StageFeatures, aggregates: GestureAggregates) -> FeatureVector:
    """Fixed 37-value vector: the stage features followed by the aggregates."""
    values = np.array(
        [getattr(stage, name) for name in STAGE_FEATURE_NAMES]
        + [getattr(aggregates, name) for name in AGGREGATE_FEATURE_NAMES],
        dtype=np.float64,
    )
    return FeatureVector(MOUSE_FEATURE_NAMES, values)


def extract_mouse_features(traj: Trajectory, cps: ChangePoints) -> FeatureVector:
    """Convenience wrapper: gestures, stage features, and aggregates in one call."""
    dds = segment_drag_and_drops(traj)
    return mouse_feature_vector(extract_stage_features(traj, cps, dds), extract_gesture_aggregates(traj, dds))
