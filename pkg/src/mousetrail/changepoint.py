"""Sliding-window change-point detection over mouse-event streams.

A trajectory splits into three stages: think time, first attempt, and
following actions.  The boundaries are found by sliding a fixed-size
window over the event sequence and comparing its drag density (drag
events / window size) against a threshold:

* the first window whose density rises strictly above the threshold marks
  the first change point at that window's first event;
* continuing the slide, the first later window whose density falls
  strictly below the threshold marks the second change point at that
  window's last event; if density never falls, the second change point is
  the last event.

With ``threshold="auto"`` the threshold is the trajectory's overall drag
density.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from mousetrail import kernels
from mousetrail.trajectory import EventKind, Trajectory

DEFAULT_WINDOW_SIZE = 10

AUTO = "auto"


class EmptyWindow(ValueError):
    pass


class TrajectoryTooShort(ValueError):
    pass


class InconsistentIndices(ValueError):
    pass


@dataclass(frozen=True)
class DensityParams:
    window_size: int = DEFAULT_WINDOW_SIZE
    threshold: Union[float, str] = AUTO

    def __post_init__(self) -> None:
        if self.window_size < 2:
            raise ValueError(f"window_size must be >= 2, got {self.window_size}")
        if isinstance(self.threshold, str):
            if self.threshold != AUTO:
                raise ValueError(f"threshold must be a float or 'auto', got {self.threshold!r}")
        elif not 0.0 <= float(self.threshold) <= 1.0:
            raise ValueError(f"threshold {self.threshold} outside [0, 1]")


@dataclass(frozen=True)
class ChangePoints:
    """Event indices of the two stage boundaries; both absent if no onset."""

    cp1: int | None = None
    cp2: int | None = None

    def __post_init__(self) -> None:
        if self.cp2 is not None and self.cp1 is None:
            raise InconsistentIndices("cp2 present without cp1")
        if self.cp1 is not None and self.cp2 is not None and not self.cp1 < self.cp2:
            raise InconsistentIndices(f"need cp1 < cp2, got {self.cp1}, {self.cp2}")


def window_drag_density(kinds: np.ndarray) -> float:
    """Fraction of drag events in an event-kind slice."""
    kinds = np.asarray(kinds)
    if kinds.shape[0] == 0:
        raise EmptyWindow("density of an empty event slice is undefined")
    return float(np.count_nonzero(kinds == int(EventKind.DRAG))) / kinds.shape[0]


def resolve_threshold(traj: Trajectory, params: DensityParams) -> float:
    if params.threshold == AUTO:
        return window_drag_density(traj.kinds)
    return float(params.threshold)


def detect_change_points(traj: Trajectory, params: DensityParams = DensityParams()) -> ChangePoints:
    """Locate the two change points of a trajectory, if any."""
    n = len(traj)
    w = params.window_size
    if n < w:
        raise TrajectoryTooShort(f"{n} events < window size {w}")
    threshold = resolve_threshold(traj, params)

    counts = kernels.rolling_drag_counts(traj.kinds, w, int(EventKind.DRAG))
    densities = counts / float(w)

    above = np.flatnonzero(densities > threshold)
    if above.shape[0] == 0:
        return ChangePoints(None, None)
    onset = int(above[0])
    cp1 = onset

    below = np.flatnonzero(densities[onset:] < threshold)
    if below.shape[0] == 0:
        return ChangePoints(cp1, n - 1)
    offset = onset + int(below[0])
    cp2 = offset + w - 1
    return ChangePoints(cp1, cp2)


def segment_stages(traj: Trajectory, cps: ChangePoints) -> tuple[slice, slice, slice]:
    """Slices of the think, first-attempt, and following stages.

    Think covers events [0, cp1); first attempt covers [cp1, cp2]
    inclusive; following covers the rest.  Without change points the whole
    trajectory is think time.
    """
    n = len(traj)
    if cps.cp1 is None:
        return slice(0, n), slice(n, n), slice(n, n)
    if cps.cp2 is None or not 0 <= cps.cp1 < cps.cp2 < n:
        raise InconsistentIndices(f"change points {cps} do not fit {n} events")
    return slice(0, cps.cp1), slice(cps.cp1, cps.cp2 + 1), slice(cps.cp2 + 1, n)
