import numpy as np
import pytest

from mousetrail.trajectory import EventKind, Trajectory

KIND_OF_CHAR = {"M": EventKind.MOVE, "D": EventKind.DRAG,
                "d": EventKind.DOWN, "u": EventKind.UP}


def traj_from_pattern(pattern: str, student_id: str = "s1", question_id: str = "q1",
                      start_ms: int = 1_000_000, step_ms: int = 1_000,
                      coords=None) -> Trajectory:
    """Build a trajectory from a compact kind string.

    'M' move, 'D' drag, 'd' down, 'u' up; events are step_ms apart.
    """
    kinds = [int(KIND_OF_CHAR[ch]) for ch in pattern]
    n = len(kinds)
    if coords is None:
        xs = np.linspace(0.0, 10.0 * (n - 1), n)
        ys = np.zeros(n)
    else:
        xs = np.array([c[0] for c in coords], dtype=np.float64)
        ys = np.array([c[1] for c in coords], dtype=np.float64)
    return Trajectory(
        student_id=student_id,
        question_id=question_id,
        timestamps=start_ms + step_ms * np.arange(n, dtype=np.int64),
        kinds=np.array(kinds, dtype=np.int8),
        xs=xs,
        ys=ys,
    )


def random_trajectory(rng: np.random.Generator, n_events: int,
                      student_id: str = "s1", question_id: str = "q1") -> Trajectory:
    """Random event stream (arbitrary kind order, non-decreasing stamps)."""
    stamps = np.cumsum(rng.integers(0, 2_000, size=n_events)).astype(np.int64)
    return Trajectory(
        student_id=student_id,
        question_id=question_id,
        timestamps=1_000_000 + stamps,
        kinds=rng.integers(0, 4, size=n_events).astype(np.int8),
        xs=rng.uniform(0, 1000, size=n_events),
        ys=rng.uniform(0, 800, size=n_events),
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
