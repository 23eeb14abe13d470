import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mousetrail.changepoint import (AUTO, ChangePoints, DensityParams,
                                    EmptyWindow, InconsistentIndices,
                                    TrajectoryTooShort, detect_change_points,
                                    resolve_threshold, segment_stages,
                                    window_drag_density)
from mousetrail.trajectory import EventKind
from tests.conftest import random_trajectory, traj_from_pattern


def brute_force_change_points(kinds: np.ndarray, window: int,
                              threshold: float) -> ChangePoints:
    """Independent oracle: direct per-window mean scan, no shared code."""
    n = len(kinds)
    densities = [float(np.mean(kinds[s:s + window] == int(EventKind.DRAG)))
                 for s in range(n - window + 1)]
    onset = None
    for s, rho in enumerate(densities):
        if rho > threshold:
            onset = s
            break
    if onset is None:
        return ChangePoints(None, None)
    for s in range(onset, len(densities)):
        if densities[s] < threshold:
            return ChangePoints(onset, s + window - 1)
    return ChangePoints(onset, n - 1)


def test_density_no_drags():
    traj = traj_from_pattern("MMMM")
    assert window_drag_density(traj.kinds) == 0.0


def test_density_all_drags():
    traj = traj_from_pattern("DDDD")
    assert window_drag_density(traj.kinds) == 1.0


def test_density_half():
    traj = traj_from_pattern("MDDM")
    assert window_drag_density(traj.kinds) == 0.5


def test_density_empty_window():
    with pytest.raises(EmptyWindow):
        window_drag_density(np.array([], dtype=np.int8))


def test_detect_hand_example():
    traj = traj_from_pattern("MMMMDDDDMMMM")
    cps = detect_change_points(traj, DensityParams(window_size=4, threshold=0.5))
    assert cps == ChangePoints(3, 10)


def test_all_moves_auto_threshold_absent():
    traj = traj_from_pattern("M" * 12)
    cps = detect_change_points(traj, DensityParams(window_size=4, threshold=AUTO))
    assert cps == ChangePoints(None, None)


def test_all_drags_auto_threshold_absent():
    traj = traj_from_pattern("D" * 12)
    params = DensityParams(window_size=4, threshold=AUTO)
    assert resolve_threshold(traj, params) == 1.0
    assert detect_change_points(traj, params) == ChangePoints(None, None)


def test_never_drops_below_gives_last_event():
    traj = traj_from_pattern("MMMMDDDDDDDD")
    cps = detect_change_points(traj, DensityParams(window_size=4, threshold=0.5))
    assert cps.cp1 == 3
    assert cps.cp2 == len(traj) - 1


def test_too_short_raises():
    traj = traj_from_pattern("MD")
    with pytest.raises(TrajectoryTooShort):
        detect_change_points(traj, DensityParams(window_size=4, threshold=0.5))


def test_matches_brute_force_on_random_trajectories(rng):
    for _ in range(300):
        n = int(rng.integers(10, 200))
        traj = random_trajectory(rng, n)
        window = int(rng.integers(2, min(n, 20) + 1))
        if rng.random() < 0.5:
            threshold = float(rng.random())
            params = DensityParams(window_size=window, threshold=threshold)
        else:
            params = DensityParams(window_size=window, threshold=AUTO)
            threshold = resolve_threshold(traj, params)
        got = detect_change_points(traj, params)
        want = brute_force_change_points(traj.kinds, window, threshold)
        assert got == want


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31), st.integers(10, 60), st.integers(2, 8))
def test_raising_threshold_never_moves_cp1_earlier(seed, n, window):
    rng = np.random.default_rng(seed)
    traj = random_trajectory(rng, n)
    thresholds = sorted(rng.random(3).tolist())
    cp1s = []
    for thr in thresholds:
        cps = detect_change_points(traj, DensityParams(window_size=window, threshold=thr))
        cp1s.append(np.inf if cps.cp1 is None else cps.cp1)
    assert all(a <= b for a, b in zip(cp1s, cp1s[1:]))


def test_threshold_zero_with_any_drag_finds_onset():
    traj = traj_from_pattern("MMMMMDMMMM")
    cps = detect_change_points(traj, DensityParams(window_size=3, threshold=0.0))
    assert cps.cp1 is not None


def test_segment_hand_example():
    traj = traj_from_pattern("MMMMDDDDMMMM")
    think, attempt, following = segment_stages(traj, ChangePoints(3, 10))
    lengths = [s.stop - s.start for s in (think, attempt, following)]
    assert lengths == [3, 8, 1]


def test_segment_absent_puts_all_in_think():
    traj = traj_from_pattern("MMMMMMMMMMMM")
    think, attempt, following = segment_stages(traj, ChangePoints(None, None))
    assert (think.stop - think.start, attempt.stop - attempt.start,
            following.stop - following.start) == (12, 0, 0)


def test_segment_cp1_zero_empty_think():
    traj = traj_from_pattern("DDDDMMMM")
    think, attempt, _ = segment_stages(traj, ChangePoints(0, 3))
    assert think.stop - think.start == 0
    assert attempt.start == 0


def test_segment_partition_property(rng):
    for _ in range(200):
        n = int(rng.integers(10, 100))
        traj = random_trajectory(rng, n)
        window = int(rng.integers(2, 9))
        cps = detect_change_points(traj, DensityParams(window_size=window, threshold=AUTO))
        think, attempt, following = segment_stages(traj, cps)
        pieces = np.concatenate([traj.kinds[think], traj.kinds[attempt],
                                 traj.kinds[following]])
        assert np.array_equal(pieces, traj.kinds)
        assert think.stop == attempt.start and attempt.stop == following.start


def test_segment_inconsistent_indices():
    traj = traj_from_pattern("MMMM")
    with pytest.raises(InconsistentIndices):
        segment_stages(traj, ChangePoints(1, 9))


def test_changepoints_invariants():
    with pytest.raises(InconsistentIndices):
        ChangePoints(None, 3)
    with pytest.raises(InconsistentIndices):
        ChangePoints(5, 5)


def test_params_validation():
    with pytest.raises(ValueError):
        DensityParams(window_size=1)
    with pytest.raises(ValueError):
        DensityParams(threshold=1.5)
    with pytest.raises(ValueError):
        DensityParams(threshold="sometimes")
