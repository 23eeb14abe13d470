import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mousetrail.trajectory import (EventKind, MalformedRow, MouseEvent,
                                   NonMonotoneTimestamps, OutOfRangeScore,
                                   ScoreClassBins, SubmissionRecord, Trajectory,
                                   UnknownEventKind, map_score_to_class,
                                   match_trajectories, parse_events_log,
                                   parse_questions_log, parse_submissions_log,
                                   write_events_log)

HEADER = "student_id,question_id,timestamp_ms,event_kind,x,y\n"


def test_parse_single_row_round_trip():
    text = HEADER + "s1,q7,1555050000123,drag,412.5,310.0\n"
    trajs = parse_events_log(text)
    assert len(trajs) == 1
    traj = trajs[0]
    assert traj.student_id == "s1" and traj.question_id == "q7"
    event = traj.events[0]
    assert event == MouseEvent(1555050000123, EventKind.DRAG, 412.5, 310.0)
    assert traj.opened_at == 1555050000123


def test_unknown_event_kind_rejected():
    text = HEADER + "s1,q7,1555050000123,hover,1.0,2.0\n"
    with pytest.raises(UnknownEventKind):
        parse_events_log(text)


def test_rows_sorted_by_timestamp():
    text = HEADER + "s1,q1,5,move,0,0\n" + "s1,q1,3,move,1,1\n"
    traj = parse_events_log(text)[0]
    assert traj.timestamps.tolist() == [3, 5]
    assert traj.xs.tolist() == [1.0, 0.0]


def test_stable_sort_preserves_input_order_on_ties():
    text = HEADER + "s1,q1,5,move,0,0\n" + "s1,q1,5,drag,1,1\n"
    traj = parse_events_log(text)[0]
    assert traj.kinds.tolist() == [int(EventKind.MOVE), int(EventKind.DRAG)]


def test_malformed_row_field_count():
    with pytest.raises(MalformedRow):
        parse_events_log(HEADER + "s1,q1,5,move,0\n")


def test_unparseable_timestamp():
    with pytest.raises(NonMonotoneTimestamps):
        parse_events_log(HEADER + "s1,q1,notatime,move,0,0\n")


def test_missing_header_rejected():
    with pytest.raises(MalformedRow):
        parse_events_log("s1,q1,5,move,0,0\n")


def test_session_split_on_gap():
    gap = 30 * 60 * 1000
    rows = [f"s1,q1,{t},move,0,0" for t in (0, 1000, 1000 + gap + 1, 1000 + gap + 2000)]
    trajs = parse_events_log(HEADER + "\n".join(rows) + "\n")
    assert len(trajs) == 2
    assert trajs[0].timestamps.tolist() == [0, 1000]
    assert trajs[1].opened_at == 1000 + gap + 1


def test_session_gap_configurable():
    rows = [f"s1,q1,{t},move,0,0" for t in (0, 5_000)]
    trajs = parse_events_log(HEADER + "\n".join(rows) + "\n", session_gap_ms=4_000)
    assert len(trajs) == 2


def test_jsonl_round_trip():
    text = HEADER + "s1,q7,123,drag,412.5,310.0\ns2,q1,5,move,0.0,1.0\n"
    trajs = parse_events_log(text)
    jsonl = write_events_log(trajs, "jsonl")
    again = parse_events_log(jsonl, "jsonl")
    assert again == trajs


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_parse_serialize_parse_identity(data):
    rng_seed = data.draw(st.integers(0, 2**31))
    rng = np.random.default_rng(rng_seed)
    n_groups = data.draw(st.integers(1, 4))
    rows = []
    for g in range(n_groups):
        n = data.draw(st.integers(1, 12))
        t = 0
        for _ in range(n):
            t += int(rng.integers(0, 10_000))
            kind = ["move", "down", "drag", "up"][int(rng.integers(4))]
            x, y = float(rng.uniform(-50, 50)), float(rng.uniform(-50, 50))
            rows.append(f"sa{g % 2},qb{g},{t},{kind},{x!r},{y!r}")
    text = HEADER + "\n".join(rows) + "\n"
    first = parse_events_log(text)
    second = parse_events_log(write_events_log(first, "csv"))
    assert second == first


def test_events_non_decreasing_for_arbitrary_row_order(rng):
    rows = []
    stamps = rng.integers(0, 100_000, size=50)
    for t in stamps:
        rows.append(f"s1,q1,{t},move,0,0")
    trajs = parse_events_log(HEADER + "\n".join(rows) + "\n")
    for traj in trajs:
        assert np.all(np.diff(traj.timestamps) >= 0)


def test_map_score_boundaries():
    bins = ScoreClassBins()
    assert map_score_to_class(0, bins) == 0
    assert map_score_to_class(25, bins) == 0
    assert map_score_to_class(26, bins) == 1
    assert map_score_to_class(60, bins) == 2
    assert map_score_to_class(100, bins) == 3


def test_map_score_out_of_range():
    with pytest.raises(OutOfRangeScore):
        map_score_to_class(101)
    with pytest.raises(OutOfRangeScore):
        map_score_to_class(-1)


@given(st.tuples(st.integers(1, 97), st.integers(2, 98), st.integers(3, 99))
       .filter(lambda e: e[0] < e[1] < e[2]))
def test_map_score_monotone_and_surjective(edges):
    bins = ScoreClassBins(edges)
    classes = [map_score_to_class(s, bins) for s in range(101)]
    assert all(a <= b for a, b in zip(classes, classes[1:]))
    assert set(classes) == {0, 1, 2, 3}


def test_bins_must_increase():
    with pytest.raises(ValueError):
        ScoreClassBins((50, 50, 75))


def test_submission_parsing_and_classes():
    text = ("student_id,question_id,submitted_at_ms,attempt_index,raw_score\n"
            "s1,q1,1000,1,60\n"
            "s1,q1,2000,2,80\n")
    records = parse_submissions_log(text)
    assert [r.score_class for r in records] == [2, 3]
    assert records[1].attempt_index == 2


def test_submission_attempt_bounds():
    text = ("student_id,question_id,submitted_at_ms,attempt_index,raw_score\n"
            "s1,q1,1000,3,60\n")
    with pytest.raises(MalformedRow):
        parse_submissions_log(text)


def test_question_parsing_difficulty_bounds():
    ok = "question_id,math_dimension,grade,difficulty\nq1,area,7,5\n"
    assert parse_questions_log(ok)[0].difficulty == 5
    bad = "question_id,math_dimension,grade,difficulty\nq1,area,7,6\n"
    with pytest.raises(MalformedRow):
        parse_questions_log(bad)


def test_trajectory_requires_events():
    with pytest.raises(MalformedRow):
        Trajectory("s", "q", np.array([], dtype=np.int64),
                   np.array([], dtype=np.int8), np.array([]), np.array([]))


def _record(sid, qid, at, attempt=1, score=50):
    return SubmissionRecord(student_id=sid, question_id=qid, submitted_at=at,
                            attempt_index=attempt, raw_score=score,
                            score_class=map_score_to_class(score))


def test_match_trajectory_to_first_record_at_or_after_last_event():
    from tests.conftest import traj_from_pattern

    traj = traj_from_pattern("MMM", start_ms=1_000, step_ms=100)  # last event 1200
    records = [_record("s1", "q1", 1_100), _record("s1", "q1", 1_500)]
    matched, unmatched = match_trajectories([traj], records)
    assert not unmatched
    assert list(matched) == [("s1", "q1", 1_500)]


def test_unmatched_trajectory_retained():
    from tests.conftest import traj_from_pattern

    traj = traj_from_pattern("MMM", start_ms=1_000, step_ms=100)
    matched, unmatched = match_trajectories([traj], [_record("s1", "q1", 900)])
    assert not matched and unmatched == [traj]


def test_latest_session_wins_for_one_record():
    from tests.conftest import traj_from_pattern

    early = traj_from_pattern("MMM", start_ms=0, step_ms=10)
    late = traj_from_pattern("MMM", start_ms=10_000, step_ms=10)
    record = _record("s1", "q1", 20_000)
    matched, unmatched = match_trajectories([early, late], [record])
    assert matched[("s1", "q1", 20_000)] == late
    assert unmatched == [early]
