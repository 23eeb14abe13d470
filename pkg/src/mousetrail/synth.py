"""Seeded synthetic corpus: trajectories, submissions, question metadata.

Students carry latent traits (ability, think-time scale, hand jitter);
questions carry a hidden gesture profile (how many drag gestures, how
long) that shapes trajectories but is absent from the metadata.  Scores
mix a behavioral signal with uniform noise under ``signal_strength``:

* higher ability raises the expected score, higher difficulty and more
  hand jitter lower it;
* jitter hurts more on long-drag questions, a student-question interaction
  visible only through the trajectories;
* slower realized thinking lowers the score, so the planted think time is
  informative about the label.

Everything derives from the scenario seed, so output files are
byte-reproducible.
"""

from __future__ import annotations

import hashlib
import io
import json
from dataclasses import asdict, dataclass

import numpy as np

from mousetrail.trajectory import (QUESTION_HEADER, SUBMISSION_HEADER,
                                   TRAJECTORY_HEADER, EventKind, QuestionMeta,
                                   Trajectory)

BASE_EPOCH_MS = 1_546_300_800_000  # 2019-01-01T00:00:00Z
DAY_MS = 86_400_000

# gesture profiles: (min gestures, max gestures, drag length scale px, think factor)
_GESTURE_PROFILES = ((1, 2, 70.0, 0.85), (2, 3, 150.0, 1.0), (4, 5, 260.0, 1.2))


@dataclass(frozen=True)
class StudentProfile:
    ability: float
    think_time_mean_ms: float
    drag_noise: float
    activity_rate: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.ability <= 1.0:
            raise ValueError(f"ability {self.ability} outside [0, 1]")
        if self.drag_noise < 0:
            raise ValueError(f"drag_noise {self.drag_noise} negative")


@dataclass(frozen=True)
class ScenarioConfig:
    n_students: int = 500
    n_questions: int = 60
    dimensions: tuple[str, ...] = ("area", "geometry", "numeric")
    grade_range: tuple[int, int] = (7, 8)
    difficulty_range: tuple[int, int] = (1, 5)
    duration_days: int = 90
    seed: int = 20_240_401
    signal_strength: float = 0.8

    def __post_init__(self) -> None:
        if self.n_students <= 0 or self.n_questions <= 0 or self.duration_days <= 0:
            raise ValueError("counts and duration must be positive")
        if not 0.0 <= self.signal_strength <= 1.0:
            raise ValueError(f"signal_strength {self.signal_strength} outside [0, 1]")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ScenarioConfig":
        payload = json.loads(text)
        for key in ("dimensions", "grade_range", "difficulty_range"):
            if key in payload:
                payload[key] = tuple(payload[key])
        return cls(**payload)


def gesture_profile_of(question_id: str) -> tuple[int, int, float, float]:
    """Hidden gesture profile, a stable hash of the question id."""
    digest = hashlib.sha256(question_id.encode("utf-8")).digest()
    return _GESTURE_PROFILES[digest[0] % len(_GESTURE_PROFILES)]


def _derived_rng(*entropy: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy))


def generate_trajectory(profile: StudentProfile, question: QuestionMeta,
                        seed: int, start_ms: int = 0,
                        signal_strength: float = 1.0) -> tuple[Trajectory, int]:
    """One synthetic problem-solving session and its raw score.

    The event stream is think-phase moves, one to five down/drag+/up
    gestures separated by idle moves, then trailing moves.  Deterministic
    given (profile, question, seed).
    """
    rng = _derived_rng(seed)
    g_lo, g_hi, drag_scale, think_factor = gesture_profile_of(question.question_id)

    diff_factor = 0.7 + 0.12 * question.difficulty
    ability_factor = 1.35 - 0.7 * profile.ability
    think_ms = (profile.think_time_mean_ms * think_factor * diff_factor
                * ability_factor * float(np.exp(rng.normal(0.0, 0.3))))
    think_ms = float(np.clip(think_ms, 800.0, 90_000.0))

    times: list[float] = []
    kinds: list[int] = []
    xs: list[float] = []
    ys: list[float] = []

    cx, cy = rng.uniform(150, 850), rng.uniform(150, 650)
    n_think = 1 + int(rng.poisson(think_ms / 900.0))
    think_times = np.sort(rng.uniform(0.0, think_ms, size=n_think))
    for tt in think_times:
        cx += rng.normal(0.0, 14.0)
        cy += rng.normal(0.0, 14.0)
        times.append(float(tt))
        kinds.append(int(EventKind.MOVE))
        xs.append(cx)
        ys.append(cy)

    t = think_ms
    n_gestures = int(rng.integers(g_lo, g_hi + 1))
    jitter_sigma = 0.12 * drag_scale * profile.drag_noise
    jitter_accum = 0.0
    jitter_count = 0
    for _ in range(n_gestures):
        sx, sy = rng.uniform(120, 880), rng.uniform(120, 680)
        angle = rng.uniform(0.0, 2.0 * np.pi)
        length = drag_scale * rng.uniform(0.8, 1.25)
        n_points = int(rng.integers(4, 10))

        t += rng.uniform(180.0, 700.0)
        times.append(t)
        kinds.append(int(EventKind.DOWN))
        xs.append(sx)
        ys.append(sy)

        drag_total_ms = length * rng.uniform(2.5, 4.0)
        for p in range(1, n_points + 1):
            frac = p / n_points
            jitter = float(rng.normal(0.0, jitter_sigma)) if p < n_points else 0.0
            jitter_accum += abs(jitter)
            jitter_count += 1
            px = sx + frac * length * np.cos(angle) - jitter * np.sin(angle)
            py = sy + frac * length * np.sin(angle) + jitter * np.cos(angle)
            t += drag_total_ms / n_points
            times.append(t)
            kinds.append(int(EventKind.DRAG))
            xs.append(float(px))
            ys.append(float(py))

        t += rng.uniform(30.0, 120.0)
        times.append(t)
        kinds.append(int(EventKind.UP))
        xs.append(xs[-1])
        ys.append(ys[-1])

        for _ in range(int(rng.integers(1, 4))):
            t += rng.uniform(250.0, 1_500.0)
            times.append(t)
            kinds.append(int(EventKind.MOVE))
            xs.append(xs[-1] + rng.normal(0.0, 25.0))
            ys.append(ys[-1] + rng.normal(0.0, 25.0))

    for _ in range(int(rng.integers(2, 5))):
        t += rng.uniform(200.0, 900.0)
        times.append(t)
        kinds.append(int(EventKind.MOVE))
        xs.append(xs[-1] + rng.normal(0.0, 20.0))
        ys.append(ys[-1] + rng.normal(0.0, 20.0))

    stamps = start_ms + np.maximum.accumulate(np.array(times)).astype(np.int64)
    trajectory = Trajectory(
        student_id="", question_id=question.question_id,
        timestamps=stamps,
        kinds=np.array(kinds, dtype=np.int8),
        xs=np.array(xs, dtype=np.float64),
        ys=np.array(ys, dtype=np.float64),
    )

    # realized messiness: mean |jitter| relative to its full-noise scale
    messiness = (jitter_accum / jitter_count) / (0.12 * drag_scale) if jitter_count else 0.0
    think_over = float(np.clip((think_ms - 6_000.0) / 30_000.0, 0.0, 1.0))
    # specialization: deliberate thinkers do relatively better on long
    # multi-gesture questions, quick starters on short manipulations.  The
    # cross term is centered in both factors, so it cancels out of student
    # score means and question score means alike and surfaces only through
    # the trajectories; jitter keeps its own strictly monotone penalty.
    pace = float(np.clip((np.log(profile.think_time_mean_ms) - np.log(8_000.0)) / 0.45,
                         -2.5, 2.5))
    cross = 1.05 * (drag_scale / 260.0 - 0.615) * pace
    signal = (
        0.62
        + 0.30 * profile.ability
        - 0.05 * (question.difficulty - 3)
        - 0.60 * messiness
        + cross
        - 0.05 * think_over
    )
    signal = float(np.clip(signal, 0.0, 1.0))
    noise = float(rng.uniform(0.0, 1.0))
    blended = signal_strength * signal + (1.0 - signal_strength) * noise
    raw_score = int(round(100.0 * float(np.clip(blended, 0.0, 1.0))))
    return trajectory, raw_score


def _draw_profile(rng: np.random.Generator) -> StudentProfile:
    return StudentProfile(
        ability=float(rng.uniform(0.0, 1.0)),
        think_time_mean_ms=float(np.clip(rng.lognormal(np.log(8_000.0), 0.45),
                                         2_000.0, 30_000.0)),
        drag_noise=float(rng.uniform(0.05, 1.0)),
        activity_rate=float(rng.uniform(0.2, 0.3)),
    )


def _draw_questions(config: ScenarioConfig, rng: np.random.Generator) -> list[QuestionMeta]:
    questions = []
    for i in range(config.n_questions):
        questions.append(QuestionMeta(
            question_id=f"q{i:03d}",
            math_dimension=config.dimensions[int(rng.integers(len(config.dimensions)))],
            grade=int(rng.integers(config.grade_range[0], config.grade_range[1] + 1)),
            difficulty=int(rng.integers(config.difficulty_range[0],
                                        config.difficulty_range[1] + 1)),
        ))
    return questions


def generate_corpus(config: ScenarioConfig) -> dict[str, str]:
    """Generate the three CSV payloads plus a JSON manifest.

    Returns {"trajectories.csv": ..., "submissions.csv": ...,
    "questions.csv": ..., "scenario.json": ...}.  Each student solves an
    individually drawn random question subset in random order; about one
    submission in eight gets a second attempt (no trajectory for those).
    """
    rng = _derived_rng(config.seed)
    questions = _draw_questions(config, rng)
    profiles = [_draw_profile(rng) for _ in range(config.n_students)]
    duration_ms = config.duration_days * DAY_MS

    traj_out = io.StringIO()
    traj_out.write(",".join(TRAJECTORY_HEADER) + "\n")
    sub_out = io.StringIO()
    sub_out.write(",".join(SUBMISSION_HEADER) + "\n")

    kind_names = {int(EventKind.MOVE): "move", int(EventKind.DOWN): "down",
                  int(EventKind.DRAG): "drag", int(EventKind.UP): "up"}

    n_trajectories = 0
    for si, profile in enumerate(profiles):
        srng = _derived_rng(config.seed, 1, si)
        expected = profile.activity_rate * config.duration_days * srng.uniform(0.92, 1.08)
        m = int(np.clip(round(expected), 1, config.n_questions))
        chosen = srng.choice(config.n_questions, size=m, replace=False)
        solve_times = np.sort(srng.uniform(0.0, duration_ms, size=m)).astype(np.int64)

        student_id = f"s{si:04d}"
        for qi, submitted_offset in zip(chosen, solve_times):
            question = questions[int(qi)]
            traj_seed_rng = _derived_rng(config.seed, 2, si, int(qi))
            traj_seed = int(traj_seed_rng.integers(0, 2 ** 62))
            end_gap = int(traj_seed_rng.integers(500, 3_000))
            submitted_at = BASE_EPOCH_MS + int(submitted_offset)

            trajectory, raw_score = generate_trajectory(
                profile, question, traj_seed, start_ms=0,
                signal_strength=config.signal_strength)
            shift = submitted_at - end_gap - int(trajectory.timestamps[-1])
            stamps = trajectory.timestamps + shift

            for ts, kind, x, y in zip(stamps, trajectory.kinds, trajectory.xs, trajectory.ys):
                traj_out.write(f"{student_id},{question.question_id},{int(ts)},"
                               f"{kind_names[int(kind)]},{float(x)!r},{float(y)!r}\n")
            n_trajectories += 1

            sub_out.write(f"{student_id},{question.question_id},{submitted_at},1,{raw_score}\n")
            if traj_seed_rng.uniform() < 0.125:
                second_at = submitted_at + int(traj_seed_rng.integers(120_000, 600_000))
                bonus = int(traj_seed_rng.integers(0, 26))
                second_score = int(np.clip(raw_score + bonus, 0, 100))
                sub_out.write(f"{student_id},{question.question_id},{second_at},2,{second_score}\n")

    q_out = io.StringIO()
    q_out.write(",".join(QUESTION_HEADER) + "\n")
    for q in questions:
        q_out.write(f"{q.question_id},{q.math_dimension},{q.grade},{q.difficulty}\n")

    manifest = {
        "config": asdict(config),
        "n_trajectories": n_trajectories,
        "base_epoch_ms": BASE_EPOCH_MS,
        "suggested_experiment_start_ms": BASE_EPOCH_MS + (config.duration_days * 2 // 3) * DAY_MS,
    }
    return {
        "trajectories.csv": traj_out.getvalue(),
        "submissions.csv": sub_out.getvalue(),
        "questions.csv": q_out.getvalue(),
        "corpus_manifest.json": json.dumps(manifest, indent=2, sort_keys=True),
    }


def write_corpus(config: ScenarioConfig, out_dir) -> dict[str, str]:
    """Write the corpus files into ``out_dir``; returns path strings."""
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    payloads = generate_corpus(config)
    paths = {}
    for name, payload in payloads.items():
        path = out / name
        path.write_text(payload, encoding="utf-8")
        paths[name] = str(path)
    return paths
