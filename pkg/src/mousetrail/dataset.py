"""Dataset assembly, train/test splitting, and SMOTE balancing.

Two feature layouts share one record set:

* baseline: question, student, and recent statistics;
* proposed: baseline plus a 39-value block from the most similar
  previously-solved question - its 37 mouse features, its score class,
  and the similarity score.

A record whose student has no previously-solved question above the
similarity threshold is discarded from both layouts, so the two datasets
always cover identical keys.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from mousetrail import kernels
from mousetrail.interaction import FeatureVector, MOUSE_FEATURE_NAMES
from mousetrail.similarity import SimilarityMatrix, most_similar_solved
from mousetrail.statistics import FeatureSchema, QuestionStats, RecentStats, StudentStats
from mousetrail.trajectory import SubmissionRecord

BASELINE = "baseline"
PROPOSED = "proposed"
VARIANTS = (BASELINE, PROPOSED)

SIMILAR_BLOCK_NAMES = tuple(f"sim_q_{name}" for name in MOUSE_FEATURE_NAMES) + (
    "sim_q_score_class",
    "sim_q_similarity",
)

ExampleKey = tuple[str, str, int]


class MissingFeatureSource(KeyError):
    pass


class ClassWithSingleExample(UserWarning):
    pass


class DegenerateClass(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class LabeledExample:
    key: ExampleKey
    features: FeatureVector
    label: int
    variant: str

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LabeledExample):
            return NotImplemented
        return (self.key == other.key and self.label == other.label
                and self.variant == other.variant and self.features == other.features)


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple[LabeledExample, ...]
    test: tuple[LabeledExample, ...]
    seed: int

    def __post_init__(self) -> None:
        train_keys = {e.key for e in self.train}
        test_keys = {e.key for e in self.test}
        if train_keys & test_keys:
            raise ValueError("train and test share example keys")


@dataclass(frozen=True)
class FeatureStore:
    """Precomputed per-question/student/record feature sources."""

    schema: FeatureSchema
    question_stats: Mapping[str, QuestionStats]
    student_stats: Mapping[str, StudentStats]
    recent_stats: Mapping[ExampleKey, RecentStats]
    # (student, question) -> (submitted_at, 37 mouse features, score class)
    # for first submissions that have a matched trajectory
    mouse_features: Mapping[tuple[str, str], tuple[int, FeatureVector, int]]
    matrix: SimilarityMatrix


def assemble_examples(records: Sequence[SubmissionRecord], store: FeatureStore,
                      variant: str, threshold: float) -> list[LabeledExample]:
    """Build labeled examples for one layout.

    Records are first submissions to predict; the discard rule runs for
    both layouts identically so their key sets match.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    by_student: dict[str, list[tuple[str, int]]] = {}
    for (sid, qid), (t, _, _) in store.mouse_features.items():
        by_student.setdefault(sid, []).append((qid, t))

    examples: list[LabeledExample] = []
    for record in sorted(records, key=lambda r: (r.student_id, r.question_id, r.submitted_at)):
        key: ExampleKey = (record.student_id, record.question_id, record.submitted_at)
        qstats = store.question_stats.get(record.question_id)
        sstats = store.student_stats.get(record.student_id)
        rstats = store.recent_stats.get(key)
        if qstats is None or sstats is None or rstats is None:
            raise MissingFeatureSource(f"no feature source for {key}")

        if record.question_id not in store.matrix.question_ids:
            # no similarity row (question unseen before the experiment):
            # nothing can qualify, so the record falls to the discard rule
            continue
        solved_before = [qid for qid, t in by_student.get(record.student_id, ())
                         if t < record.submitted_at]
        hit = most_similar_solved(store.matrix, record.question_id, solved_before, threshold)
        if hit is None:
            continue

        vector = (qstats.feature_vector(store.schema)
                  .concat(sstats.feature_vector(store.schema))
                  .concat(rstats.feature_vector(store.schema)))
        if variant == PROPOSED:
            qy, sim = hit
            _, qy_features, qy_class = store.mouse_features[(record.student_id, qy)]
            block = FeatureVector(
                SIMILAR_BLOCK_NAMES,
                np.concatenate([qy_features.values, [float(qy_class), sim]]),
            )
            vector = vector.concat(block)
        examples.append(LabeledExample(key=key, features=vector,
                                       label=record.score_class, variant=variant))
    return examples


def split_train_test(examples: Sequence[LabeledExample], test_fraction: float,
                     seed: int) -> DatasetSplit:
    """Stratified-by-label random split, deterministic given the seed.

    Per-class test counts follow largest-remainder apportionment, so the
    total equals round(n * test_fraction) and every class is within one
    example of its proportional share.  A class with a single example
    forces a plain shuffled split (with a warning).
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction {test_fraction} outside (0, 1)")
    n = len(examples)
    n_test = int(round(n * test_fraction))
    rng = np.random.default_rng(seed)

    by_label: dict[int, list[int]] = {}
    for i, ex in enumerate(examples):
        by_label.setdefault(ex.label, []).append(i)

    if any(len(idxs) == 1 for idxs in by_label.values()):
        warnings.warn("a class has a single example; falling back to a "
                      "non-stratified split", ClassWithSingleExample)
        perm = rng.permutation(n)
        test_idx = set(perm[:n_test].tolist())
    else:
        labels = sorted(by_label)
        quotas = {}
        remainders = []
        allotted = 0
        for lab in labels:
            exact = len(by_label[lab]) * test_fraction
            quotas[lab] = int(np.floor(exact))
            allotted += quotas[lab]
            remainders.append((-(exact - np.floor(exact)), lab))
        remainders.sort()
        for _, lab in remainders[: n_test - allotted]:
            quotas[lab] += 1
        test_idx = set()
        for lab in labels:
            idxs = np.array(by_label[lab])
            perm = rng.permutation(len(idxs))
            test_idx.update(idxs[perm[: quotas[lab]]].tolist())

    train = tuple(ex for i, ex in enumerate(examples) if i not in test_idx)
    test = tuple(ex for i, ex in enumerate(examples) if i in test_idx)
    return DatasetSplit(train=train, test=test, seed=seed)


def smote_oversample(train: Sequence[LabeledExample], k: int = 5,
                     seed: int = 0) -> list[LabeledExample]:
    """Balance classes by interpolating between same-class neighbors.

    Each synthetic point is x_i + lam * (x_nn - x_i) with lam uniform in
    [0, 1] and x_nn one of x_i's k nearest same-class neighbors (Euclidean
    on min-max-scaled features, k clamped to class size - 1).  Originals
    are kept verbatim; synthesis continues until every class matches the
    majority count.  A single-example class is duplicated with a warning.
    """
    if not train:
        return []
    rng = np.random.default_rng(seed)
    by_label: dict[int, list[int]] = {}
    for i, ex in enumerate(train):
        by_label.setdefault(ex.label, []).append(i)
    majority = max(len(v) for v in by_label.values())
    out = list(train)
    if all(len(v) == majority for v in by_label.values()):
        return out

    x_all = np.stack([ex.features.values for ex in train])
    lo = x_all.min(axis=0)
    span = x_all.max(axis=0) - lo
    span[span == 0] = 1.0
    x_scaled = (x_all - lo) / span

    names = train[0].features.names
    variant = train[0].variant
    serial = 0
    for label in sorted(by_label):
        idxs = by_label[label]
        deficit = majority - len(idxs)
        if deficit == 0:
            continue
        if len(idxs) == 1:
            warnings.warn(f"class {label} has one example; duplicating it",
                          DegenerateClass)
            original = train[idxs[0]]
            for _ in range(deficit):
                out.append(LabeledExample(
                    key=("__smote__", f"class{label}", serial),
                    features=original.features, label=label, variant=variant))
                serial += 1
            continue

        k_eff = min(k, len(idxs) - 1)
        class_scaled = x_scaled[idxs]
        class_raw = x_all[idxs]
        dist = kernels.pairwise_sqdist(np.ascontiguousarray(class_scaled))
        np.fill_diagonal(dist, np.inf)
        neighbors = np.argsort(dist, axis=1, kind="stable")[:, :k_eff]

        for _ in range(deficit):
            i = int(rng.integers(len(idxs)))
            nn = int(neighbors[i, rng.integers(k_eff)])
            lam = float(rng.random())
            values = class_raw[i] + lam * (class_raw[nn] - class_raw[i])
            out.append(LabeledExample(
                key=("__smote__", f"class{label}", serial),
                features=FeatureVector(names, values), label=label, variant=variant))
            serial += 1
    return out
