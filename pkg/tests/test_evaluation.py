import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mousetrail.evaluation import (FPR_GRID, ConfusionMatrix, DegenerateClass,
                                   EmptyMatrix, GridMismatch, RocCurve, RunMetrics,
                                   abroca, accuracy_weighted_f1, aggregate_runs,
                                   binary_roc, compare_variants, roc_auc_ovr,
                                   roc_band_rows)


def cm_of(counts) -> ConfusionMatrix:
    return ConfusionMatrix(counts=np.array(counts, dtype=np.int64))


def pad4(counts2x2):
    out = np.zeros((4, 4), dtype=np.int64)
    out[:2, :2] = counts2x2
    return ConfusionMatrix(counts=out)


def mann_whitney_auc(pos_scores, neg_scores) -> float:
    wins = 0.0
    for p in pos_scores:
        for n in neg_scores:
            if p > n:
                wins += 1.0
            elif p == n:
                wins += 0.5
    return wins / (len(pos_scores) * len(neg_scores))


def test_perfect_diagonal():
    cm = cm_of(np.diag([5, 5, 5, 5]))
    assert accuracy_weighted_f1(cm) == (1.0, 1.0)


def test_hand_computed_two_class_fixture():
    cm = pad4([[2, 0], [1, 1]])
    accuracy, weighted = accuracy_weighted_f1(cm)
    assert accuracy == pytest.approx(0.75)
    # F1_0 = 0.8, F1_1 = 2/3, supports (2,2)
    assert weighted == pytest.approx(0.73333, abs=1e-4)


def test_constant_predictor_uniform_truth():
    counts = np.zeros((4, 4), dtype=np.int64)
    counts[:, 0] = 5  # everything predicted class 0
    accuracy, weighted = accuracy_weighted_f1(ConfusionMatrix(counts=counts))
    assert accuracy == pytest.approx(0.25)
    assert weighted < accuracy  # only class 0 earns any F1


def test_empty_matrix():
    with pytest.raises(EmptyMatrix):
        accuracy_weighted_f1(cm_of(np.zeros((4, 4))))


def test_row_sums_equal_supports(rng):
    y_true = rng.integers(0, 4, 100).tolist()
    y_pred = rng.integers(0, 4, 100).tolist()
    cm = ConfusionMatrix.from_predictions(y_true, y_pred)
    assert cm.counts.sum(axis=1).tolist() == np.bincount(y_true, minlength=4).tolist()
    assert cm.total == 100


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)),
                min_size=1, max_size=40))
def test_weighted_f1_bounds_and_diagonal_iff_one(pairs):
    y_true = [t for t, _ in pairs]
    y_pred = [p for _, p in pairs]
    cm = ConfusionMatrix.from_predictions(y_true, y_pred)
    _, weighted = accuracy_weighted_f1(cm)
    assert 0.0 <= weighted <= 1.0 + 1e-12
    off_diagonal = cm.counts.sum() - np.trace(cm.counts)
    if off_diagonal == 0:
        assert weighted == pytest.approx(1.0)
    else:
        assert weighted < 1.0


def test_binary_auc_hand_fixture():
    scores = np.array([0.9, 0.4, 0.6, 0.1])
    positives = np.array([True, True, False, False])
    curve = binary_roc(scores, positives)
    assert curve.auc() == pytest.approx(0.75)  # 3 of 4 concordant pairs


def test_perfect_separation_auc_one():
    scores = np.array([0.9, 0.8, 0.2, 0.1])
    positives = np.array([True, True, False, False])
    assert binary_roc(scores, positives).auc() == pytest.approx(1.0)


def test_identical_scores_auc_half():
    scores = np.full(10, 0.5)
    positives = np.array([True] * 5 + [False] * 5)
    assert binary_roc(scores, positives).auc() == pytest.approx(0.5)


@settings(max_examples=80, deadline=None)
@given(st.lists(st.tuples(st.booleans(),
                          st.sampled_from([0.0, 0.1, 0.25, 0.5, 0.75, 1.0])),
                min_size=2, max_size=20))
def test_auc_equals_mann_whitney_exactly(items):
    positives = np.array([p for p, _ in items])
    scores = np.array([s for _, s in items])
    if positives.all() or not positives.any():
        return
    curve = binary_roc(scores, positives)
    want = mann_whitney_auc(scores[positives], scores[~positives])
    assert curve.auc() == pytest.approx(want, abs=1e-12)


def test_roc_auc_ovr_macro_and_curves(rng):
    n = 200
    labels = rng.integers(0, 4, n)
    scores = rng.dirichlet(np.ones(4), size=n)
    curves, macro_curve, macro_auc = roc_auc_ovr(scores, labels)
    assert set(curves) == {0, 1, 2, 3}
    per_class = [curves[c].auc() for c in range(4)]
    assert macro_auc == pytest.approx(np.mean(per_class))
    assert macro_curve.fpr.shape == (101,)
    assert macro_curve.tpr[0] >= 0 and macro_curve.tpr[-1] == pytest.approx(1.0)


def test_roc_auc_ovr_skips_degenerate_class():
    labels = np.array([0, 0, 1, 1, 2, 2])  # class 3 absent
    scores = np.random.default_rng(0).dirichlet(np.ones(4), size=6)
    with pytest.warns(DegenerateClass):
        curves, _, _ = roc_auc_ovr(scores, labels)
    assert 3 not in curves


def test_perfect_classifier_macro_auc_one():
    labels = np.array([0, 1, 2, 3] * 5)
    scores = np.eye(4)[labels] * 0.9 + 0.025
    _, macro_curve, macro_auc = roc_auc_ovr(scores, labels)
    assert macro_auc == pytest.approx(1.0)
    assert abroca(macro_curve, macro_curve) == (0.0, 0.0)


def test_uniform_scores_macro_auc_half():
    labels = np.array([0, 1, 2, 3] * 5)
    scores = np.full((20, 4), 0.25)
    _, _, macro_auc = roc_auc_ovr(scores, labels)
    assert macro_auc == pytest.approx(0.5)


def test_abroca_identical_curves_zero():
    curve = RocCurve(fpr=FPR_GRID.copy(), tpr=FPR_GRID.copy())
    assert abroca(curve, curve) == (0.0, 0.0)


def test_abroca_signed_equals_auc_difference(rng):
    def random_grid_curve():
        tpr = np.sort(rng.uniform(0, 1, 101))
        tpr[0], tpr[-1] = 0.0, 1.0
        return RocCurve(fpr=FPR_GRID.copy(), tpr=tpr)

    for _ in range(20):
        a, b = random_grid_curve(), random_grid_curve()
        signed, absolute = abroca(a, b)
        assert signed == pytest.approx(a.auc() - b.auc(), abs=1e-9)
        assert absolute >= abs(signed) - 1e-12


def test_abroca_grid_mismatch():
    a = RocCurve(fpr=FPR_GRID.copy(), tpr=FPR_GRID.copy())
    b = RocCurve(fpr=np.linspace(0, 1, 51), tpr=np.linspace(0, 1, 51))
    with pytest.raises(GridMismatch):
        abroca(a, b)


def test_curve_validation():
    with pytest.raises(ValueError):
        RocCurve(fpr=np.array([0.0, 1.0]), tpr=np.array([0.5, 0.4]))
    with pytest.raises(ValueError):
        RocCurve(fpr=np.array([0.1, 1.0]), tpr=np.array([0.0, 1.0]))


def _metrics(accuracy, rng):
    labels = rng.integers(0, 4, 40)
    scores = rng.dirichlet(np.ones(4), 40)
    _, curve, auc = roc_auc_ovr(scores, labels)
    cm = ConfusionMatrix.from_predictions(labels.tolist(),
                                          rng.integers(0, 4, 40).tolist())
    return RunMetrics(accuracy=accuracy, weighted_f1=accuracy, macro_auc=auc,
                      macro_curve=curve, confusion=cm)


def test_single_run_std_zero(rng):
    report = aggregate_runs([_metrics(0.7, rng)])
    assert report.accuracy_std == 0.0
    assert report.macro_auc_std == 0.0
    assert np.all(report.tpr_std == 0.0)


def test_aggregate_population_std(rng):
    report = aggregate_runs([_metrics(0.6, rng), _metrics(1.0, rng)])
    assert report.accuracy_mean == pytest.approx(0.8)
    assert report.accuracy_std == pytest.approx(0.2)  # population, not sample


def test_compare_variants_signed_matches_mean_curves(rng):
    a = aggregate_runs([_metrics(0.7, rng), _metrics(0.8, rng)])
    b = aggregate_runs([_metrics(0.5, rng), _metrics(0.6, rng)])
    signed, absolute = compare_variants(a, b)
    assert signed == pytest.approx(a.mean_curve.auc() - b.mean_curve.auc(), abs=1e-12)
    assert absolute >= abs(signed) - 1e-12


def test_roc_band_rows_shape(rng):
    report = aggregate_runs([_metrics(0.7, rng), _metrics(0.9, rng)])
    rows = roc_band_rows(report)
    assert len(rows) == 101
    fpr, mean, plus, minus = rows[50]
    assert plus >= mean >= minus
    assert fpr == pytest.approx(0.5)


def test_row_normalized_heatmap():
    cm = cm_of([[8, 2, 0, 0], [0, 5, 5, 0], [0, 0, 0, 0], [1, 1, 1, 1]])
    heat = cm.row_normalized()
    assert heat[0].tolist() == pytest.approx([0.8, 0.2, 0.0, 0.0])
    assert heat[2].tolist() == [0, 0, 0, 0]
    assert heat[3].sum() == pytest.approx(1.0)
