import numpy as np
import pytest

from mousetrail.dataset import BASELINE, LabeledExample
from mousetrail.interaction import FeatureVector
from mousetrail.models import (GBDT_LEARNING_RATE_GRID, LR, RF, GBDT,
                               TREE_COUNT_GRID, TREE_DEPTH_GRID, EmptyGrid,
                               FeatureLengthMismatch, InconsistentFeatureLength,
                               ModelSpec, SingleClassTrainingSet,
                               UnsupportedModelKind, default_grids, default_spec,
                               gini_importance, grid_search, load_model, lr_gradient,
                               lr_loss, model_from_dict, model_to_dict,
                               predict_proba, save_model, train)


def separable_dataset(n_per_class=30, seed=0):
    """Two tight clusters per class on a 2-d grid; linearly separable."""
    rng = np.random.default_rng(seed)
    xs, ys = [], []
    centers = {0: [(0, 0), (0, 1)], 1: [(8, 0), (8, 1)],
               2: [(0, 8), (1, 8)], 3: [(8, 8), (9, 8)]}
    for label, pts in centers.items():
        for cx, cy in pts:
            pts_xy = rng.normal([cx, cy], 0.15, size=(n_per_class // 2, 2))
            xs.append(pts_xy)
            ys.extend([label] * (n_per_class // 2))
    return np.vstack(xs), np.array(ys, dtype=np.int64)


def as_examples(x, y):
    names = tuple(f"f{i}" for i in range(x.shape[1]))
    return [LabeledExample((f"s{i}", "q", i), FeatureVector(names, row), int(label),
                           BASELINE)
            for i, (row, label) in enumerate(zip(x, y))]


def flat_fd_gradient(w, b, x, y, l2, eps=1e-6):
    """Central finite differences on the flattened (w, b) parameters."""
    def loss_of(theta):
        w2 = theta[:w.size].reshape(w.shape)
        b2 = theta[w.size:]
        return lr_loss(w2, b2, x, y, l2)

    theta = np.concatenate([w.ravel(), b])
    grad = np.zeros_like(theta)
    for i in range(theta.size):
        up = theta.copy(); up[i] += eps
        dn = theta.copy(); dn[i] -= eps
        grad[i] = (loss_of(up) - loss_of(dn)) / (2 * eps)
    return grad[:w.size].reshape(w.shape), grad[w.size:]


def test_lr_gradient_matches_finite_differences():
    rng = np.random.default_rng(42)
    for trial in range(50):
        n = int(rng.integers(4, 12))
        d = int(rng.integers(1, 5))
        x = rng.normal(0, 1, (n, d))
        y = rng.integers(0, 4, n)
        if np.unique(y).size < 2:
            y[0] = (y[1] + 1) % 4
        w = rng.normal(0, 0.5, (d, 4))
        b = rng.normal(0, 0.5, 4)
        l2 = float(rng.choice([0.0, 1e-3, 1e-1]))
        gw, gb = lr_gradient(w, b, x, y, l2)
        fw, fb = flat_fd_gradient(w, b, x, y, l2)
        assert np.allclose(gw, fw, rtol=1e-5, atol=1e-7)
        assert np.allclose(gb, fb, rtol=1e-5, atol=1e-7)


def test_lr_loss_monotone_non_increasing():
    x, y = separable_dataset(seed=1)
    model = train(default_spec(LR), (x, y))
    losses = np.array(model.params.losses)
    assert np.all(np.diff(losses) <= 0)


def test_lr_duplicated_column_symmetric_weights():
    rng = np.random.default_rng(3)
    x = rng.normal(0, 1, (40, 3))
    x = np.hstack([x, x[:, [0]]])  # column 3 duplicates column 0
    y = rng.integers(0, 4, 40)
    model = train(ModelSpec(kind=LR, epochs=200), (x, y))
    w = model.params.weights
    assert np.allclose(w[0], w[3], atol=1e-12)


def test_lr_zero_weights_uniform():
    x, y = separable_dataset(seed=2)
    model = train(ModelSpec(kind=LR, epochs=1), (x, y))
    # zero the fitted weights: softmax must be uniform
    model.params.weights[:] = 0
    model.params.bias[:] = 0
    proba = predict_proba(model, x[0])
    assert np.allclose(proba, 0.25)


@pytest.mark.parametrize("kind,spec_kwargs", [
    (LR, {}),
    (RF, {"n_trees": 50}),
    (GBDT, {"n_trees": 50, "learning_rate": 0.1}),
])
def test_separable_training_accuracy_is_one(kind, spec_kwargs):
    x, y = separable_dataset()
    model = train(ModelSpec(kind=kind, **spec_kwargs), (x, y))
    pred = model.predict_class(x)
    assert np.mean(pred == y) == 1.0


@pytest.mark.parametrize("kind", [LR, RF, GBDT])
def test_same_seed_identical_predictions(kind):
    x, y = separable_dataset(seed=5)
    spec = ModelSpec(kind=kind, n_trees=20 if kind != LR else None, seed=11)
    m1 = train(spec, (x, y))
    m2 = train(spec, (x, y))
    assert np.array_equal(predict_proba(m1, x), predict_proba(m2, x))


def test_rf_different_seed_differs():
    x, y = separable_dataset(seed=5)
    m1 = train(ModelSpec(kind=RF, n_trees=10, seed=1), (x, y))
    m2 = train(ModelSpec(kind=RF, n_trees=10, seed=2), (x, y))
    assert not np.array_equal(predict_proba(m1, x), predict_proba(m2, x))


@pytest.mark.parametrize("kind", [LR, RF, GBDT])
def test_predict_proba_rows_sum_to_one(kind, rng):
    x, y = separable_dataset(seed=7)
    model = train(ModelSpec(kind=kind, n_trees=15 if kind != LR else None), (x, y))
    proba = predict_proba(model, rng.uniform(-2, 10, (50, 2)))
    assert np.all(proba >= 0)
    assert np.allclose(proba.sum(axis=1), 1.0, atol=1e-9)


def test_predicted_class_matches_cluster():
    x, y = separable_dataset(seed=8)
    model = train(ModelSpec(kind=RF, n_trees=30), (x, y))
    inner = np.array([[0.0, 0.5], [8.0, 0.5], [0.5, 8.0], [8.5, 8.0]])
    assert model.predict_class(inner).tolist() == [0, 1, 2, 3]


def test_argmax_tie_break_smallest_index():
    proba = np.array([[0.25, 0.25, 0.25, 0.25], [0.1, 0.4, 0.4, 0.1]])
    assert np.argmax(proba, axis=1).tolist() == [0, 1]


def test_feature_length_mismatch():
    x, y = separable_dataset(seed=9)
    model = train(ModelSpec(kind=LR, epochs=5), (x, y))
    with pytest.raises(FeatureLengthMismatch):
        predict_proba(model, np.zeros(5))


def test_single_class_raises():
    x = np.zeros((10, 2))
    y = np.ones(10, dtype=np.int64)
    with pytest.raises(SingleClassTrainingSet):
        train(default_spec(LR), (x, y))


def test_inconsistent_feature_length_raises():
    examples = as_examples(*separable_dataset(seed=4))
    examples.append(LabeledExample(("sx", "q", 999),
                                   FeatureVector(("a",), np.array([1.0])), 0,
                                   BASELINE))
    with pytest.raises(InconsistentFeatureLength):
        train(default_spec(LR), examples)


def test_gbdt_training_log_loss_non_increasing():
    x, y = separable_dataset(seed=10)
    model = train(ModelSpec(kind=GBDT, n_trees=40, learning_rate=0.05), (x, y))
    losses = np.array(model.params.train_losses)
    assert np.all(np.diff(losses) <= 1e-12)


def test_gbdt_default_spec_is_paper_bold_values():
    spec = default_spec(GBDT)
    assert spec.resolved("n_trees") == 250
    assert spec.resolved("max_depth") == 5
    assert spec.resolved("learning_rate") == pytest.approx(1e-3)


def test_tree_models_invariant_under_monotone_transform():
    x, y = separable_dataset(seed=12)
    x_test = np.random.default_rng(1).uniform(-1, 10, (40, 2))

    def transform(arr):
        out = arr.copy()
        out[:, 0] = np.exp(0.3 * out[:, 0])  # strictly monotone on feature 0
        return out

    for kind in (RF, GBDT):
        spec = ModelSpec(kind=kind, n_trees=12, learning_rate=0.1, seed=3)
        base = predict_proba(train(spec, (x, y)), x_test)
        moved = predict_proba(train(spec, (transform(x), y)), transform(x_test))
        assert np.allclose(base, moved, atol=1e-12)


def test_importance_stump_one_hot():
    # only feature 3 carries signal; depth-1 forest must put all mass there
    rng = np.random.default_rng(13)
    x = rng.uniform(0, 1, (200, 6))
    y = (x[:, 3] > 0.5).astype(np.int64)
    model = train(ModelSpec(kind=RF, n_trees=20, max_depth=1, feature_subsample=6),
                  (x, y))
    imp = gini_importance(model)
    assert imp[3] == pytest.approx(1.0)
    assert np.all(np.delete(imp, 3) == 0)


def test_importance_constant_feature_zero():
    rng = np.random.default_rng(14)
    x = rng.uniform(0, 1, (150, 4))
    x[:, 2] = 0.7
    y = (x[:, 0] + x[:, 1] > 1.0).astype(np.int64)
    for kind in (RF, GBDT):
        model = train(ModelSpec(kind=kind, n_trees=15, learning_rate=0.1), (x, y))
        assert gini_importance(model)[2] == 0.0


@pytest.mark.parametrize("kind", [RF, GBDT])
def test_importance_sums_to_one(kind):
    x, y = separable_dataset(seed=15)
    model = train(ModelSpec(kind=kind, n_trees=25, learning_rate=0.1), (x, y))
    assert gini_importance(model).sum() == pytest.approx(1.0, abs=1e-6)
    assert np.all(gini_importance(model) >= 0)


def test_importance_unsupported_for_lr():
    x, y = separable_dataset(seed=16)
    model = train(ModelSpec(kind=LR, epochs=5), (x, y))
    with pytest.raises(UnsupportedModelKind):
        gini_importance(model)


def test_grid_search_singleton():
    examples = as_examples(*separable_dataset(seed=17))
    best, table = grid_search(RF, {"n_trees": (12,)}, examples, seed=0)
    assert best.n_trees == 12
    assert len(table) == 1


def test_default_gbdt_grid_has_210_candidates():
    grids = default_grids(GBDT)
    assert grids["n_trees"] == TREE_COUNT_GRID == (50, 100, 150, 200, 250, 300, 350)
    assert grids["max_depth"] == TREE_DEPTH_GRID == (5, 10, 15, 20, 25)
    assert grids["learning_rate"] == GBDT_LEARNING_RATE_GRID
    size = 1
    for values in grids.values():
        size *= len(values)
    assert size == 7 * 5 * 6 == 210


def test_grid_search_tie_breaks_to_first_declared():
    # a separable set: every candidate reaches perfect validation accuracy
    examples = as_examples(*separable_dataset(seed=18))
    best, table = grid_search(RF, {"n_trees": (10, 20), "max_depth": (3, 5)},
                              examples, seed=1)
    scores = [acc for _, acc in table]
    assert best.n_trees == 10 and best.max_depth == 3
    assert scores[0] == max(scores)


def test_grid_search_empty_grid():
    examples = as_examples(*separable_dataset(seed=19))
    with pytest.raises(EmptyGrid):
        grid_search(RF, {}, examples)
    with pytest.raises(EmptyGrid):
        grid_search(RF, {"n_trees": ()}, examples)


@pytest.mark.parametrize("kind", [LR, RF, GBDT])
def test_serialization_round_trip(kind, tmp_path):
    x, y = separable_dataset(seed=20)
    model = train(ModelSpec(kind=kind, n_trees=8 if kind != LR else None,
                            learning_rate=0.1 if kind == GBDT else None,
                            seed=2), (x, y))
    path = tmp_path / "model.json"
    save_model(model, path)
    again = load_model(path)
    assert again.kind == model.kind
    assert again.feature_names == model.feature_names
    assert np.array_equal(predict_proba(again, x), predict_proba(model, x))
    # dict round trip is stable too
    assert model_to_dict(model_from_dict(model_to_dict(model))) == model_to_dict(model)


def test_spec_validation():
    with pytest.raises(ValueError):
        ModelSpec(kind="svm")
    with pytest.raises(ValueError):
        ModelSpec(kind=RF, n_trees=0)
    with pytest.raises(ValueError):
        ModelSpec(kind=GBDT, learning_rate=-0.1)
