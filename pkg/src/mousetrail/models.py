"""Multiclass classifiers: softmax regression, random forest, boosted trees.

All three train natively on numpy arrays and share the 4-class probability
contract (rows of ``predict_proba`` sum to 1; the predicted class is the
argmax with smallest-index tie-break).  Tree models expose normalized
impurity-decrease feature importances.  Everything is deterministic given
the spec's seed.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from mousetrail.interaction import FeatureVector
from mousetrail.trees import (DecisionTree, bin_features,
                              grow_classification_tree, grow_regression_tree)

N_CLASSES = 4

LR = "lr"
RF = "rf"
GBDT = "gbdt"
MODEL_KINDS = (LR, RF, GBDT)

# hyperparameter search spaces exercised in grid search
TREE_COUNT_GRID = (50, 100, 150, 200, 250, 300, 350)
TREE_DEPTH_GRID = (5, 10, 15, 20, 25)
GBDT_LEARNING_RATE_GRID = (1e-4, 1e-3, 1e-2, 5e-2, 0.1, 0.2)
# reference only: kernel SVMs are intentionally not implemented here
SVM_C_GRID = (0.1, 1.0, 5.0, 10.0)

_DEFAULTS: dict[str, dict[str, float | int]] = {
    LR: {"learning_rate": 0.1, "l2": 1e-3, "epochs": 500},
    RF: {"n_trees": 250, "max_depth": 5},
    GBDT: {"n_trees": 250, "max_depth": 5, "learning_rate": 1e-3},
}


class SingleClassTrainingSet(ValueError):
    pass


class InconsistentFeatureLength(ValueError):
    pass


class FeatureLengthMismatch(ValueError):
    pass


class UnsupportedModelKind(TypeError):
    pass


class EmptyGrid(ValueError):
    pass


@dataclass(frozen=True)
class ModelSpec:
    """Classifier kind plus hyperparameters; unset fields take kind defaults."""

    kind: str
    n_trees: int | None = None
    max_depth: int | None = None
    learning_rate: float | None = None
    l2: float | None = None
    epochs: int | None = None
    feature_subsample: int | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        for name in ("n_trees", "max_depth", "epochs", "feature_subsample"):
            value = getattr(self, name)
            if value is not None and value <= 0:
                raise ValueError(f"{name} must be positive, got {value}")
        for name in ("learning_rate", "l2"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise ValueError(f"{name} must be nonnegative, got {value}")

    def resolved(self, name: str):
        value = getattr(self, name)
        if value is not None:
            return value
        return _DEFAULTS[self.kind].get(name)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "n_trees": self.n_trees, "max_depth": self.max_depth,
            "learning_rate": self.learning_rate, "l2": self.l2, "epochs": self.epochs,
            "feature_subsample": self.feature_subsample, "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, payload: Mapping) -> "ModelSpec":
        return cls(**payload)


def default_spec(kind: str, seed: int = 0) -> ModelSpec:
    return ModelSpec(kind=kind, seed=seed)


def default_grids(kind: str) -> dict[str, tuple]:
    if kind == RF:
        return {"n_trees": TREE_COUNT_GRID, "max_depth": TREE_DEPTH_GRID}
    if kind == GBDT:
        return {"n_trees": TREE_COUNT_GRID, "max_depth": TREE_DEPTH_GRID,
                "learning_rate": GBDT_LEARNING_RATE_GRID}
    if kind == LR:
        return {"learning_rate": (0.01, 0.1), "l2": (1e-4, 1e-3, 1e-2)}
    raise ValueError(f"unknown model kind {kind!r}")


# --- softmax regression ----------------------------------------------------

def softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def lr_loss(w: np.ndarray, b: np.ndarray, x: np.ndarray, y: np.ndarray,
            l2: float) -> float:
    """Mean cross-entropy plus 0.5 * l2 * ||w||^2 (bias unregularized)."""
    p = softmax(x @ w + b)
    n = x.shape[0]
    nll = -float(np.mean(np.log(np.maximum(p[np.arange(n), y], 1e-300))))
    return nll + 0.5 * l2 * float(np.sum(w * w))


def lr_gradient(w: np.ndarray, b: np.ndarray, x: np.ndarray, y: np.ndarray,
                l2: float) -> tuple[np.ndarray, np.ndarray]:
    n = x.shape[0]
    p = softmax(x @ w + b)
    p[np.arange(n), y] -= 1.0
    gw = x.T @ p / n + l2 * w
    gb = p.mean(axis=0)
    return gw, gb


@dataclass(frozen=True, eq=False)
class _LrParams:
    mean: np.ndarray
    scale: np.ndarray
    weights: np.ndarray
    bias: np.ndarray
    losses: tuple[float, ...]


def _fit_lr(x: np.ndarray, y: np.ndarray, spec: ModelSpec) -> _LrParams:
    # z-score inputs so one step size suits features of any unit
    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    scale[scale == 0] = 1.0
    xs = (x - mean) / scale

    d = x.shape[1]
    w = np.zeros((d, N_CLASSES))
    b = np.zeros(N_CLASSES)
    l2 = float(spec.resolved("l2"))
    step = float(spec.resolved("learning_rate"))
    epochs = int(spec.resolved("epochs"))

    loss = lr_loss(w, b, xs, y, l2)
    losses = [loss]
    for _ in range(epochs):
        gw, gb = lr_gradient(w, b, xs, y, l2)
        while True:
            w2 = w - step * gw
            b2 = b - step * gb
            loss2 = lr_loss(w2, b2, xs, y, l2)
            if loss2 <= loss or step < 1e-18:
                break
            step *= 0.5
        if loss2 > loss:
            break
        w, b, loss = w2, b2, loss2
        losses.append(loss)
    return _LrParams(mean=mean, scale=scale, weights=w, bias=b, losses=tuple(losses))


# --- tree ensembles --------------------------------------------------------

@dataclass(frozen=True, eq=False)
class _ForestParams:
    trees: tuple[DecisionTree, ...]
    importance_raw: np.ndarray


@dataclass(frozen=True, eq=False)
class _BoostParams:
    trees: tuple[tuple[DecisionTree, ...], ...]  # [round][class]
    learning_rate: float
    importance_raw: np.ndarray
    train_losses: tuple[float, ...]


def _tree_rand_stream(seed_seq: np.random.SeedSequence, m: int, k: int) -> np.ndarray:
    rng = np.random.default_rng(seed_seq)
    return rng.integers(0, 2 ** 32, size=max(k * (m + 2), 1), dtype=np.uint32)


def _fit_rf(x: np.ndarray, y: np.ndarray, spec: ModelSpec, jobs: int = 1) -> _ForestParams:
    n, d = x.shape
    binned = bin_features(x)
    n_trees = int(spec.resolved("n_trees"))
    max_depth = int(spec.resolved("max_depth"))
    k = spec.feature_subsample or math.ceil(math.sqrt(d))

    root = np.random.SeedSequence(spec.seed)
    children = root.spawn(n_trees)

    def fit_one(t: int):
        rng = np.random.default_rng(children[t])
        sample_idx = rng.integers(0, n, size=n, dtype=np.int64)
        rand_u32 = _tree_rand_stream(children[t].spawn(1)[0], n, min(k, d))
        return grow_classification_tree(binned, y, sample_idx, N_CLASSES,
                                        max_depth, 1, min(k, d), rand_u32)

    # trees are seeded up front, so parallel order cannot change the forest
    results = _map_ordered(fit_one, range(n_trees), jobs)
    trees = tuple(tree for tree, _ in results)
    importance = np.zeros(d)
    for _, imp in results:
        importance += imp
    return _ForestParams(trees=trees, importance_raw=importance)


def _map_ordered(fn, items, jobs: int) -> list:
    if jobs <= 1:
        return [fn(item) for item in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _boost_log_loss(f: np.ndarray, y: np.ndarray) -> float:
    p = softmax(f)
    return -float(np.mean(np.log(np.maximum(p[np.arange(f.shape[0]), y], 1e-300))))


def _fit_gbdt(x: np.ndarray, y: np.ndarray, spec: ModelSpec, jobs: int = 1) -> _BoostParams:
    n, d = x.shape
    binned = bin_features(x)
    n_trees = int(spec.resolved("n_trees"))
    max_depth = int(spec.resolved("max_depth"))
    lr = float(spec.resolved("learning_rate"))
    k = spec.feature_subsample or d
    leaf_factor = (N_CLASSES - 1) / N_CLASSES
    onehot = np.eye(N_CLASSES)[y]
    all_idx = np.arange(n, dtype=np.int64)

    root = np.random.SeedSequence(spec.seed)
    f = np.zeros((n, N_CLASSES))
    rounds = []
    importance = np.zeros(d)
    losses = [_boost_log_loss(f, y)]
    for _ in range(n_trees):
        p = softmax(f)
        residual = onehot - p
        streams = []
        for c in range(N_CLASSES):
            if k < d:
                streams.append(_tree_rand_stream(root.spawn(1)[0], n, k))
            else:
                streams.append(np.zeros(1, dtype=np.uint32))

        def fit_class(c: int):
            g = residual[:, c]
            w = np.abs(g) * (1.0 - np.abs(g))
            return grow_regression_tree(binned, g, w, all_idx, max_depth,
                                        1, min(k, d), streams[c], leaf_factor)

        results = _map_ordered(fit_class, range(N_CLASSES), jobs)
        round_trees = tuple(tree for tree, _ in results)
        for c, (tree, imp) in enumerate(results):
            importance += imp
            f[:, c] += lr * tree.leaf_value[tree.apply(x)]
        rounds.append(round_trees)
        losses.append(_boost_log_loss(f, y))
    return _BoostParams(trees=tuple(rounds), learning_rate=lr,
                        importance_raw=importance, train_losses=tuple(losses))


# --- unified model ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TrainedModel:
    kind: str
    spec: ModelSpec
    n_features: int
    feature_names: tuple[str, ...]
    params: object
    n_classes: int = N_CLASSES
    importance: np.ndarray | None = field(default=None)

    def predict_proba(self, features) -> np.ndarray:
        return predict_proba(self, features)

    def predict_class(self, features) -> np.ndarray:
        """Argmax class per row; ties go to the smallest class index."""
        proba = np.atleast_2d(predict_proba(self, features))
        return np.argmax(proba, axis=1)


def train(spec: ModelSpec, train_examples: Sequence, jobs: int = 1) -> TrainedModel:
    """Fit one classifier on labeled examples (or an (X, y) pair)."""
    if (isinstance(train_examples, tuple) and len(train_examples) == 2
            and not hasattr(train_examples[0], "features")):
        x, y = train_examples
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        names = tuple(f"f{i}" for i in range(x.shape[1]))
    else:
        lengths = {len(ex.features) for ex in train_examples}
        if len(lengths) != 1:
            raise InconsistentFeatureLength(f"feature lengths {sorted(lengths)}")
        x = np.stack([ex.features.values for ex in train_examples])
        y = np.array([ex.label for ex in train_examples], dtype=np.int64)
        names = train_examples[0].features.names

    if np.unique(y).shape[0] < 2:
        raise SingleClassTrainingSet("training set has a single class")
    if np.any((y < 0) | (y >= N_CLASSES)):
        raise ValueError("labels outside the 4-class range")

    if spec.kind == LR:
        params = _fit_lr(x, y, spec)
        importance = None
    elif spec.kind == RF:
        params = _fit_rf(x, y, spec, jobs=jobs)
        importance = _normalize_importance(params.importance_raw)
    elif spec.kind == GBDT:
        params = _fit_gbdt(x, y, spec, jobs=jobs)
        importance = _normalize_importance(params.importance_raw)
    else:  # pragma: no cover - guarded by ModelSpec
        raise UnsupportedModelKind(spec.kind)

    return TrainedModel(kind=spec.kind, spec=spec, n_features=x.shape[1],
                        feature_names=names, params=params, importance=importance)


def _normalize_importance(raw: np.ndarray) -> np.ndarray:
    total = float(raw.sum())
    if total <= 0:
        return np.zeros_like(raw)
    return raw / total


def _as_matrix(model: TrainedModel, features) -> tuple[np.ndarray, bool]:
    if isinstance(features, FeatureVector):
        arr = features.values[None, :]
        single = True
    else:
        arr = np.asarray(features, dtype=np.float64)
        single = arr.ndim == 1
        arr = np.atleast_2d(arr)
    if arr.shape[1] != model.n_features:
        raise FeatureLengthMismatch(
            f"model expects {model.n_features} features, got {arr.shape[1]}")
    return arr, single


def predict_proba(model: TrainedModel, features) -> np.ndarray:
    """Class probabilities; rows sum to 1.  Accepts one vector or a matrix."""
    x, single = _as_matrix(model, features)
    if model.kind == LR:
        p = model.params
        xs = (x - p.mean) / p.scale
        proba = softmax(xs @ p.weights + p.bias)
    elif model.kind == RF:
        acc = np.zeros((x.shape[0], model.n_classes))
        for tree in model.params.trees:
            acc += tree.predict(x)
        proba = acc / len(model.params.trees)
    elif model.kind == GBDT:
        f = np.zeros((x.shape[0], model.n_classes))
        lr = model.params.learning_rate
        for round_trees in model.params.trees:
            for c, tree in enumerate(round_trees):
                f[:, c] += lr * tree.predict(x)
        proba = softmax(f)
    else:  # pragma: no cover
        raise UnsupportedModelKind(model.kind)
    return proba[0] if single else proba


def gini_importance(model: TrainedModel) -> np.ndarray:
    """Normalized per-feature sum of impurity decreases across all trees."""
    if model.kind not in (RF, GBDT):
        raise UnsupportedModelKind(f"{model.kind} has no impurity importances")
    return _normalize_importance(model.params.importance_raw)


def grid_search(kind: str, grids: Mapping[str, Sequence], train_examples: Sequence,
                validation_fraction: float = 0.2, seed: int = 0,
                ) -> tuple[ModelSpec, list[tuple[ModelSpec, float]]]:
    """Exhaustive search over the grid's Cartesian product.

    Candidates are scored by accuracy on a validation carve-out of the
    training examples; ties keep the earliest candidate in declared grid
    order.
    """
    from mousetrail.dataset import split_train_test

    if not grids or any(len(v) == 0 for v in grids.values()):
        raise EmptyGrid(f"empty hyperparameter grid for {kind}")
    names = list(grids)
    combos = list(itertools.product(*(grids[name] for name in names)))

    carve = split_train_test(list(train_examples), validation_fraction, seed)
    fit_set, val_set = carve.train, carve.test
    val_y = np.array([ex.label for ex in val_set], dtype=np.int64)

    table: list[tuple[ModelSpec, float]] = []
    best: tuple[ModelSpec, float] | None = None
    for combo in combos:
        spec = ModelSpec(kind=kind, seed=seed, **dict(zip(names, combo)))
        model = train(spec, fit_set)
        pred = model.predict_class(np.stack([ex.features.values for ex in val_set]))
        accuracy = float(np.mean(pred == val_y))
        table.append((spec, accuracy))
        if best is None or accuracy > best[1]:
            best = (spec, accuracy)
    return best[0], table


# --- serialization ----------------------------------------------------------

MODEL_FORMAT_VERSION = 1


def model_to_dict(model: TrainedModel) -> dict:
    payload: dict = {
        "format_version": MODEL_FORMAT_VERSION,
        "kind": model.kind,
        "spec": model.spec.to_dict(),
        "n_features": model.n_features,
        "n_classes": model.n_classes,
        "feature_names": list(model.feature_names),
        "importance": None if model.importance is None else model.importance.tolist(),
    }
    p = model.params
    if model.kind == LR:
        payload["lr"] = {
            "mean": p.mean.tolist(), "scale": p.scale.tolist(),
            "weights": p.weights.tolist(), "bias": p.bias.tolist(),
            "losses": list(p.losses),
        }
    elif model.kind == RF:
        payload["forest"] = {
            "trees": [t.to_dict() for t in p.trees],
            "importance_raw": p.importance_raw.tolist(),
        }
    else:
        payload["boost"] = {
            "learning_rate": p.learning_rate,
            "trees": [[t.to_dict() for t in round_trees] for round_trees in p.trees],
            "importance_raw": p.importance_raw.tolist(),
            "train_losses": list(p.train_losses),
        }
    return payload


def model_from_dict(payload: Mapping) -> TrainedModel:
    if payload.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format {payload.get('format_version')}")
    kind = payload["kind"]
    spec = ModelSpec.from_dict(payload["spec"])
    importance = payload.get("importance")
    if kind == LR:
        blob = payload["lr"]
        params: object = _LrParams(
            mean=np.array(blob["mean"]), scale=np.array(blob["scale"]),
            weights=np.array(blob["weights"]), bias=np.array(blob["bias"]),
            losses=tuple(blob["losses"]),
        )
    elif kind == RF:
        blob = payload["forest"]
        params = _ForestParams(
            trees=tuple(DecisionTree.from_dict(t) for t in blob["trees"]),
            importance_raw=np.array(blob["importance_raw"]),
        )
    elif kind == GBDT:
        blob = payload["boost"]
        params = _BoostParams(
            trees=tuple(tuple(DecisionTree.from_dict(t) for t in row)
                        for row in blob["trees"]),
            learning_rate=blob["learning_rate"],
            importance_raw=np.array(blob["importance_raw"]),
            train_losses=tuple(blob["train_losses"]),
        )
    else:
        raise UnsupportedModelKind(kind)
    return TrainedModel(
        kind=kind, spec=spec, n_features=payload["n_features"],
        feature_names=tuple(payload["feature_names"]), params=params,
        n_classes=payload["n_classes"],
        importance=None if importance is None else np.array(importance),
    )


def save_model(model: TrainedModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh)


def load_model(path) -> TrainedModel:
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
