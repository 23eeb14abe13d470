"""Histogram-based CART trees backing the forest and boosting models.

Features are pre-binned once per fit: up to ``max_bins`` cut values per
feature, chosen at rank positions of the observed values.  Rank-based bins
make tree structure invariant under strictly monotone feature transforms.
Split search runs in the selected kernel backend; this module handles
binning, bin-to-value threshold mapping, and tree storage.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mousetrail import kernels

MAX_BINS = 64


@dataclass(frozen=True, eq=False)
class BinnedFeatures:
    """Bin codes (features x samples) plus per-feature cut values."""

    codes_t: np.ndarray
    thresholds: tuple[np.ndarray, ...]
    bins_per_feature: np.ndarray

    @property
    def n_samples(self) -> int:
        return int(self.codes_t.shape[1])

    @property
    def n_features(self) -> int:
        return int(self.codes_t.shape[0])


def bin_features(x: np.ndarray, max_bins: int = MAX_BINS) -> BinnedFeatures:
    """Assign every value a bin code; split "code <= b" means "value <= thr[b]"."""
    n, d = x.shape
    codes_t = np.zeros((d, n), dtype=np.uint8)
    thresholds: list[np.ndarray] = []
    bins = np.zeros(d, dtype=np.int64)
    for j in range(d):
        col = x[:, j]
        uniq, counts = np.unique(col, return_counts=True)
        if uniq.shape[0] <= 1:
            thresholds.append(np.empty(0))
            bins[j] = 1
            continue
        if uniq.shape[0] <= max_bins:
            thr = uniq[:-1]
        else:
            cum = np.cumsum(counts)
            targets = n * np.arange(1, max_bins) / max_bins
            pos = np.searchsorted(cum, targets, side="left")
            pos = np.minimum(pos, uniq.shape[0] - 2)
            thr = np.unique(uniq[pos])
        codes_t[j] = np.searchsorted(thr, col, side="left").astype(np.uint8)
        thresholds.append(thr)
        bins[j] = thr.shape[0] + 1
    return BinnedFeatures(codes_t=codes_t, thresholds=tuple(thresholds),
                          bins_per_feature=bins)


@dataclass(frozen=True, eq=False)
class DecisionTree:
    """Flat-array CART tree; leaves carry class probabilities or one value."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_value: np.ndarray
    n_node: np.ndarray

    def apply(self, x: np.ndarray) -> np.ndarray:
        return kernels.tree_apply(np.ascontiguousarray(x, dtype=np.float64),
                                  self.feature, self.threshold, self.left, self.right)

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.leaf_value[self.apply(x)]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "leaf_value": self.leaf_value.tolist(),
            "n_node": self.n_node.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "DecisionTree":
        return cls(
            feature=np.array(payload["feature"], dtype=np.int64),
            threshold=np.array(payload["threshold"], dtype=np.float64),
            left=np.array(payload["left"], dtype=np.int64),
            right=np.array(payload["right"], dtype=np.int64),
            leaf_value=np.array(payload["leaf_value"], dtype=np.float64),
            n_node=np.array(payload["n_node"], dtype=np.int64),
        )


def _bin_to_value_thresholds(feature: np.ndarray, thr_bin: np.ndarray,
                             binned: BinnedFeatures) -> np.ndarray:
    threshold = np.zeros(feature.shape[0])
    for i in range(feature.shape[0]):
        if feature[i] >= 0:
            threshold[i] = binned.thresholds[feature[i]][thr_bin[i]]
    return threshold


def grow_classification_tree(binned: BinnedFeatures, y: np.ndarray,
                             sample_idx: np.ndarray, n_classes: int,
                             max_depth: int, min_leaf: int, k_features: int,
                             rand_u32: np.ndarray) -> tuple[DecisionTree, np.ndarray]:
    feature, thr_bin, left, right, leaf_val, n_node, importance = kernels.grow_tree_gini(
        binned.codes_t, binned.bins_per_feature, y.astype(np.int64),
        sample_idx.astype(np.int64), n_classes, max_depth, min_leaf,
        k_features, rand_u32,
    )
    threshold = _bin_to_value_thresholds(feature, thr_bin, binned)
    tree = DecisionTree(feature=feature, threshold=threshold, left=left,
                        right=right, leaf_value=leaf_val, n_node=n_node)
    return tree, importance


def grow_regression_tree(binned: BinnedFeatures, grad: np.ndarray,
                         denom_weight: np.ndarray, sample_idx: np.ndarray,
                         max_depth: int, min_leaf: int, k_features: int,
                         rand_u32: np.ndarray, leaf_factor: float,
                         denom_floor: float = 1e-10) -> tuple[DecisionTree, np.ndarray]:
    feature, thr_bin, left, right, leaf_val, n_node, importance = kernels.grow_tree_mse(
        binned.codes_t, binned.bins_per_feature,
        np.ascontiguousarray(grad, dtype=np.float64),
        np.ascontiguousarray(denom_weight, dtype=np.float64),
        sample_idx.astype(np.int64), max_depth, min_leaf, k_features,
        rand_u32, leaf_factor, denom_floor,
    )
    threshold = _bin_to_value_thresholds(feature, thr_bin, binned)
    tree = DecisionTree(feature=feature, threshold=threshold, left=left,
                        right=right, leaf_value=leaf_val, n_node=n_node)
    return tree, importance
