"""Pure-numpy kernel implementations.

Reference semantics for every hot kernel; the numba backend in
``_numba.py`` mirrors these exactly.  Discrete decisions (tree splits,
feature subsets) are bit-identical across backends because both consume
the same pre-drawn random streams and accumulate per-bin statistics in
the same sample order.
"""

from __future__ import annotations

import numpy as np

LEAF = -1


def rolling_drag_counts(kinds: np.ndarray, window: int, drag_code: int) -> np.ndarray:
    """Count drag events in each length-``window`` slice of ``kinds``.

    Returns an int64 array of length ``n - window + 1``; entry ``i`` covers
    events ``i .. i+window-1``.
    """
    is_drag = (kinds == drag_code).astype(np.int64)
    csum = np.concatenate(([0], np.cumsum(is_drag)))
    return csum[window:] - csum[:-window]


def pairwise_mean_cosine(unit_feat: np.ndarray, has_vec: np.ndarray) -> np.ndarray:
    """Mean cosine over shared owners for every column pair.

    unit_feat: (owners, items, dims) rows already scaled and L2-normalized
    (all-zero rows stay zero and contribute cosine 0).  has_vec marks which
    (owner, item) rows exist.  Pairs with no shared owner get -1; the
    diagonal is 1.
    """
    n_items = unit_feat.shape[1]
    sim = np.full((n_items, n_items), -1.0)
    np.fill_diagonal(sim, 1.0)
    for x in range(n_items):
        for y in range(x + 1, n_items):
            shared = has_vec[:, x] & has_vec[:, y]
            count = int(shared.sum())
            if count == 0:
                continue
            dots = np.einsum("sd,sd->s", unit_feat[shared, x, :], unit_feat[shared, y, :])
            value = float(dots.sum()) / count
            sim[x, y] = value
            sim[y, x] = value
    return sim


def pairwise_sqdist(points: np.ndarray) -> np.ndarray:
    """Dense squared Euclidean distance matrix."""
    diff = points[:, None, :] - points[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _draw_feature_subset(n_features: int, k: int, rand_u32: np.ndarray, cursor: int) -> tuple[np.ndarray, int]:
    """Partial Fisher-Yates draw of k distinct features from the stream."""
    perm = np.arange(n_features, dtype=np.int64)
    for i in range(k):
        j = i + int(rand_u32[cursor % rand_u32.shape[0]]) % (n_features - i)
        cursor += 1
        perm[i], perm[j] = perm[j], perm[i]
    return perm[:k], cursor


def grow_tree_gini(
    codes_t: np.ndarray,
    bins_per_feature: np.ndarray,
    y: np.ndarray,
    sample_idx: np.ndarray,
    n_classes: int,
    max_depth: int,
    min_leaf: int,
    k_features: int,
    rand_u32: np.ndarray,
):
    """Grow one CART classification tree on pre-binned features.

    codes_t: (features, samples) uint8 bin codes; split "code <= b" maps to
    "value <= threshold[b]".  Returns flat node arrays plus the per-feature
    sum of weighted Gini impurity decreases.
    """
    n_features = codes_t.shape[0]
    m = sample_idx.shape[0]
    max_nodes = 2 * m + 1

    feature = np.full(max_nodes, LEAF, dtype=np.int64)
    thr_bin = np.full(max_nodes, LEAF, dtype=np.int64)
    left = np.full(max_nodes, LEAF, dtype=np.int64)
    right = np.full(max_nodes, LEAF, dtype=np.int64)
    leaf_val = np.zeros((max_nodes, n_classes))
    n_node = np.zeros(max_nodes, dtype=np.int64)
    importance = np.zeros(n_features)

    order = sample_idx.astype(np.int64).copy()
    cursor = 0
    n_nodes = 1
    stack = [(0, 0, m, 0)]
    while stack:
        node, start, end, depth = stack.pop()
        idx = order[start:end]
        n = end - start
        counts = np.bincount(y[idx], minlength=n_classes).astype(np.float64)
        n_node[node] = n
        leaf_val[node] = counts / n
        parent_score = float(np.sum(counts * counts)) / n

        if depth >= max_depth or n < 2 * min_leaf or np.max(counts) == n:
            continue

        if k_features >= n_features:
            feats = np.arange(n_features, dtype=np.int64)
        else:
            feats, cursor = _draw_feature_subset(n_features, k_features, rand_u32, cursor)

        best_gain = 0.0
        best_feat = LEAF
        best_bin = LEAF
        y_node = y[idx]
        for f in feats:
            n_bins = int(bins_per_feature[f])
            if n_bins < 2:
                continue
            codes_node = codes_t[f, idx]
            hist = np.bincount(
                codes_node.astype(np.int64) * n_classes + y_node,
                minlength=n_bins * n_classes,
            ).reshape(n_bins, n_classes)
            cum = np.cumsum(hist, axis=0).astype(np.float64)
            n_left = cum.sum(axis=1)
            for b in range(n_bins - 1):
                nl = n_left[b]
                nr = n - nl
                if nl < min_leaf or nr < min_leaf:
                    continue
                cl = cum[b]
                cr = counts - cl
                score = float(np.sum(cl * cl)) / nl + float(np.sum(cr * cr)) / nr
                gain = score - parent_score
                if gain > best_gain:
                    best_gain = gain
                    best_feat = int(f)
                    best_bin = b

        if best_feat == LEAF:
            continue

        importance[best_feat] += best_gain
        go_left = codes_t[best_feat, idx] <= best_bin
        order[start:end] = np.concatenate((idx[go_left], idx[~go_left]))
        n_go_left = int(go_left.sum())

        feature[node] = best_feat
        thr_bin[node] = best_bin
        left[node] = n_nodes
        right[node] = n_nodes + 1
        stack.append((n_nodes + 1, start + n_go_left, end, depth + 1))
        stack.append((n_nodes, start, start + n_go_left, depth + 1))
        n_nodes += 2

    return (
        feature[:n_nodes],
        thr_bin[:n_nodes],
        left[:n_nodes],
        right[:n_nodes],
        leaf_val[:n_nodes],
        n_node[:n_nodes],
        importance,
    )


def grow_tree_mse(
    codes_t: np.ndarray,
    bins_per_feature: np.ndarray,
    grad: np.ndarray,
    denom_weight: np.ndarray,
    sample_idx: np.ndarray,
    max_depth: int,
    min_leaf: int,
    k_features: int,
    rand_u32: np.ndarray,
    leaf_factor: float,
    denom_floor: float,
):
    """Grow one regression tree on pre-binned features.

    Splits maximize the squared-error reduction of ``grad``; leaf values are
    ``leaf_factor * sum(grad) / max(sum(denom_weight), denom_floor)``.
    """
    n_features = codes_t.shape[0]
    m = sample_idx.shape[0]
    max_nodes = 2 * m + 1

    feature = np.full(max_nodes, LEAF, dtype=np.int64)
    thr_bin = np.full(max_nodes, LEAF, dtype=np.int64)
    left = np.full(max_nodes, LEAF, dtype=np.int64)
    right = np.full(max_nodes, LEAF, dtype=np.int64)
    leaf_val = np.zeros(max_nodes)
    n_node = np.zeros(max_nodes, dtype=np.int64)
    importance = np.zeros(n_features)

    order = sample_idx.astype(np.int64).copy()
    cursor = 0
    n_nodes = 1
    stack = [(0, 0, m, 0)]
    while stack:
        node, start, end, depth = stack.pop()
        idx = order[start:end]
        n = end - start
        g_node = grad[idx]
        # cumsum, not sum: sequential accumulation matches the numba loop bit-for-bit
        g_total = float(np.cumsum(g_node)[-1])
        w_total = float(np.cumsum(denom_weight[idx])[-1])
        n_node[node] = n
        leaf_val[node] = leaf_factor * g_total / max(w_total, denom_floor)
        parent_score = g_total * g_total / n

        if depth >= max_depth or n < 2 * min_leaf:
            continue

        if k_features >= n_features:
            feats = np.arange(n_features, dtype=np.int64)
        else:
            feats, cursor = _draw_feature_subset(n_features, k_features, rand_u32, cursor)

        best_gain = 0.0
        best_feat = LEAF
        best_bin = LEAF
        for f in feats:
            n_bins = int(bins_per_feature[f])
            if n_bins < 2:
                continue
            codes_node = codes_t[f, idx].astype(np.int64)
            cnt = np.bincount(codes_node, minlength=n_bins)
            gsum = np.bincount(codes_node, weights=g_node, minlength=n_bins)
            cnt_cum = np.cumsum(cnt)
            g_cum = np.cumsum(gsum)
            for b in range(n_bins - 1):
                nl = int(cnt_cum[b])
                nr = n - nl
                if nl < min_leaf or nr < min_leaf:
                    continue
                gl = g_cum[b]
                gr = g_total - gl
                gain = gl * gl / nl + gr * gr / nr - parent_score
                if gain > best_gain:
                    best_gain = gain
                    best_feat = int(f)
                    best_bin = b

        if best_feat == LEAF:
            continue

        importance[best_feat] += best_gain
        go_left = codes_t[best_feat, idx] <= best_bin
        order[start:end] = np.concatenate((idx[go_left], idx[~go_left]))
        n_go_left = int(go_left.sum())

        feature[node] = best_feat
        thr_bin[node] = best_bin
        left[node] = n_nodes
        right[node] = n_nodes + 1
        stack.append((n_nodes + 1, start + n_go_left, end, depth + 1))
        stack.append((n_nodes, start, start + n_go_left, depth + 1))
        n_nodes += 2

    return (
        feature[:n_nodes],
        thr_bin[:n_nodes],
        left[:n_nodes],
        right[:n_nodes],
        leaf_val[:n_nodes],
        n_node[:n_nodes],
        importance,
    )


def tree_apply(
    x: np.ndarray,
    feature: np.ndarray,
    threshold: np.ndarray,
    left: np.ndarray,
    right: np.ndarray,
) -> np.ndarray:
    """Route each row of ``x`` to its leaf; returns leaf node ids."""
    n = x.shape[0]
    node = np.zeros(n, dtype=np.int64)
    rows = np.arange(n)
    while True:
        f = feature[node]
        active = f >= 0
        if not np.any(active):
            return node
        act_rows = rows[active]
        act_nodes = node[active]
        goes_left = x[act_rows, f[active]] <= threshold[act_nodes]
        node[active] = np.where(goes_left, left[act_nodes], right[act_nodes])
