"""Numba kernel implementations.

Loop-level mirrors of the numpy reference versions in ``_numpy.py``.
Per-bin statistics are accumulated in ascending sample order for every
feature, matching numpy's sequential ``bincount`` semantics, so the two
backends grow identical trees.
"""

from __future__ import annotations

import numpy as np
from numba import njit

LEAF = -1


@njit(cache=True, nogil=True)
def rolling_drag_counts(kinds, window, drag_code):
    n = kinds.shape[0]
    out = np.empty(n - window + 1, dtype=np.int64)
    count = 0
    for i in range(window):
        if kinds[i] == drag_code:
            count += 1
    out[0] = count
    for start in range(1, n - window + 1):
        if kinds[start - 1] == drag_code:
            count -= 1
        if kinds[start + window - 1] == drag_code:
            count += 1
        out[start] = count
    return out


@njit(cache=True, nogil=True)
def pairwise_mean_cosine(unit_feat, has_vec):
    n_owners, n_items, n_dims = unit_feat.shape
    sim = np.full((n_items, n_items), -1.0)
    for i in range(n_items):
        sim[i, i] = 1.0
    for x in range(n_items):
        for y in range(x + 1, n_items):
            total = 0.0
            count = 0
            for s in range(n_owners):
                if has_vec[s, x] and has_vec[s, y]:
                    dot = 0.0
                    for d in range(n_dims):
                        dot += unit_feat[s, x, d] * unit_feat[s, y, d]
                    total += dot
                    count += 1
            if count > 0:
                value = total / count
                sim[x, y] = value
                sim[y, x] = value
    return sim


@njit(cache=True, nogil=True)
def pairwise_sqdist(points):
    n, d = points.shape
    out = np.empty((n, n))
    for i in range(n):
        out[i, i] = 0.0
        for j in range(i + 1, n):
            acc = 0.0
            for k in range(d):
                diff = points[i, k] - points[j, k]
                acc += diff * diff
            out[i, j] = acc
            out[j, i] = acc
    return out


@njit(cache=True, nogil=True)
def grow_tree_gini(
    codes_t,
    bins_per_feature,
    y,
    sample_idx,
    n_classes,
    max_depth,
    min_leaf,
    k_features,
    rand_u32,
):
    n_features = codes_t.shape[0]
    m = sample_idx.shape[0]
    max_nodes = 2 * m + 1
    max_bins = int(np.max(bins_per_feature))

    feature = np.full(max_nodes, LEAF, dtype=np.int64)
    thr_bin = np.full(max_nodes, LEAF, dtype=np.int64)
    left = np.full(max_nodes, LEAF, dtype=np.int64)
    right = np.full(max_nodes, LEAF, dtype=np.int64)
    leaf_val = np.zeros((max_nodes, n_classes))
    n_node = np.zeros(max_nodes, dtype=np.int64)
    importance = np.zeros(n_features)

    order = sample_idx.astype(np.int64).copy()
    scratch = np.empty(m, dtype=np.int64)
    perm = np.empty(n_features, dtype=np.int64)
    hist = np.zeros((max_bins, n_classes), dtype=np.int64)
    counts = np.zeros(n_classes, dtype=np.float64)
    cum = np.zeros(n_classes, dtype=np.float64)

    stack_node = np.empty(max_nodes, dtype=np.int64)
    stack_start = np.empty(max_nodes, dtype=np.int64)
    stack_end = np.empty(max_nodes, dtype=np.int64)
    stack_depth = np.empty(max_nodes, dtype=np.int64)
    sp = 0
    stack_node[sp] = 0
    stack_start[sp] = 0
    stack_end[sp] = m
    stack_depth[sp] = 0
    sp += 1

    cursor = 0
    n_nodes = 1
    while sp > 0:
        sp -= 1
        node = stack_node[sp]
        start = stack_start[sp]
        end = stack_end[sp]
        depth = stack_depth[sp]
        n = end - start

        for c in range(n_classes):
            counts[c] = 0.0
        for i in range(start, end):
            counts[y[order[i]]] += 1.0
        n_node[node] = n
        parent_score = 0.0
        max_count = 0.0
        for c in range(n_classes):
            leaf_val[node, c] = counts[c] / n
            parent_score += counts[c] * counts[c]
            if counts[c] > max_count:
                max_count = counts[c]
        parent_score /= n

        if depth >= max_depth or n < 2 * min_leaf or max_count == n:
            continue

        if k_features >= n_features:
            k = n_features
            for i in range(n_features):
                perm[i] = i
        else:
            k = k_features
            for i in range(n_features):
                perm[i] = i
            for i in range(k):
                j = i + int(rand_u32[cursor % rand_u32.shape[0]]) % (n_features - i)
                cursor += 1
                tmp = perm[i]
                perm[i] = perm[j]
                perm[j] = tmp

        best_gain = 0.0
        best_feat = LEAF
        best_bin = LEAF
        for fi in range(k):
            f = perm[fi]
            n_bins = bins_per_feature[f]
            if n_bins < 2:
                continue
            for b in range(n_bins):
                for c in range(n_classes):
                    hist[b, c] = 0
            for i in range(start, end):
                s = order[i]
                hist[codes_t[f, s], y[s]] += 1
            for c in range(n_classes):
                cum[c] = 0.0
            n_left = 0.0
            for b in range(n_bins - 1):
                for c in range(n_classes):
                    cum[c] += hist[b, c]
                    n_left += hist[b, c]
                nl = n_left
                nr = n - nl
                if nl < min_leaf or nr < min_leaf:
                    continue
                score_l = 0.0
                score_r = 0.0
                for c in range(n_classes):
                    cr = counts[c] - cum[c]
                    score_l += cum[c] * cum[c]
                    score_r += cr * cr
                gain = score_l / nl + score_r / nr - parent_score
                if gain > best_gain:
                    best_gain = gain
                    best_feat = f
                    best_bin = b

        if best_feat == LEAF:
            continue

        importance[best_feat] += best_gain
        n_go_left = 0
        for i in range(start, end):
            s = order[i]
            if codes_t[best_feat, s] <= best_bin:
                scratch[n_go_left] = s
                n_go_left += 1
        pos = n_go_left
        for i in range(start, end):
            s = order[i]
            if codes_t[best_feat, s] > best_bin:
                scratch[pos] = s
                pos += 1
        for i in range(n):
            order[start + i] = scratch[i]

        feature[node] = best_feat
        thr_bin[node] = best_bin
        left[node] = n_nodes
        right[node] = n_nodes + 1
        stack_node[sp] = n_nodes + 1
        stack_start[sp] = start + n_go_left
        stack_end[sp] = end
        stack_depth[sp] = depth + 1
        sp += 1
        stack_node[sp] = n_nodes
        stack_start[sp] = start
        stack_end[sp] = start + n_go_left
        stack_depth[sp] = depth + 1
        sp += 1
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


@njit(cache=True, nogil=True)
def grow_tree_mse(
    codes_t,
    bins_per_feature,
    grad,
    denom_weight,
    sample_idx,
    max_depth,
    min_leaf,
    k_features,
    rand_u32,
    leaf_factor,
    denom_floor,
):
    n_features = codes_t.shape[0]
    m = sample_idx.shape[0]
    max_nodes = 2 * m + 1
    max_bins = int(np.max(bins_per_feature))

    feature = np.full(max_nodes, LEAF, dtype=np.int64)
    thr_bin = np.full(max_nodes, LEAF, dtype=np.int64)
    left = np.full(max_nodes, LEAF, dtype=np.int64)
    right = np.full(max_nodes, LEAF, dtype=np.int64)
    leaf_val = np.zeros(max_nodes)
    n_node = np.zeros(max_nodes, dtype=np.int64)
    importance = np.zeros(n_features)

    order = sample_idx.astype(np.int64).copy()
    scratch = np.empty(m, dtype=np.int64)
    perm = np.empty(n_features, dtype=np.int64)
    cnt = np.zeros(max_bins, dtype=np.int64)
    gsum = np.zeros(max_bins, dtype=np.float64)

    stack_node = np.empty(max_nodes, dtype=np.int64)
    stack_start = np.empty(max_nodes, dtype=np.int64)
    stack_end = np.empty(max_nodes, dtype=np.int64)
    stack_depth = np.empty(max_nodes, dtype=np.int64)
    sp = 0
    stack_node[sp] = 0
    stack_start[sp] = 0
    stack_end[sp] = m
    stack_depth[sp] = 0
    sp += 1

    cursor = 0
    n_nodes = 1
    while sp > 0:
        sp -= 1
        node = stack_node[sp]
        start = stack_start[sp]
        end = stack_end[sp]
        depth = stack_depth[sp]
        n = end - start

        g_total = 0.0
        w_total = 0.0
        for i in range(start, end):
            s = order[i]
            g_total += grad[s]
            w_total += denom_weight[s]
        n_node[node] = n
        denom = w_total
        if denom < denom_floor:
            denom = denom_floor
        leaf_val[node] = leaf_factor * g_total / denom
        parent_score = g_total * g_total / n

        if depth >= max_depth or n < 2 * min_leaf:
            continue

        if k_features >= n_features:
            k = n_features
            for i in range(n_features):
                perm[i] = i
        else:
            k = k_features
            for i in range(n_features):
                perm[i] = i
            for i in range(k):
                j = i + int(rand_u32[cursor % rand_u32.shape[0]]) % (n_features - i)
                cursor += 1
                tmp = perm[i]
                perm[i] = perm[j]
                perm[j] = tmp

        best_gain = 0.0
        best_feat = LEAF
        best_bin = LEAF
        for fi in range(k):
            f = perm[fi]
            n_bins = bins_per_feature[f]
            if n_bins < 2:
                continue
            for b in range(n_bins):
                cnt[b] = 0
                gsum[b] = 0.0
            for i in range(start, end):
                s = order[i]
                b = codes_t[f, s]
                cnt[b] += 1
                gsum[b] += grad[s]
            nl = 0
            gl = 0.0
            for b in range(n_bins - 1):
                nl += cnt[b]
                gl += gsum[b]
                nr = n - nl
                if nl < min_leaf or nr < min_leaf:
                    continue
                gr = g_total - gl
                gain = gl * gl / nl + gr * gr / nr - parent_score
                if gain > best_gain:
                    best_gain = gain
                    best_feat = f
                    best_bin = b

        if best_feat == LEAF:
            continue

        importance[best_feat] += best_gain
        n_go_left = 0
        for i in range(start, end):
            s = order[i]
            if codes_t[best_feat, s] <= best_bin:
                scratch[n_go_left] = s
                n_go_left += 1
        pos = n_go_left
        for i in range(start, end):
            s = order[i]
            if codes_t[best_feat, s] > best_bin:
                scratch[pos] = s
                pos += 1
        for i in range(n):
            order[start + i] = scratch[i]

        feature[node] = best_feat
        thr_bin[node] = best_bin
        left[node] = n_nodes
        right[node] = n_nodes + 1
        stack_node[sp] = n_nodes + 1
        stack_start[sp] = start + n_go_left
        stack_end[sp] = end
        stack_depth[sp] = depth + 1
        sp += 1
        stack_node[sp] = n_nodes
        stack_start[sp] = start
        stack_end[sp] = start + n_go_left
        stack_depth[sp] = depth + 1
        sp += 1
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


@njit(cache=True, nogil=True)
def tree_apply(x, feature, threshold, left, right):
    n = x.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if x[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out
