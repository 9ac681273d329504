"""Numba kernels shared by the tree-based families.

Trees are stored as flat arrays (feature, threshold, left, right, counts):
``feature[node] == -1`` marks a leaf. Split search uses Gini impurity with
candidate thresholds at midpoints between sorted distinct values; scanning
features in ascending column order with strict improvement makes ties resolve
to the lowest column index, then the lowest threshold.
"""

from __future__ import annotations

import numpy as np
from numba import njit

LEAF = -1


@njit(cache=True, inline="always")
def _xorshift(state):
    state ^= state << np.uint64(13)
    state ^= state >> np.uint64(7)
    state ^= state << np.uint64(17)
    return state


@njit(cache=True)
def grow_tree(X, y, sample_idx, n_classes, max_depth, min_leaf, mtry, rng_state):
    """Grow one CART tree over ``X[sample_idx]`` (duplicates allowed).

    ``max_depth == 0`` means unlimited. ``mtry < n_features`` samples that
    many candidate features per node from an xorshift stream, keeping the
    chosen subset in ascending order so tie-breaking stays by column index.
    Returns (feature, threshold, left, right, counts, rng_state).
    """
    n_total = sample_idx.shape[0]
    n_feat = X.shape[1]
    max_nodes = 2 * n_total + 1
    feature = np.full(max_nodes, LEAF, dtype=np.int32)
    threshold = np.zeros(max_nodes, dtype=np.float64)
    left = np.full(max_nodes, -1, dtype=np.int32)
    right = np.full(max_nodes, -1, dtype=np.int32)
    counts = np.zeros((max_nodes, n_classes), dtype=np.float64)

    idx = sample_idx.copy()
    stack = np.empty((max_nodes, 4), dtype=np.int64)
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = n_total
    stack[0, 3] = 0
    top = 1
    n_nodes = 1

    feat_order = np.empty(n_feat, dtype=np.int64)
    vals = np.empty(n_total, dtype=np.float64)
    left_counts = np.empty(n_classes, dtype=np.float64)

    while top > 0:
        top -= 1
        node = stack[top, 0]
        start = stack[top, 1]
        end = stack[top, 2]
        depth = stack[top, 3]
        n = end - start
        for c in range(n_classes):
            counts[node, c] = 0.0
        for i in range(start, end):
            counts[node, y[idx[i]]] += 1.0
        n_present = 0
        for c in range(n_classes):
            if counts[node, c] > 0:
                n_present += 1
        if n_present <= 1 or (max_depth > 0 and depth >= max_depth) or n < 2 * min_leaf:
            continue

        if mtry >= n_feat:
            n_try = n_feat
            for j in range(n_feat):
                feat_order[j] = j
        else:
            n_try = mtry
            for j in range(n_feat):
                feat_order[j] = j
            for j in range(mtry):
                rng_state = _xorshift(rng_state)
                k = j + rng_state % np.uint64(n_feat - j)
                tmp = feat_order[j]
                feat_order[j] = feat_order[k]
                feat_order[k] = tmp
            feat_order[:mtry].sort()

        inv_n = 1.0 / n
        best_cost = np.inf
        best_feat = -1
        best_thr = 0.0
        for jj in range(n_try):
            f = feat_order[jj]
            for i in range(n):
                vals[i] = X[idx[start + i], f]
            order = np.argsort(vals[:n], kind="mergesort")
            for c in range(n_classes):
                left_counts[c] = 0.0
            n_left = 0
            for pos in range(n - 1):
                row = idx[start + order[pos]]
                left_counts[y[row]] += 1.0
                n_left += 1
                v = vals[order[pos]]
                v_next = vals[order[pos + 1]]
                if v_next > v and n_left >= min_leaf and (n - n_left) >= min_leaf:
                    sl = 0.0
                    sr = 0.0
                    for c in range(n_classes):
                        lc = left_counts[c]
                        rc = counts[node, c] - lc
                        sl += lc * lc
                        sr += rc * rc
                    n_right = n - n_left
                    cost = (n_left - sl / n_left + n_right - sr / n_right) * inv_n
                    if cost < best_cost:
                        best_cost = cost
                        best_feat = f
                        best_thr = 0.5 * (v + v_next)
        if best_feat < 0:
            continue

        lo = start
        hi = end - 1
        while lo <= hi:
            if X[idx[lo], best_feat] <= best_thr:
                lo += 1
            else:
                tmp = idx[lo]
                idx[lo] = idx[hi]
                idx[hi] = tmp
                hi -= 1
        mid = lo
        feature[node] = best_feat
        threshold[node] = best_thr
        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        left[node] = lid
        right[node] = rid
        stack[top, 0] = lid
        stack[top, 1] = start
        stack[top, 2] = mid
        stack[top, 3] = depth + 1
        top += 1
        stack[top, 0] = rid
        stack[top, 1] = mid
        stack[top, 2] = end
        stack[top, 3] = depth + 1
        top += 1

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        counts[:n_nodes].copy(),
        rng_state,
    )


@njit(cache=True)
def tree_apply(X, feature, threshold, left, right):
    """Leaf node id for each row of X."""
    n = X.shape[0]
    out = np.empty(n, dtype=np.int32)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out


@njit(cache=True)
def weighted_stump(X, y, w, sort_idx, n_classes):
    """Best single weighted Gini split over all features.

    ``sort_idx[f]`` holds row positions presorted by feature f, so each call
    is a linear scan per feature. Returns (found, feature, threshold,
    class_left, class_right) where side classes are the weighted majority
    (ties to the lowest class index).
    """
    n, n_feat = X.shape
    total = np.zeros(n_classes)
    for i in range(n):
        total[y[i]] += w[i]
    wsum = total.sum()

    best_cost = np.inf
    best_feat = -1
    best_thr = 0.0
    left_counts = np.empty(n_classes, dtype=np.float64)
    for f in range(n_feat):
        for c in range(n_classes):
            left_counts[c] = 0.0
        lw = 0.0
        for pos in range(n - 1):
            i = sort_idx[f, pos]
            left_counts[y[i]] += w[i]
            lw += w[i]
            v = X[i, f]
            v_next = X[sort_idx[f, pos + 1], f]
            if v_next > v and lw > 0.0 and (wsum - lw) > 0.0:
                sl = 0.0
                sr = 0.0
                for c in range(n_classes):
                    lc = left_counts[c]
                    rc = total[c] - lc
                    sl += lc * lc
                    sr += rc * rc
                rw = wsum - lw
                cost = (lw - sl / lw + rw - sr / rw) / wsum
                if cost < best_cost:
                    best_cost = cost
                    best_feat = f
                    best_thr = 0.5 * (v + v_next)
    if best_feat < 0:
        return False, -1, 0.0, 0, 0

    for c in range(n_classes):
        left_counts[c] = 0.0
    right_counts = np.zeros(n_classes)
    for i in range(n):
        if X[i, best_feat] <= best_thr:
            left_counts[y[i]] += w[i]
        else:
            right_counts[y[i]] += w[i]
    class_left = 0
    class_right = 0
    for c in range(1, n_classes):
        if left_counts[c] > left_counts[class_left]:
            class_left = c
        if right_counts[c] > right_counts[class_right]:
            class_right = c
    return True, best_feat, best_thr, class_left, class_right
