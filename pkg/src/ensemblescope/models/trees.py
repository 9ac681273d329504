"""Tree-based families: single CART tree, random forest, bagging, boosted stumps.

All of them emit probabilities through Laplace-smoothed leaf counts
(alpha = 1), averaged over members where there are several; the boosted
stumps use a softmax over per-class margin scores instead.
"""

from __future__ import annotations

import numpy as np

from . import _tree_kernels as tk
from .base import ModelSpec, TrainedModel, softmax_rows, spec_rng

_UNLIMITED = 0


def _depth_param(v) -> int:
    return _UNLIMITED if v is None else int(v)


def _leaf_probs(counts: np.ndarray, leaf_ids: np.ndarray, n_classes: int) -> np.ndarray:
    leaf_counts = counts[leaf_ids]
    return (leaf_counts + 1.0) / (leaf_counts.sum(axis=1, keepdims=True) + n_classes)


class _Tree:
    __slots__ = ("feature", "threshold", "left", "right", "counts")

    def __init__(self, feature, threshold, left, right, counts):
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right
        self.counts = counts

    @staticmethod
    def grow(X, y, sample_idx, n_classes, max_depth, min_leaf, mtry, rng_state):
        out = tk.grow_tree(
            X, y, sample_idx, n_classes, max_depth, min_leaf, mtry, np.uint64(rng_state)
        )
        return _Tree(*out[:5]), out[5]

    def apply(self, X):
        return tk.tree_apply(X, self.feature, self.threshold, self.left, self.right)


def _pack_trees(trees: list[_Tree]) -> dict[str, np.ndarray]:
    offsets = np.zeros(len(trees) + 1, dtype=np.int64)
    for i, t in enumerate(trees):
        offsets[i + 1] = offsets[i] + len(t.feature)
    return {
        "offsets": offsets,
        "feature": np.concatenate([t.feature for t in trees]),
        "threshold": np.concatenate([t.threshold for t in trees]),
        "left": np.concatenate([t.left for t in trees]),
        "right": np.concatenate([t.right for t in trees]),
        "counts": np.concatenate([t.counts for t in trees], axis=0),
    }


def _unpack_trees(arrays: dict[str, np.ndarray]) -> list[_Tree]:
    offsets = arrays["offsets"]
    trees = []
    for i in range(len(offsets) - 1):
        lo, hi = int(offsets[i]), int(offsets[i + 1])
        trees.append(
            _Tree(
                np.ascontiguousarray(arrays["feature"][lo:hi]),
                np.ascontiguousarray(arrays["threshold"][lo:hi]),
                np.ascontiguousarray(arrays["left"][lo:hi]),
                np.ascontiguousarray(arrays["right"][lo:hi]),
                np.ascontiguousarray(arrays["counts"][lo:hi]),
            )
        )
    return trees


class _TreeEnsembleModel(TrainedModel):
    """Shared predict/serialize logic for models that are a list of trees."""

    def __init__(self, spec, n_classes, n_features, train_seed, trees):
        super().__init__(spec, n_classes, n_features, train_seed)
        self.trees = trees

    def _predict_proba(self, X):
        acc = np.zeros((X.shape[0], self.n_classes))
        for t in self.trees:
            acc += _leaf_probs(t.counts, t.apply(X), self.n_classes)
        return acc / len(self.trees)

    def state_arrays(self):
        return _pack_trees(self.trees)

    @classmethod
    def from_state(cls, spec, n_classes, n_features, train_seed, arrays, meta):
        return cls(spec, n_classes, n_features, train_seed, _unpack_trees(arrays))


class DecisionTreeModel(_TreeEnsembleModel):
    family = "decision_tree"

    @classmethod
    def train(cls, spec: ModelSpec, X, y, n_classes, seed, **_):
        p = spec.param_dict
        idx = np.arange(X.shape[0], dtype=np.int64)
        tree, _ = _Tree.grow(
            X, y, idx, n_classes, _depth_param(p["depth"]), p["min_leaf"], X.shape[1], 1
        )
        return cls(spec, n_classes, X.shape[1], seed, [tree])


class RandomForestModel(_TreeEnsembleModel):
    family = "random_forest"

    @classmethod
    def train(cls, spec: ModelSpec, X, y, n_classes, seed, **_):
        p = spec.param_dict
        d = X.shape[1]
        mtry = max(1, int(round(np.sqrt(d)))) if p["mtry"] == "sqrt" else max(1, d // 3)
        rng = spec_rng(spec, seed)
        state = np.uint64(rng.randint(1, 2**63 - 1))
        trees = []
        for _i in range(p["trees"]):
            boot = rng.randint(0, X.shape[0], size=X.shape[0]).astype(np.int64)
            tree, state = _Tree.grow(X, y, boot, n_classes, _UNLIMITED, 1, mtry, state)
            trees.append(tree)
        return cls(spec, n_classes, d, seed, trees)


class BaggedTreesModel(_TreeEnsembleModel):
    family = "bagged_trees"

    @classmethod
    def train(cls, spec: ModelSpec, X, y, n_classes, seed, **_):
        p = spec.param_dict
        rng = spec_rng(spec, seed)
        trees = []
        for _i in range(p["bags"]):
            boot = rng.randint(0, X.shape[0], size=X.shape[0]).astype(np.int64)
            tree, _ = _Tree.grow(
                X, y, boot, n_classes, _depth_param(p["depth"]), 1, X.shape[1], 1
            )
            trees.append(tree)
        return cls(spec, n_classes, X.shape[1], seed, trees)


class AdaBoostStumpsModel(TrainedModel):
    """SAMME boosting with depth-1 trees; probabilities via softmax of margins."""

    family = "adaboost_stumps"

    def __init__(self, spec, n_classes, n_features, train_seed, stumps, prior_counts):
        super().__init__(spec, n_classes, n_features, train_seed)
        # stumps: dict of parallel arrays (feature, threshold, class_left, class_right, alpha)
        self.stumps = stumps
        self.prior_counts = prior_counts

    @classmethod
    def train(cls, spec: ModelSpec, X, y, n_classes, seed, **_):
        p = spec.param_dict
        lr = float(p["learning_rate"])
        n = X.shape[0]
        sort_idx = np.ascontiguousarray(np.argsort(X, axis=0, kind="mergesort").T.astype(np.int64))
        w = np.full(n, 1.0 / n)
        feats, thrs, lefts, rights, alphas = [], [], [], [], []
        for _round in range(p["rounds"]):
            found, f, thr, cl, cr = tk.weighted_stump(X, y, w, sort_idx, n_classes)
            if not found:
                break
            pred = np.where(X[:, f] <= thr, cl, cr)
            miss = pred != y
            err = float(w[miss].sum())
            if err >= 1.0 - 1.0 / n_classes:
                break
            err = max(err, 1e-12)
            alpha = lr * (np.log((1.0 - err) / err) + np.log(n_classes - 1.0))
            if alpha <= 0:
                break
            feats.append(f)
            thrs.append(thr)
            lefts.append(cl)
            rights.append(cr)
            alphas.append(alpha)
            if err <= 1e-12:
                break  # perfect stump; later rounds would repeat it
            w = w * np.exp(alpha * miss)
            w /= w.sum()
        stumps = {
            "feature": np.asarray(feats, dtype=np.int32),
            "threshold": np.asarray(thrs, dtype=np.float64),
            "class_left": np.asarray(lefts, dtype=np.int32),
            "class_right": np.asarray(rights, dtype=np.int32),
            "alpha": np.asarray(alphas, dtype=np.float64),
        }
        prior = np.bincount(y, minlength=n_classes).astype(np.float64)
        return cls(spec, n_classes, X.shape[1], seed, stumps, prior)

    def _predict_proba(self, X):
        s = self.stumps
        if len(s["alpha"]) == 0:
            p = (self.prior_counts + 1.0) / (self.prior_counts.sum() + self.n_classes)
            return np.tile(p, (X.shape[0], 1))
        scores = np.zeros((X.shape[0], self.n_classes))
        rows = np.arange(X.shape[0])
        for t in range(len(s["alpha"])):
            side = X[:, s["feature"][t]] <= s["threshold"][t]
            pred = np.where(side, s["class_left"][t], s["class_right"][t])
            scores[rows, pred] += s["alpha"][t]
        return softmax_rows(scores)

    def state_arrays(self):
        out = dict(self.stumps)
        out["prior_counts"] = self.prior_counts
        return out

    @classmethod
    def from_state(cls, spec, n_classes, n_features, train_seed, arrays, meta):
        stumps = {k: arrays[k] for k in ("feature", "threshold", "class_left", "class_right", "alpha")}
        return cls(spec, n_classes, n_features, train_seed, stumps, arrays["prior_counts"])
