"""k-nearest-neighbour classifier over the encoded view."""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist

from .base import ModelSpec, TrainedModel

_CHUNK = 512  # cap the distance-matrix working set
_DIST_EPS = 1e-12


class KnnModel(TrainedModel):
    family = "knn"

    def __init__(self, spec, n_classes, n_features, train_seed, train_x, train_y):
        super().__init__(spec, n_classes, n_features, train_seed)
        self.train_x = train_x
        self.train_y = train_y

    @classmethod
    def train(cls, spec: ModelSpec, X, y, n_classes, seed, **_):
        k = spec.param_dict["k"]
        if k > X.shape[0]:
            k = X.shape[0]  # degenerate tiny subsets: use all neighbours
        return cls(spec, n_classes, X.shape[1], seed, X.copy(), y.copy())

    def _predict_proba(self, X):
        p = self.spec.param_dict
        k = min(p["k"], self.train_x.shape[0])
        distance_weighted = p["weights"] == "distance"
        out = np.empty((X.shape[0], self.n_classes))
        for lo in range(0, X.shape[0], _CHUNK):
            chunk = X[lo : lo + _CHUNK]
            # direct (x - y)^2 sums: a query at an exact training point gets
            # distance exactly 0, which the cancellation trick cannot promise
            sq = cdist(chunk, self.train_x, "sqeuclidean")
            # stable sort: equal distances resolve to the lowest train row
            nearest = np.argsort(sq, axis=1, kind="stable")[:, :k]
            labels = self.train_y[nearest]
            if distance_weighted:
                w = 1.0 / (np.sqrt(np.take_along_axis(sq, nearest, axis=1)) + _DIST_EPS)
            else:
                w = np.ones_like(nearest, dtype=np.float64)
            votes = np.zeros((chunk.shape[0], self.n_classes))
            for c in range(self.n_classes):
                votes[:, c] = np.where(labels == c, w, 0.0).sum(axis=1)
            # Laplace alpha=1 keeps probabilities strictly inside (0, 1)
            out[lo : lo + _CHUNK] = (votes + 1.0) / (w.sum(axis=1, keepdims=True) + self.n_classes)
        return out

    def state_arrays(self):
        return {"train_x": self.train_x, "train_y": self.train_y}

    @classmethod
    def from_state(cls, spec, n_classes, n_features, train_seed, arrays, meta):
        return cls(spec, n_classes, n_features, train_seed, arrays["train_x"], arrays["train_y"])
