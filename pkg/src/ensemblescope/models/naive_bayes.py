"""Naive Bayes over the encoded view: categorical likelihoods on one-hot blocks
(Laplace-smoothed by ``alpha``), Gaussians on numeric columns, log-space
posteriors."""

from __future__ import annotations

import numpy as np

from .base import ModelSpec, TrainedModel

_VAR_EPS_SCALE = 1e-9


class NaiveBayesModel(TrainedModel):
    family = "naive_bayes"

    def __init__(
        self, spec, n_classes, n_features, train_seed,
        log_prior, cat_cols, cat_group, cat_log_lik, num_cols, num_mean, num_var,
    ):
        super().__init__(spec, n_classes, n_features, train_seed)
        self.log_prior = log_prior
        self.cat_cols = cat_cols          # encoded one-hot column indices
        self.cat_group = cat_group        # source attribute id per one-hot column
        self.cat_log_lik = cat_log_lik    # (K, len(cat_cols))
        self.num_cols = num_cols
        self.num_mean = num_mean          # (K, len(num_cols))
        self.num_var = num_var

    @classmethod
    def train(cls, spec: ModelSpec, X, y, n_classes, seed, column_attr=None, column_category=None):
        alpha = float(spec.param_dict["alpha"])
        if column_attr is None or column_category is None:
            raise ValueError("naive_bayes needs encoded-column metadata")
        cat_mask = np.asarray(column_category) >= 0
        cat_cols = np.flatnonzero(cat_mask).astype(np.int64)
        num_cols = np.flatnonzero(~cat_mask).astype(np.int64)
        cat_group = np.asarray(column_attr)[cat_cols].astype(np.int64)

        class_n = np.array([(y == c).sum() for c in range(n_classes)], dtype=np.float64)
        log_prior = np.log((class_n + 1.0) / (class_n.sum() + n_classes))

        cat_log_lik = np.zeros((n_classes, len(cat_cols)))
        if len(cat_cols):
            group_sizes = {g: int((cat_group == g).sum()) for g in np.unique(cat_group)}
            sizes = np.array([group_sizes[g] for g in cat_group], dtype=np.float64)
            for c in range(n_classes):
                counts = X[y == c][:, cat_cols].sum(axis=0)
                cat_log_lik[c] = np.log((counts + alpha) / (class_n[c] + alpha * sizes))

        num_mean = np.zeros((n_classes, len(num_cols)))
        num_var = np.ones((n_classes, len(num_cols)))
        if len(num_cols):
            xn = X[:, num_cols]
            var_floor = _VAR_EPS_SCALE * max(float(xn.var(axis=0).max()), 1.0)
            for c in range(n_classes):
                xc = xn[y == c]
                num_mean[c] = xc.mean(axis=0)
                num_var[c] = xc.var(axis=0) + var_floor
        return cls(
            spec, n_classes, X.shape[1], seed,
            log_prior, cat_cols, cat_group, cat_log_lik, num_cols, num_mean, num_var,
        )

    def _predict_proba(self, X):
        log_post = np.tile(self.log_prior, (X.shape[0], 1))
        if len(self.cat_cols):
            log_post += X[:, self.cat_cols] @ self.cat_log_lik.T
        if len(self.num_cols):
            xn = X[:, self.num_cols]
            for c in range(self.n_classes):
                diff = xn - self.num_mean[c]
                log_post[:, c] += (
                    -0.5 * (np.log(2.0 * np.pi * self.num_var[c]) + diff**2 / self.num_var[c])
                ).sum(axis=1)
        log_post -= log_post.max(axis=1, keepdims=True)
        p = np.exp(log_post)
        return p / p.sum(axis=1, keepdims=True)

    def state_arrays(self):
        return {
            "log_prior": self.log_prior,
            "cat_cols": self.cat_cols,
            "cat_group": self.cat_group,
            "cat_log_lik": self.cat_log_lik,
            "num_cols": self.num_cols,
            "num_mean": self.num_mean,
            "num_var": self.num_var,
        }

    @classmethod
    def from_state(cls, spec, n_classes, n_features, train_seed, arrays, meta):
        return cls(
            spec, n_classes, n_features, train_seed,
            arrays["log_prior"], arrays["cat_cols"], arrays["cat_group"],
            arrays["cat_log_lik"], arrays["num_cols"], arrays["num_mean"], arrays["num_var"],
        )
