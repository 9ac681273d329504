"""Multinomial logistic regression with L2 penalty, fitted by L-BFGS."""

from __future__ import annotations

import numpy as np
from scipy.optimize import minimize

from .base import ModelSpec, TrainedModel, softmax_rows

_MAX_ITER = 500


class LogisticRegressionModel(TrainedModel):
    family = "logistic_regression"

    def __init__(self, spec, n_classes, n_features, train_seed, weights, bias):
        super().__init__(spec, n_classes, n_features, train_seed)
        self.weights = weights  # (D, K)
        self.bias = bias        # (K,)

    @classmethod
    def train(cls, spec: ModelSpec, X, y, n_classes, seed, **_):
        l2 = float(spec.param_dict["l2"])
        n, d = X.shape
        onehot = np.zeros((n, n_classes))
        onehot[np.arange(n), y] = 1.0

        def objective(flat):
            w = flat[: d * n_classes].reshape(d, n_classes)
            b = flat[d * n_classes:]
            p = softmax_rows(X @ w + b)
            nll = -np.log(np.maximum(p[np.arange(n), y], 1e-300)).mean()
            loss = nll + 0.5 * l2 * float((w**2).sum())
            g = (p - onehot) / n
            gw = X.T @ g + l2 * w
            gb = g.sum(axis=0)
            return loss, np.concatenate([gw.ravel(), gb])

        x0 = np.zeros(d * n_classes + n_classes)
        res = minimize(objective, x0, jac=True, method="L-BFGS-B", options={"maxiter": _MAX_ITER})
        w = res.x[: d * n_classes].reshape(d, n_classes)
        b = res.x[d * n_classes:]
        return cls(spec, n_classes, d, seed, w, b)

    def _predict_proba(self, X):
        return softmax_rows(X @ self.weights + self.bias)

    def state_arrays(self):
        return {"weights": self.weights, "bias": self.bias}

    @classmethod
    def from_state(cls, spec, n_classes, n_features, train_seed, arrays, meta):
        return cls(spec, n_classes, n_features, train_seed, arrays["weights"], arrays["bias"])
