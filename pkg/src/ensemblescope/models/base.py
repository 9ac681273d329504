"""Model specs, parameter validation, and the training/prediction entry points.

Every family turns a row subset of the shared EncodedView into a trained,
immutable model that emits per-class probability vectors. Randomized families
draw all randomness from a PRNG derived from (seed, spec_id), so training is
reproducible bit-for-bit.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from ..dataio import EncodedView

FAMILIES = (
    "decision_tree",
    "random_forest",
    "bagged_trees",
    "adaboost_stumps",
    "knn",
    "naive_bayes",
    "logistic_regression",
)

# validators: param name -> (checker, description)
_PARAM_RULES: dict[str, dict[str, tuple]] = {
    "decision_tree": {
        "depth": (lambda v: v is None or (isinstance(v, int) and v >= 1), "None or int >= 1"),
        "min_leaf": (lambda v: isinstance(v, int) and v >= 1, "int >= 1"),
    },
    "random_forest": {
        "trees": (lambda v: isinstance(v, int) and v >= 1, "int >= 1"),
        "mtry": (lambda v: v in ("sqrt", "third"), "'sqrt' or 'third'"),
    },
    "bagged_trees": {
        "bags": (lambda v: isinstance(v, int) and v >= 1, "int >= 1"),
        "depth": (lambda v: v is None or (isinstance(v, int) and v >= 1), "None or int >= 1"),
    },
    "adaboost_stumps": {
        "rounds": (lambda v: isinstance(v, int) and v >= 1, "int >= 1"),
        "learning_rate": (lambda v: isinstance(v, (int, float)) and v > 0, "number > 0"),
    },
    "knn": {
        "k": (lambda v: isinstance(v, int) and v >= 1, "int >= 1"),
        "weights": (lambda v: v in ("uniform", "distance"), "'uniform' or 'distance'"),
    },
    "naive_bayes": {
        "alpha": (lambda v: isinstance(v, (int, float)) and v > 0, "number > 0"),
    },
    "logistic_regression": {
        "l2": (lambda v: isinstance(v, (int, float)) and v >= 0, "number >= 0"),
    },
}


class ModelError(ValueError):
    """Bad model parameters or unusable training/prediction input."""


def _canon_value(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass(frozen=True)
class ModelSpec:
    """A classifier family plus its parameter setting.

    ``spec_id`` is a canonical serialization (sorted parameter names), so two
    specs are equal exactly when their ids are.
    """

    family: str
    params: tuple[tuple[str, object], ...]

    @staticmethod
    def make(family: str, **params) -> "ModelSpec":
        spec = ModelSpec(family=family, params=tuple(sorted(params.items())))
        spec.validate()
        return spec

    @property
    def param_dict(self) -> dict:
        return dict(self.params)

    @property
    def spec_id(self) -> str:
        inner = ",".join(f"{k}={_canon_value(v)}" for k, v in self.params)
        return f"{self.family}({inner})"

    def validate(self) -> None:
        rules = _PARAM_RULES.get(self.family)
        if rules is None:
            raise ModelError(f"unknown model family: {self.family!r}")
        given = self.param_dict
        if set(given) != set(rules):
            raise ModelError(
                f"{self.family} expects params {sorted(rules)}, got {sorted(given)}"
            )
        for name, (check, desc) in rules.items():
            if not check(given[name]):
                raise ModelError(f"{self.family} param {name}={given[name]!r} invalid ({desc})")

    def to_json(self) -> dict:
        return {"family": self.family, "params": self.param_dict}

    @staticmethod
    def from_json(obj: dict) -> "ModelSpec":
        return ModelSpec.make(obj["family"], **obj["params"])


def derive_seed(seed: int, spec_id: str) -> int:
    """Stable 32-bit PRNG seed from the build seed and a spec id."""
    digest = hashlib.sha256(f"{seed}|{spec_id}".encode()).digest()
    return int.from_bytes(digest[:4], "little")


def spec_rng(spec: ModelSpec, seed: int) -> np.random.RandomState:
    return np.random.RandomState(derive_seed(seed, spec.spec_id))


class TrainedModel:
    """Base class for trained classifiers: immutable state + probability output."""

    family = "?"

    def __init__(self, spec: ModelSpec, n_classes: int, n_features: int, train_seed: int):
        self.spec = spec
        self.n_classes = n_classes
        self.n_features = n_features
        self.train_seed = train_seed

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ModelError(
                f"prediction width {X.shape[1] if X.ndim == 2 else X.shape} "
                f"!= training width {self.n_features}"
            )
        probs = self._predict_proba(X)
        return probs

    def _predict_proba(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    # serialization hooks: named arrays plus a JSON-able scalar dict
    def state_arrays(self) -> dict[str, np.ndarray]:
        raise NotImplementedError

    def state_meta(self) -> dict:
        return {}

    @classmethod
    def from_state(cls, spec, n_classes, n_features, train_seed, arrays, meta):
        raise NotImplementedError


def normalize_rows(scores: np.ndarray) -> np.ndarray:
    """Scale nonnegative rows to sum to exactly one."""
    s = scores.sum(axis=1, keepdims=True)
    return scores / s


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _family_class(family: str):
    from . import knn, linear, naive_bayes, trees

    table = {
        "decision_tree": trees.DecisionTreeModel,
        "random_forest": trees.RandomForestModel,
        "bagged_trees": trees.BaggedTreesModel,
        "adaboost_stumps": trees.AdaBoostStumpsModel,
        "knn": knn.KnnModel,
        "naive_bayes": naive_bayes.NaiveBayesModel,
        "logistic_regression": linear.LogisticRegressionModel,
    }
    return table[family]


def train(
    spec: ModelSpec,
    view: EncodedView,
    rows: np.ndarray,
    labels: np.ndarray,
    n_classes: int,
    seed: int,
) -> TrainedModel:
    """Train ``spec`` on the given rows of the encoded view.

    ``labels`` is aligned with ``rows``. Deterministic for fixed
    (spec, rows, seed).
    """
    spec.validate()
    rows = np.asarray(rows, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int32)
    if rows.shape[0] != labels.shape[0]:
        raise ModelError("rows and labels length mismatch")
    if len(np.unique(labels)) < 2:
        raise ModelError("training subset contains a single class")
    X = np.ascontiguousarray(view.matrix[rows], dtype=np.float64)
    if not np.isfinite(X).all():
        raise ModelError("non-finite feature values in training subset")
    cls = _family_class(spec.family)
    return cls.train(
        spec,
        X,
        labels,
        n_classes,
        seed,
        column_attr=view.column_attr,
        column_category=view.column_category,
    )


def predict_proba(model: TrainedModel, view: EncodedView, rows: np.ndarray) -> np.ndarray:
    """Per-class probability rows for a row subset of the encoded view."""
    rows = np.asarray(rows, dtype=np.int64)
    X = np.ascontiguousarray(view.matrix[rows], dtype=np.float64)
    return model.predict_proba(X)
