"""Scalar and pairwise model measures for the model-space axes.

Covers selection accuracy, per-class F-measure, prevalence-weighted one-vs-rest
ROC AUC (midrank tie handling), pairwise Q-statistics over correctness
vectors, and the 1-D diversity coordinate obtained from the first principal
component of the Q matrix rows. Argmax ties break to the lowest class index
everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._linalg import principal_components

METRIC_NAMES = ("acc", "auc_w", "acc_cv", "div_q", "acc_local")  # plus "f1:<class>"


class MetricError(ValueError):
    """Empty evaluation sets, bad metric names, mismatched vectors."""


class AucResult(NamedTuple):
    value: float
    degenerate_classes: tuple[int, ...]


class FMeasureResult(NamedTuple):
    value: float
    vacuous: bool


class QResult(NamedTuple):
    value: float
    degenerate: bool


class DiversityResult(NamedTuple):
    coords: np.ndarray
    degenerate: bool


@dataclass(frozen=True)
class MetricRecord:
    """Precomputed per-model measures stored in the library manifest.

    ``accuracy_test`` comes from the test prediction block; the AUC,
    F-measures and diversity coordinate come from the out-of-fold (CV) block,
    matching how the per-model measures are collected.
    """

    model_id: int
    accuracy_test: float
    auc_weighted: float
    f_measure_per_class: tuple[float, ...]
    accuracy_cv: float
    diversity_coord: float

    def to_json(self) -> dict:
        return {
            "model_id": self.model_id,
            "accuracy_test": self.accuracy_test,
            "auc_weighted": self.auc_weighted,
            "f_measure_per_class": list(self.f_measure_per_class),
            "accuracy_cv": self.accuracy_cv,
            "diversity_coord": self.diversity_coord,
        }

    @staticmethod
    def from_json(obj: dict) -> "MetricRecord":
        return MetricRecord(
            model_id=obj["model_id"],
            accuracy_test=obj["accuracy_test"],
            auc_weighted=obj["auc_weighted"],
            f_measure_per_class=tuple(obj["f_measure_per_class"]),
            accuracy_cv=obj["accuracy_cv"],
            diversity_coord=obj["diversity_coord"],
        )


def argmax_labels(probs: np.ndarray) -> np.ndarray:
    """Predicted class per row; np.argmax already favors the lowest index."""
    return np.argmax(probs, axis=1).astype(np.int32)


def accuracy(pred_labels, true_labels, subset=None) -> float:
    """Fraction of correct predictions, optionally restricted to ``subset``
    (positions into the evaluation arrays)."""
    pred = np.asarray(pred_labels)
    true = np.asarray(true_labels)
    if pred.shape != true.shape:
        raise MetricError("prediction/label length mismatch")
    if subset is not None:
        subset = np.asarray(subset, dtype=np.int64)
        pred = pred[subset]
        true = true[subset]
    if pred.size == 0:
        raise MetricError("empty evaluation set")
    return float((pred == true).mean())


def f_measure(pred_labels, true_labels, cls: int) -> FMeasureResult:
    """Harmonic mean of precision and recall for one class.

    Returns 0 when precision + recall is 0; returns 1 flagged vacuous when
    the class is neither predicted nor present.
    """
    pred = np.asarray(pred_labels)
    true = np.asarray(true_labels)
    if pred.size == 0:
        raise MetricError("empty evaluation set")
    tp = int(((pred == cls) & (true == cls)).sum())
    fp = int(((pred == cls) & (true != cls)).sum())
    fn = int(((pred != cls) & (true == cls)).sum())
    if tp == 0 and fp == 0 and fn == 0:
        return FMeasureResult(1.0, True)
    if tp == 0:
        return FMeasureResult(0.0, False)
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return FMeasureResult(2.0 * precision * recall / (precision + recall), False)


def _midranks(x: np.ndarray) -> np.ndarray:
    sx = np.sort(x)
    lo = np.searchsorted(sx, x, side="left")
    hi = np.searchsorted(sx, x, side="right")
    return (lo + hi + 1) / 2.0


def _auc_binary(scores: np.ndarray, positive: np.ndarray) -> tuple[float, bool]:
    n_pos = int(positive.sum())
    n_neg = len(positive) - n_pos
    if n_pos == 0 or n_neg == 0:
        return 0.5, True
    r = _midranks(scores)
    return float((r[positive].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)), False


def auc_weighted(probs: np.ndarray, true_labels) -> AucResult:
    """One-vs-rest rank AUC per class, averaged with class-prevalence weights.

    A class with zero positives or zero negatives contributes 0.5 and is
    flagged; absent classes carry zero weight. The binary case reduces to the
    plain AUC on the positive-class probability.
    """
    probs = np.asarray(probs, dtype=np.float64)
    true = np.asarray(true_labels)
    n, k = probs.shape
    if n < 2:
        raise MetricError("need at least 2 instances for AUC")
    degenerate: list[int] = []
    total = 0.0
    weight_sum = 0.0
    for c in range(k):
        positive = true == c
        n_c = int(positive.sum())
        if n_c == 0:
            continue
        value, degen = _auc_binary(probs[:, c], positive)
        if degen:
            degenerate.append(c)
        w = n_c / n
        total += w * value
        weight_sum += w
    return AucResult(total / weight_sum, tuple(degenerate))


def q_statistic(correct_a, correct_b) -> QResult:
    """Pairwise Q over two correctness vectors.

    Q = (n11*n00 - n01*n10) / (n11*n00 + n01*n10); a zero denominator yields
    0 with the degenerate flag.
    """
    a = np.asarray(correct_a, dtype=bool)
    b = np.asarray(correct_b, dtype=bool)
    if a.shape != b.shape:
        raise MetricError("correctness vectors differ in length")
    if a.size == 0:
        raise MetricError("empty correctness vectors")
    n11 = float((a & b).sum())
    n00 = float((~a & ~b).sum())
    n01 = float((~a & b).sum())
    n10 = float((a & ~b).sum())
    den = n11 * n00 + n01 * n10
    if den == 0:
        return QResult(0.0, True)
    return QResult((n11 * n00 - n01 * n10) / den, False)


def q_matrix(correct: np.ndarray) -> np.ndarray:
    """Symmetric M x M Q-statistic matrix from an M x N correctness matrix.

    The diagonal is fixed at 1; degenerate off-diagonal pairs get 0.
    """
    c = np.asarray(correct, dtype=np.float64)
    if c.ndim != 2:
        raise MetricError("expected an M x N correctness matrix")
    w = 1.0 - c
    n11 = c @ c.T
    n00 = w @ w.T
    n01 = w @ c.T
    n10 = c @ w.T
    den = n11 * n00 + n01 * n10
    num = n11 * n00 - n01 * n10
    with np.errstate(invalid="ignore", divide="ignore"):
        q = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    np.fill_diagonal(q, 1.0)
    return q


def diversity_coordinates(q: np.ndarray) -> DiversityResult:
    """1-D diversity coordinate per model from the Q matrix.

    Each Q row is treated as a feature vector; rows are column-centered and
    projected on the first principal component. The sign is fixed so the
    coordinate correlates non-negatively with the Q row means. If total
    variance is below 1e-12 (all models behave identically) every coordinate
    is 0 and the result is flagged degenerate.
    """
    q = np.asarray(q, dtype=np.float64)
    m = q.shape[0]
    if m != q.shape[1]:
        raise MetricError("Q matrix must be square")
    centered = q - q.mean(axis=0)
    total_variance = float((centered**2).sum()) / m
    if total_variance < 1e-12:
        return DiversityResult(np.zeros(m), True)
    comps, _ = principal_components(centered, 1)
    coords = centered @ comps[0]
    row_means = q.mean(axis=1)
    corr = float(coords @ (row_means - row_means.mean()))
    if corr < 0:
        coords = -coords
    return DiversityResult(coords, False)


def local_accuracy_all_models(lib, selection_ids) -> np.ndarray:
    """Per-model accuracy restricted to a selection of test instance ids."""
    positions = lib.test_positions(selection_ids)
    if positions.size == 0:
        raise MetricError("empty selection")
    true = lib.dataset.labels[lib.dataset.test_indices][positions]
    out = np.empty(len(lib.caches))
    for i, cache in enumerate(lib.caches):
        pred = argmax_labels(cache.test_probs[positions])
        out[i] = float((pred == true).mean())
    return out


def metric_value(record: MetricRecord, name: str, classes: tuple[str, ...]) -> float:
    """Resolve a stable metric name (acc, auc_w, f1:<class>, acc_cv, div_q)."""
    if name == "acc":
        return record.accuracy_test
    if name == "auc_w":
        return record.auc_weighted
    if name == "acc_cv":
        return record.accuracy_cv
    if name == "div_q":
        return record.diversity_coord
    if name.startswith("f1:"):
        cls_name = name[3:]
        if cls_name not in classes:
            raise MetricError(f"unknown class in metric {name!r}")
        return record.f_measure_per_class[classes.index(cls_name)]
    raise MetricError(f"unknown metric name {name!r}")
