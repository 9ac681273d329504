"""Data-space and model-space visual encodings.

The attribute layout bins test points side-by-side per predicted class, with
the combined probability of the predicted class mapped to the horizontal
position inside the bin (left edge = maximal uncertainty 1/K, right edge =
certainty 1) and the attribute value normalized onto the vertical axis.
Overview projections (PCA / classical MDS / exact t-SNE) embed the encoded
attribute matrix; density grids count points per cell for the heat map.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ._linalg import principal_components
from .dataio import CATEGORICAL, Attribute, Dataset
from .ensemble import EnsembleState
from .library import ModelLibrary
from .metrics import MetricError, local_accuracy_all_models, metric_value

_EDGE_EPS = 1e-9
TSNE_DEFAULT_MAX_N = 5000


class LayoutError(ValueError):
    """Unknown attributes, malformed distance matrices, bad parameters."""


@dataclass(frozen=True)
class LayoutFrame:
    """Per-instance 2-D coordinates plus classification overlay for one mode."""

    mode: str
    instance_ids: np.ndarray
    x: np.ndarray
    y: np.ndarray
    predicted_class: np.ndarray
    probability: np.ndarray
    correct: np.ndarray
    x_extent: tuple[float, float]
    y_extent: tuple[float, float]
    meta: dict = field(default_factory=dict)

    @property
    def n_points(self) -> int:
        return int(len(self.instance_ids))

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "x_extent": list(self.x_extent),
            "y_extent": list(self.y_extent),
            "meta": self.meta,
            "points": [
                {
                    "id": int(self.instance_ids[i]),
                    "x": float(self.x[i]),
                    "y": float(self.y[i]),
                    "predicted_class": int(self.predicted_class[i]),
                    "probability": float(self.probability[i]),
                    "correct": bool(self.correct[i]),
                }
                for i in range(self.n_points)
            ],
        }


@dataclass(frozen=True)
class DensityGrid:
    """cols x rows cell counts aligned to a frame's extents.

    Binning is half-open [lo, hi) with the top edge inclusive, so the total
    count always equals the number of binned points.
    """

    cols: int
    rows: int
    counts: np.ndarray  # shape (cols, rows)
    x_extent: tuple[float, float]
    y_extent: tuple[float, float]
    subset: str

    def to_json(self) -> dict:
        return {
            "cols": self.cols,
            "rows": self.rows,
            "counts": self.counts.tolist(),
            "x_extent": list(self.x_extent),
            "y_extent": list(self.y_extent),
            "subset": self.subset,
        }


class PcaResult(NamedTuple):
    coords: np.ndarray
    degenerate: bool


class MdsResult(NamedTuple):
    coords: np.ndarray
    clamped_negative: bool


class TsneResult(NamedTuple):
    coords: np.ndarray
    kl_final: float
    kl_after_exaggeration: float


def _normalize_attribute_values(ds: Dataset, attr: Attribute, rows: np.ndarray) -> np.ndarray:
    col = ds.columns[ds.attribute_index(attr.name)][rows]
    if attr.kind == CATEGORICAL:
        k = len(attr.categories)
        if k == 1:
            return np.full(len(rows), 0.5)
        return col.astype(np.float64) / (k - 1)
    span = attr.vmax - attr.vmin
    if span == 0:
        return np.full(len(rows), 0.5)
    return np.clip((col - attr.vmin) / span, 0.0, 1.0)


def attribute_layout(
    ens: EnsembleState, ds: Dataset, attr: Attribute, instance_ids: np.ndarray | None = None
) -> LayoutFrame:
    """Attribute-binned layout of the visualized test points.

    x = predicted_class + (p - 1/K) / (1 - 1/K), clamped just inside the
    class bin; y = the attribute value normalized to [0, 1] by training
    min/max (numeric) or category rank (categorical).
    """
    if all(a.name != attr.name for a in ds.attributes):
        raise LayoutError(f"unknown attribute {attr.name!r}")
    test_idx = ds.test_indices
    if instance_ids is None:
        ids = test_idx
        positions = np.arange(len(test_idx))
    else:
        ids = np.asarray(instance_ids, dtype=np.int64)
        positions = np.searchsorted(test_idx, ids)
    k = ds.n_classes
    pred = ens.pred_labels[positions]
    prob = ens.combined_test_probs[positions, pred]
    offset = (prob - 1.0 / k) / (1.0 - 1.0 / k)
    offset = np.minimum(np.maximum(offset, 0.0), 1.0 - _EDGE_EPS)
    x = pred + offset
    y = _normalize_attribute_values(ds, attr, ids)
    return LayoutFrame(
        mode=f"attribute:{attr.name}",
        instance_ids=ids,
        x=x,
        y=y,
        predicted_class=pred,
        probability=prob,
        correct=ens.correct[positions].copy(),
        x_extent=(0.0, float(k)),
        y_extent=(0.0, 1.0),
        meta={"probability_axis": "predicted-class probability rescaled from [1/K,1] to bin width"},
    )


def projection_frame(
    mode: str,
    coords: np.ndarray,
    ens: EnsembleState,
    ds: Dataset,
    instance_ids: np.ndarray,
    seed: int = 0,
    extra_meta: dict | None = None,
) -> LayoutFrame:
    """Wrap projection coordinates with the current classification overlay."""
    ids = np.asarray(instance_ids, dtype=np.int64)
    positions = np.searchsorted(ds.test_indices, ids)
    pred = ens.pred_labels[positions]
    prob = ens.combined_test_probs[positions, pred]
    x = coords[:, 0]
    y = coords[:, 1]
    return LayoutFrame(
        mode=mode,
        instance_ids=ids,
        x=x,
        y=y,
        predicted_class=pred,
        probability=prob,
        correct=ens.correct[positions].copy(),
        x_extent=(float(x.min()), float(x.max())),
        y_extent=(float(y.min()), float(y.max())),
        meta={"seed": seed, **(extra_meta or {})},
    )


def pca_2d(matrix: np.ndarray) -> PcaResult:
    """Project centered data on the top-2 principal directions."""
    x = np.asarray(matrix, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise LayoutError("PCA needs an N x D matrix with N >= 2")
    centered = x - x.mean(axis=0)
    total_variance = float((centered**2).sum()) / x.shape[0]
    if total_variance < 1e-12:
        return PcaResult(np.zeros((x.shape[0], 2)), True)
    comps, _ = principal_components(centered, 2)
    return PcaResult(centered @ comps.T, False)


def mds_2d(dist: np.ndarray) -> MdsResult:
    """Classical (Torgerson) MDS: double-center -D^2/2, take top-2 eigenpairs."""
    d = np.asarray(dist, dtype=np.float64)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise LayoutError("distance matrix must be square")
    if not np.allclose(d, d.T, atol=1e-9):
        raise LayoutError("distance matrix must be symmetric")
    if not np.allclose(np.diag(d), 0.0, atol=1e-9):
        raise LayoutError("distance matrix must have a zero diagonal")
    n = d.shape[0]
    j = np.eye(n) - np.ones((n, n)) / n
    b = -0.5 * j @ (d**2) @ j
    eigvals, eigvecs = np.linalg.eigh(b)
    order = np.argsort(eigvals)[::-1][:2]
    lam = eigvals[order]
    clamped = bool((lam < 0).any())
    lam = np.maximum(lam, 0.0)
    vecs = eigvecs[:, order]
    for c in range(2):
        s = float(vecs[:, c].sum())
        if s < 0 or (s == 0 and len(nz := np.flatnonzero(vecs[:, c])) and vecs[nz[0], c] < 0):
            vecs[:, c] = -vecs[:, c]
    return MdsResult(vecs * np.sqrt(lam), clamped)


def _pairwise_sq(x: np.ndarray) -> np.ndarray:
    sq = (x**2).sum(axis=1)
    d = sq[:, None] + sq[None, :] - 2.0 * x @ x.T
    np.maximum(d, 0.0, out=d)
    np.fill_diagonal(d, 0.0)
    return d


def _conditional_p(d2: np.ndarray, perplexity: float, tol: float = 1e-5) -> np.ndarray:
    """Per-point Gaussian neighbourhoods with bandwidths bisected to match
    the target perplexity.

    50 search steps like the reference implementations: when the target
    entropy is unreachable (fewer effective neighbours than the perplexity
    asks for), a longer runaway search would amplify float dust in tied
    distances into a degenerate distribution.
    """
    n = d2.shape[0]
    target = np.log(perplexity)
    p = np.zeros((n, n))
    for i in range(n):
        beta, beta_min, beta_max = 1.0, -np.inf, np.inf
        di = np.delete(d2[i], i)
        for _ in range(50):
            w = np.exp(-di * beta)
            s = w.sum()
            if s <= 0:
                h = 0.0
                pi = np.zeros_like(w)
            else:
                pi = w / s
                nz = pi > 0
                h = float(-(pi[nz] * np.log(pi[nz])).sum())
            diff = h - target
            if abs(diff) < tol:
                break
            if diff > 0:  # entropy too high: narrow the kernel
                beta_min = beta
                beta = beta * 2.0 if beta_max == np.inf else (beta + beta_max) / 2.0
            else:
                beta_max = beta
                beta = beta / 2.0 if beta_min == -np.inf else (beta + beta_min) / 2.0
        row = np.zeros(n)
        row[np.arange(n) != i] = pi
        p[i] = row
    return p


def _kl_divergence(p: np.ndarray, q: np.ndarray) -> float:
    mask = p > 0
    return float((p[mask] * np.log(p[mask] / q[mask])).sum())


def _tsne_gradient(p_eff: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """KL gradient wrt the embedding, plus the current Q matrix."""
    num = 1.0 / (1.0 + _pairwise_sq(y))
    np.fill_diagonal(num, 0.0)
    q = np.maximum(num / num.sum(), 1e-12)
    pq = (p_eff - q) * num
    grad = 4.0 * ((np.diag(pq.sum(axis=1)) - pq) @ y)
    return grad, q


def tsne_2d(
    matrix: np.ndarray,
    perplexity: float = 30.0,
    iters: int = 1000,
    seed: int = 0,
    max_n: int = TSNE_DEFAULT_MAX_N,
) -> TsneResult:
    """Exact t-SNE with the standard schedule.

    Early exaggeration x12 for the first 250 iterations, momentum 0.5 then
    0.8, learning rate 200 with adaptive gains, deterministic for a fixed
    seed. Reports the final KL divergence and the KL right after the
    exaggeration phase.
    """
    x = np.asarray(matrix, dtype=np.float64)
    n = x.shape[0]
    if n > max_n:
        raise LayoutError(f"t-SNE capped at {max_n} points (exact O(N^2) gradients)")
    if not 1.0 < perplexity < n:
        raise LayoutError(f"perplexity {perplexity} out of range (need 1 < perplexity < N={n})")
    rng = np.random.RandomState(seed)
    cond = _conditional_p(_pairwise_sq(x), perplexity)
    p = (cond + cond.T) / (2.0 * n)
    p = np.maximum(p, 1e-12)

    y = rng.standard_normal((n, 2)) * 1e-4
    inc = np.zeros_like(y)
    gains = np.ones_like(y)
    exaggeration_until = min(250, iters)
    lr = 200.0
    kl_after_exaggeration = np.inf
    for it in range(iters):
        p_eff = p * 12.0 if it < exaggeration_until else p
        grad, _ = _tsne_gradient(p_eff, y)
        momentum = 0.5 if it < 250 else 0.8
        same_sign = np.sign(grad) == np.sign(inc)
        gains = np.where(same_sign, gains * 0.8, gains + 0.2)
        np.maximum(gains, 0.01, out=gains)
        inc = momentum * inc - lr * gains * grad
        y = y + inc
        y = y - y.mean(axis=0)
        if it == exaggeration_until - 1:
            num = 1.0 / (1.0 + _pairwise_sq(y))
            np.fill_diagonal(num, 0.0)
            kl_after_exaggeration = _kl_divergence(p, np.maximum(num / num.sum(), 1e-12))
    num = 1.0 / (1.0 + _pairwise_sq(y))
    np.fill_diagonal(num, 0.0)
    kl_final = _kl_divergence(p, np.maximum(num / num.sum(), 1e-12))
    return TsneResult(y, kl_final, float(kl_after_exaggeration))


def density_grid(frame: LayoutFrame, cols: int, rows: int, subset: str = "all") -> DensityGrid:
    """Count (optionally errors-only) frame points per grid cell."""
    if cols < 1 or rows < 1:
        raise LayoutError("grid needs at least 1 column and 1 row")
    if subset not in ("all", "errors"):
        raise LayoutError(f"subset must be 'all' or 'errors', got {subset!r}")
    keep = ~frame.correct if subset == "errors" else np.ones(frame.n_points, dtype=bool)
    ci = _cell_index(frame.x[keep], frame.x_extent, cols)
    ri = _cell_index(frame.y[keep], frame.y_extent, rows)
    counts = np.zeros((cols, rows), dtype=np.int64)
    np.add.at(counts, (ci, ri), 1)
    return DensityGrid(
        cols=cols,
        rows=rows,
        counts=counts,
        x_extent=frame.x_extent,
        y_extent=frame.y_extent,
        subset=subset,
    )


def _cell_index(values: np.ndarray, extent: tuple[float, float], n_cells: int) -> np.ndarray:
    lo, hi = extent
    span = hi - lo
    if span <= 0:
        return np.zeros(len(values), dtype=np.int64)
    idx = np.floor((values - lo) / span * n_cells).astype(np.int64)
    return np.clip(idx, 0, n_cells - 1)  # top edge inclusive


def cell_instance_ids(
    frame: LayoutFrame, grid: DensityGrid, col: int, row: int, subset: str = "all"
) -> np.ndarray:
    """Instance ids of the frame points counted in one grid cell."""
    keep = ~frame.correct if subset == "errors" else np.ones(frame.n_points, dtype=bool)
    ci = _cell_index(frame.x, frame.x_extent, grid.cols)
    ri = _cell_index(frame.y, frame.y_extent, grid.rows)
    mask = keep & (ci == col) & (ri == row)
    return frame.instance_ids[mask]


def model_space_coords(
    lib: ModelLibrary,
    axis_x: str,
    axis_y: str,
    members,
    selection_ids=None,
) -> list[dict]:
    """Per-model scatter coordinates under two metric axes.

    ``acc_local`` pulls the per-model accuracy on the current selection and
    therefore requires a non-empty one; every other axis reads the
    precomputed metric record.
    """
    local = None
    if axis_x == "acc_local" or axis_y == "acc_local":
        if selection_ids is None or len(selection_ids) == 0:
            raise MetricError("acc_local axis needs a non-empty selection")
        local = local_accuracy_all_models(lib, selection_ids)

    member_set = set(int(m) for m in members)
    points = []
    for i, record in enumerate(lib.model_metrics):
        def axis(name):
            if name == "acc_local":
                return float(local[i])
            return float(metric_value(record, name, lib.dataset.classes))

        points.append(
            {
                "model_id": i,
                "spec_id": lib.specs[i].spec_id,
                "x": axis(axis_x),
                "y": axis(axis_y),
                "is_member": i in member_set,
            }
        )
    return points
