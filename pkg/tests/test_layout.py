import numpy as np
import pytest

from ensemblescope._linalg import principal_components
from ensemblescope.ensemble import EnsembleState, PerfSummary, evaluate
from ensemblescope.layout import (
    LayoutError,
    LayoutFrame,
    attribute_layout,
    cell_instance_ids,
    density_grid,
    mds_2d,
    model_space_coords,
    pca_2d,
    tsne_2d,
)
from ensemblescope.metrics import MetricError


def _fake_state(ds, combined):
    pred = np.argmax(combined, axis=1).astype(np.int32)
    test_labels = ds.labels[ds.test_indices]
    return EnsembleState(
        members=(0,),
        test_sum=combined.copy(),
        cv_sum=np.zeros((len(ds.train_indices), ds.n_classes)),
        combined_test_probs=combined,
        pred_labels=pred,
        correct=pred == test_labels,
        perf=PerfSummary(0.0, 0.0, 0.0),
    )


# --- attribute layout -----------------------------------------------------------

def test_attribute_layout_x_formula_endpoints(demo_dataset):
    ds = demo_dataset
    n_test = len(ds.test_indices)
    combined = np.full((n_test, 2), 0.5)
    combined[0] = [0.0, 1.0]   # certain class 1 -> right edge of bin 1
    combined[1] = [0.5, 0.5]   # maximal uncertainty -> left edge of bin 0 (tie -> class 0)
    combined[2] = [0.25, 0.75]
    frame = attribute_layout(_fake_state(ds, combined), ds, ds.attributes[0])
    assert frame.x[0] == pytest.approx(2.0, abs=1e-8)
    assert frame.x[0] < 2.0  # clamped inside the bin
    assert frame.x[1] == 0.0
    assert frame.x[2] == pytest.approx(1.0 + (0.75 - 0.5) / 0.5)
    assert frame.x_extent == (0.0, 2.0)


def test_attribute_layout_bins_and_monotonicity(demo_library):
    lib = demo_library
    state = evaluate(lib, [0, 1, 2])
    ds = lib.dataset
    frame = attribute_layout(state, ds, ds.attribute("age"))
    # bijective on instance ids
    assert len(np.unique(frame.instance_ids)) == frame.n_points == len(ds.test_indices)
    for c in range(ds.n_classes):
        mask = frame.predicted_class == c
        assert ((frame.x[mask] >= c) & (frame.x[mask] < c + 1)).all()
        # x strictly increases with predicted-class probability inside the bin
        order = np.argsort(frame.probability[mask], kind="stable")
        xs = frame.x[mask][order]
        ps = frame.probability[mask][order]
        strictly_increasing = np.diff(ps) > 0
        assert (np.diff(xs)[strictly_increasing] > 0).all()
    assert ((frame.probability >= 0.5 - 1e-12) & (frame.probability <= 1.0)).all()


def test_attribute_layout_numeric_y_normalization(demo_dataset):
    ds = demo_dataset
    attr = ds.attribute("age")
    combined = np.full((len(ds.test_indices), 2), 0.5)
    frame = attribute_layout(_fake_state(ds, combined), ds, attr)
    col = ds.columns[ds.attribute_index("age")][ds.test_indices]
    expected = np.clip((col - attr.vmin) / (attr.vmax - attr.vmin), 0, 1)
    assert frame.y == pytest.approx(expected)
    # hand case: train min 17, max 90, value 53.5 -> 0.5
    assert (53.5 - 17) / (90 - 17) == pytest.approx(0.5)


def test_attribute_layout_categorical_y(demo_library):
    lib = demo_library
    ds = lib.dataset
    attr = ds.attribute("sex")
    frame = attribute_layout(evaluate(lib, [0]), ds, attr)
    k = len(attr.categories)
    codes = ds.columns[ds.attribute_index("sex")][ds.test_indices]
    assert frame.y == pytest.approx(codes / (k - 1))


def test_attribute_layout_unknown_attribute(demo_library):
    from ensemblescope.dataio import Attribute, DataError

    lib = demo_library
    ghost = Attribute("ghost", "numeric", vmin=0, vmax=1)
    with pytest.raises((LayoutError, DataError)):
        attribute_layout(evaluate(lib, [0]), lib.dataset, ghost)


# --- PCA ------------------------------------------------------------------------

def _planar_in_high_dim(n=60, d=10, seed=0):
    rng = np.random.RandomState(seed)
    plane = rng.randn(n, 2) * [3.0, 1.2]
    basis, _ = np.linalg.qr(rng.randn(d, 2))
    return plane @ basis.T + rng.randn(d) * 0.0 + 5.0


def test_pca_preserves_planar_distances():
    x = _planar_in_high_dim()
    res = pca_2d(x)
    assert not res.degenerate
    d_orig = np.linalg.norm(x[:, None] - x[None, :], axis=2)
    d_proj = np.linalg.norm(res.coords[:, None] - res.coords[None, :], axis=2)
    assert np.abs(d_orig - d_proj).max() < 1e-6


def test_pca_duplicated_rows_duplicated_coords():
    x = _planar_in_high_dim(n=30)
    x = np.vstack([x, x[:5]])
    res = pca_2d(x)
    assert res.coords[30:] == pytest.approx(res.coords[:5], abs=1e-9)


def test_pca_zero_variance_degenerate():
    x = np.ones((20, 4)) * 3.14
    res = pca_2d(x)
    assert res.degenerate
    assert np.array_equal(res.coords, np.zeros((20, 2)))


def test_pca_variance_ordering_vs_direction_sweep():
    rng = np.random.RandomState(8)
    x = rng.randn(200, 4) * [4.0, 2.0, 1.0, 0.5]
    centered = x - x.mean(axis=0)
    comps, _ = principal_components(centered, 2)
    v1 = centered @ comps[0]
    v2 = centered @ comps[1]
    var1, var2 = v1.var(), v2.var()
    assert var1 >= var2
    for _ in range(1000):
        d = rng.randn(4)
        d /= np.linalg.norm(d)
        assert centered @ d @ (centered @ d) / len(x) <= var1 + 1e-9
        d_perp = d - (d @ comps[0]) * comps[0]
        norm = np.linalg.norm(d_perp)
        if norm > 1e-9:
            d_perp /= norm
            assert (centered @ d_perp).var() <= var2 + 1e-9


def test_pca_deterministic():
    x = _planar_in_high_dim(seed=5)
    assert np.array_equal(pca_2d(x).coords, pca_2d(x).coords)


def test_pca_needs_two_rows():
    with pytest.raises(LayoutError):
        pca_2d(np.zeros((1, 3)))


# --- MDS ------------------------------------------------------------------------

def _procrustes_rmse(a, b):
    a = a - a.mean(axis=0)
    b = b - b.mean(axis=0)
    u, _, vt = np.linalg.svd(a.T @ b)
    r = u @ vt  # rotation or reflection
    return float(np.sqrt(((a @ r - b) ** 2).mean()))


def test_mds_recovers_planar_configuration():
    rng = np.random.RandomState(2)
    points = rng.randn(50, 2) * [2.0, 0.7]
    dist = np.linalg.norm(points[:, None] - points[None, :], axis=2)
    res = mds_2d(dist)
    assert _procrustes_rmse(points, res.coords) < 1e-6


def test_mds_zero_distances_all_origin():
    res = mds_2d(np.zeros((8, 8)))
    assert np.abs(res.coords).max() < 1e-9


def test_mds_two_points():
    d = 3.7
    res = mds_2d(np.array([[0.0, d], [d, 0.0]]))
    got = np.linalg.norm(res.coords[0] - res.coords[1])
    assert got == pytest.approx(d, abs=1e-9)


def test_mds_rejects_bad_input():
    with pytest.raises(LayoutError, match="symmetric"):
        mds_2d(np.array([[0.0, 1.0], [2.0, 0.0]]))
    with pytest.raises(LayoutError, match="diagonal"):
        mds_2d(np.array([[1.0, 1.0], [1.0, 0.0]]))
    with pytest.raises(LayoutError, match="square"):
        mds_2d(np.zeros((3, 4)))


def test_mds_clamps_negative_eigenvalues():
    # non-Euclidean distances: violates the triangle-embedding, eigenvalues dip negative
    d = np.array(
        [[0.0, 1.0, 1.0, 2.9], [1.0, 0.0, 1.0, 1.0], [1.0, 1.0, 0.0, 1.0], [2.9, 1.0, 1.0, 0.0]]
    )
    res = mds_2d(d)
    assert np.isfinite(res.coords).all()


# --- t-SNE ----------------------------------------------------------------------

def test_tsne_kl_improves_after_exaggeration():
    rng = np.random.RandomState(0)
    x = np.vstack([rng.randn(20, 5), rng.randn(20, 5) + 6.0])
    res = tsne_2d(x, perplexity=10, iters=400, seed=1)
    assert res.kl_final < res.kl_after_exaggeration
    assert np.isfinite(res.coords).all()


def test_tsne_duplicate_rows_end_up_adjacent():
    rng = np.random.RandomState(3)
    x = rng.randn(40, 6)
    x = np.vstack([x, x[0]])  # duplicate of row 0
    res = tsne_2d(x, perplexity=10, iters=500, seed=0)
    dup = np.linalg.norm(res.coords[0] - res.coords[-1])
    d = np.linalg.norm(res.coords[:, None] - res.coords[None, :], axis=2)
    upper = d[np.triu_indices(len(x), k=1)]
    assert dup <= np.percentile(upper, 1)


def test_tsne_three_equidistant_points_symmetric():
    x = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3) / 2]])
    for seed in range(10):
        res = tsne_2d(x, perplexity=1.5, iters=1000, seed=seed)
        d = [
            np.linalg.norm(res.coords[0] - res.coords[1]),
            np.linalg.norm(res.coords[1] - res.coords[2]),
            np.linalg.norm(res.coords[0] - res.coords[2]),
        ]
        assert (max(d) - min(d)) / np.mean(d) < 0.05


def test_tsne_gradient_matches_finite_differences():
    from ensemblescope.layout import _conditional_p, _kl_divergence, _pairwise_sq, _tsne_gradient

    rng = np.random.RandomState(7)
    x = rng.randn(12, 4)
    cond = _conditional_p(_pairwise_sq(x), 4.0)
    p = np.maximum((cond + cond.T) / 24.0, 1e-12)
    y = rng.randn(12, 2)
    grad, _ = _tsne_gradient(p, y)

    def kl_at(yy):
        num = 1.0 / (1.0 + _pairwise_sq(yy))
        np.fill_diagonal(num, 0.0)
        return _kl_divergence(p, np.maximum(num / num.sum(), 1e-12))

    eps = 1e-6
    for i in [0, 5, 11]:
        for d in range(2):
            plus = y.copy()
            plus[i, d] += eps
            minus = y.copy()
            minus[i, d] -= eps
            numeric = (kl_at(plus) - kl_at(minus)) / (2 * eps)
            assert grad[i, d] == pytest.approx(numeric, rel=1e-4, abs=1e-8)


def test_tsne_deterministic_per_seed():
    rng = np.random.RandomState(1)
    x = rng.randn(25, 4)
    a = tsne_2d(x, perplexity=8, iters=150, seed=4)
    b = tsne_2d(x, perplexity=8, iters=150, seed=4)
    assert np.array_equal(a.coords, b.coords)
    c = tsne_2d(x, perplexity=8, iters=150, seed=5)
    assert not np.array_equal(a.coords, c.coords)


def test_tsne_perplexity_validation():
    x = np.random.RandomState(0).randn(20, 3)
    with pytest.raises(LayoutError, match="perplexity"):
        tsne_2d(x, perplexity=25)
    with pytest.raises(LayoutError, match="perplexity"):
        tsne_2d(x, perplexity=1.0)
    with pytest.raises(LayoutError, match="capped"):
        tsne_2d(x, perplexity=5, max_n=10)


# --- density grid -----------------------------------------------------------------

def _uniform_frame(n, seed=0):
    rng = np.random.RandomState(seed)
    return LayoutFrame(
        mode="attribute:x",
        instance_ids=np.arange(n),
        x=rng.rand(n),
        y=rng.rand(n),
        predicted_class=np.zeros(n, dtype=np.int32),
        probability=np.full(n, 0.75),
        correct=rng.rand(n) < 0.8,
        x_extent=(0.0, 1.0),
        y_extent=(0.0, 1.0),
    )


def test_density_single_cell_conservation():
    frame = _uniform_frame(137)
    grid = density_grid(frame, 1, 1)
    assert grid.counts.sum() == 137
    assert grid.counts.shape == (1, 1)


def test_density_single_point():
    frame = _uniform_frame(1)
    grid = density_grid(frame, 7, 5)
    assert grid.counts.sum() == 1
    assert (grid.counts > 0).sum() == 1


def test_density_conservation_across_shapes_and_subsets():
    frame = _uniform_frame(500, seed=2)
    for cols, rows in [(1, 1), (3, 7), (10, 10), (24, 12)]:
        assert density_grid(frame, cols, rows, "all").counts.sum() == 500
        errors = density_grid(frame, cols, rows, "errors")
        assert errors.counts.sum() == (~frame.correct).sum()


def test_density_uniform_binomial_bounds():
    frame = _uniform_frame(10_000, seed=11)
    grid = density_grid(frame, 10, 10)
    sigma = np.sqrt(10_000 * 0.01 * 0.99)
    assert np.abs(grid.counts - 100).max() <= 3 * sigma


def test_density_top_edge_inclusive():
    frame = LayoutFrame(
        mode="pca",
        instance_ids=np.arange(3),
        x=np.array([0.0, 0.5, 1.0]),  # 1.0 is exactly the top edge
        y=np.array([0.0, 0.5, 1.0]),
        predicted_class=np.zeros(3, dtype=np.int32),
        probability=np.full(3, 0.9),
        correct=np.array([True, True, True]),
        x_extent=(0.0, 1.0),
        y_extent=(0.0, 1.0),
    )
    grid = density_grid(frame, 2, 2)
    assert grid.counts.sum() == 3
    assert grid.counts[1, 1] == 2  # the midpoint and the top corner


def test_cell_instance_ids_match_counts():
    frame = _uniform_frame(300, seed=5)
    grid = density_grid(frame, 6, 4, "errors")
    for col in range(6):
        for row in range(4):
            ids = cell_instance_ids(frame, grid, col, row, "errors")
            assert len(ids) == grid.counts[col, row]


def test_density_validation():
    frame = _uniform_frame(10)
    with pytest.raises(LayoutError):
        density_grid(frame, 0, 5)
    with pytest.raises(LayoutError):
        density_grid(frame, 5, 5, "bogus")


# --- model space -------------------------------------------------------------------

def test_model_space_ranges_and_membership(demo_library):
    lib = demo_library
    points = model_space_coords(lib, "auc_w", "div_q", members=[1, 3])
    assert len(points) == lib.n_models
    for p in points:
        assert 0.0 <= p["x"] <= 1.0
        assert p["is_member"] == (p["model_id"] in (1, 3))


def test_model_space_acc_local_consistency(demo_library):
    lib = demo_library
    all_test = lib.dataset.test_indices
    points = model_space_coords(lib, "acc_local", "acc", members=[0], selection_ids=all_test)
    for p in points:
        assert p["x"] == pytest.approx(p["y"], abs=1e-12)


def test_model_space_acc_local_requires_selection(demo_library):
    with pytest.raises(MetricError, match="selection"):
        model_space_coords(demo_library, "acc_local", "acc", members=[0])


def test_model_space_f1_axes(demo_library):
    lib = demo_library
    cls = lib.dataset.classes[1]
    points = model_space_coords(lib, f"f1:{cls}", "acc_cv", members=[0])
    assert all(0.0 <= p["x"] <= 1.0 for p in points)
