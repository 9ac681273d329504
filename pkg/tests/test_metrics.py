import numpy as np
import pytest

from ensemblescope.metrics import (
    MetricError,
    MetricRecord,
    accuracy,
    argmax_labels,
    auc_weighted,
    diversity_coordinates,
    f_measure,
    local_accuracy_all_models,
    metric_value,
    q_matrix,
    q_statistic,
)

from conftest import random_simplex


# --- accuracy / f-measure -----------------------------------------------------

def test_accuracy_basic():
    assert accuracy([1, 0, 1], [1, 0, 1]) == 1.0
    assert accuracy([1, 0, 1, 1], [1, 1, 1, 0], subset=[0, 1, 2, 3]) == 0.5
    assert accuracy([1, 0, 0, 1], [1, 0, 1, 1], subset=[0, 1, 2, 3]) == 0.75


def test_accuracy_empty_subset_errors():
    with pytest.raises(MetricError):
        accuracy([1, 0], [1, 0], subset=[])
    with pytest.raises(MetricError):
        accuracy([], [])


def test_accuracy_permutation_invariant():
    rng = np.random.RandomState(0)
    pred = rng.randint(0, 3, 50)
    true = rng.randint(0, 3, 50)
    perm = rng.permutation(50)
    assert accuracy(pred, true) == accuracy(pred[perm], true[perm])


def test_f_measure_perfect():
    pred = np.array([0, 1, 2, 1, 0])
    for c in range(3):
        assert f_measure(pred, pred, c) == (1.0, False)


def test_f_measure_hand_case():
    # TP=2, FP=1, FN=1 -> P=R=2/3 -> F=2/3
    pred = np.array([1, 1, 1, 0, 0])
    true = np.array([1, 1, 0, 1, 0])
    got = f_measure(pred, true, 1)
    assert got.value == pytest.approx(2 / 3, abs=1e-12)
    assert not got.vacuous


def test_f_measure_vacuous_class():
    pred = np.array([0, 1, 0])
    true = np.array([0, 1, 1])
    assert f_measure(pred, true, 2) == (1.0, True)


def test_f_measure_zero_when_no_overlap():
    pred = np.array([1, 1])
    true = np.array([0, 0])
    assert f_measure(pred, true, 1) == (0.0, False)


def test_f_measure_permutation_invariant():
    rng = np.random.RandomState(1)
    pred = rng.randint(0, 2, 60)
    true = rng.randint(0, 2, 60)
    perm = rng.permutation(60)
    assert f_measure(pred, true, 1) == f_measure(pred[perm], true[perm], 1)


# --- AUC -----------------------------------------------------------------------

def _auc_brute(scores, positive):
    pos = scores[positive]
    neg = scores[~positive]
    wins = 0.0
    for p in pos:
        wins += (p > neg).sum() + 0.5 * (p == neg).sum()
    return wins / (len(pos) * len(neg))


def _binary_probs(scores):
    return np.column_stack([1 - scores, scores])


def test_auc_separated_is_one():
    scores = np.array([0.9, 0.8, 0.2, 0.1])
    labels = np.array([1, 1, 0, 0])
    assert auc_weighted(_binary_probs(scores), labels).value == pytest.approx(1.0)


def test_auc_all_tied_is_half():
    scores = np.full(6, 0.5)
    labels = np.array([1, 0, 1, 0, 1, 0])
    assert auc_weighted(_binary_probs(scores), labels).value == pytest.approx(0.5)


def test_auc_hand_case():
    # pos {0.9, 0.4}, neg {0.5, 0.1}: 3 wins of 4 pairs
    scores = np.array([0.9, 0.4, 0.5, 0.1])
    labels = np.array([1, 1, 0, 0])
    assert auc_weighted(_binary_probs(scores), labels).value == pytest.approx(0.75)


def test_auc_against_brute_force_oracle():
    rng = np.random.RandomState(42)
    for _ in range(1000):
        n = rng.randint(2, 201)
        labels = rng.randint(0, 2, n)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        # mix continuous scores with heavy ties
        if rng.rand() < 0.5:
            scores = rng.randint(0, 5, n) / 4.0
        else:
            scores = rng.rand(n)
        got = auc_weighted(_binary_probs(scores), labels).value
        pos = labels == 1
        want_pos = _auc_brute(scores, pos)
        want_neg = _auc_brute(1 - scores, ~pos)
        want = (pos.sum() * want_pos + (~pos).sum() * want_neg) / n
        assert got == pytest.approx(want, abs=1e-9)


def test_auc_monotone_transform_invariant():
    rng = np.random.RandomState(3)
    for _ in range(50):
        n = rng.randint(5, 80)
        labels = rng.randint(0, 2, n)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        scores = rng.rand(n)
        base = auc_weighted(_binary_probs(scores), labels).value
        for transform in (lambda s: s**3, lambda s: np.exp(2 * s), lambda s: 5 * s - 1):
            t = transform(scores)
            probs = np.column_stack([t.max() + 1 - t, t])  # keep column 1 monotone in s
            got = auc_weighted(probs, labels).value
            assert got == pytest.approx(base, abs=1e-9)


def test_auc_degenerate_class_flagged():
    probs = random_simplex(np.random.RandomState(0), 6, 3)
    labels = np.array([0, 0, 1, 1, 0, 1])  # class 2 absent
    res = auc_weighted(probs, labels)
    assert res.degenerate_classes == ()
    labels2 = np.array([2, 2, 2, 2, 2, 0])
    res2 = auc_weighted(probs, labels2)
    assert 0.0 <= res2.value <= 1.0


def test_auc_multiclass_weights_by_prevalence():
    rng = np.random.RandomState(5)
    probs = random_simplex(rng, 90, 3)
    labels = rng.randint(0, 3, 90)
    got = auc_weighted(probs, labels).value
    total, wsum = 0.0, 0.0
    for c in range(3):
        pos = labels == c
        w = pos.mean()
        total += w * _auc_brute(probs[:, c], pos)
        wsum += w
    assert got == pytest.approx(total / wsum, abs=1e-9)


def test_auc_needs_two_rows():
    with pytest.raises(MetricError):
        auc_weighted(np.array([[0.5, 0.5]]), np.array([0]))


# --- Q statistics ---------------------------------------------------------------

def test_q_identical_mixed_vectors():
    a = np.array([True, True, False, False])
    assert q_statistic(a, a) == (1.0, False)


def test_q_complementary_vectors():
    a = np.array([True, True, False, False])
    assert q_statistic(a, ~a) == (-1.0, False)


def test_q_hand_contingency():
    # N11=5, N00=3, N01=1, N10=1 -> (15-1)/(15+1) = 0.875
    a = np.array([1, 1, 1, 1, 1, 0, 0, 0, 0, 1], dtype=bool)
    b = np.array([1, 1, 1, 1, 1, 0, 0, 0, 1, 0], dtype=bool)
    got = q_statistic(a, b)
    assert got.value == pytest.approx(0.875, abs=1e-12)
    assert not got.degenerate


def test_q_degenerate_denominator():
    a = np.array([True, True, True])
    b = np.array([True, False, True])
    assert q_statistic(a, b) == (0.0, True)  # N00 = N01 = 0


def test_q_length_mismatch():
    with pytest.raises(MetricError):
        q_statistic([True], [True, False])


def test_q_random_properties():
    rng = np.random.RandomState(9)
    for _ in range(1000):
        n = rng.randint(1, 60)
        a = rng.rand(n) < rng.rand()
        b = rng.rand(n) < rng.rand()
        qab = q_statistic(a, b)
        qba = q_statistic(b, a)
        assert qab.value == qba.value
        assert -1.0 <= qab.value <= 1.0
        qaa = q_statistic(a, a)
        if a.any() and not a.all():
            assert qaa == (1.0, False)


def test_q_matrix_matches_pairwise():
    rng = np.random.RandomState(11)
    correct = rng.rand(6, 40) < 0.7
    q = q_matrix(correct)
    assert np.allclose(q, q.T)
    assert np.allclose(np.diag(q), 1.0)
    for i in range(6):
        for j in range(i + 1, 6):
            assert q[i, j] == pytest.approx(q_statistic(correct[i], correct[j]).value)


# --- diversity coordinate --------------------------------------------------------

def _diversity_oracle(q):
    """Standalone eigensolver PCA for cross-checking the power iteration."""
    centered = q - q.mean(axis=0)
    cov = centered.T @ centered / max(len(q) - 1, 1)
    w, v = np.linalg.eigh(cov)
    coords = centered @ v[:, -1]
    rm = q.mean(axis=1)
    s = coords @ (rm - rm.mean())
    if s < 0:
        coords = -coords
    return coords


def test_diversity_identical_models_degenerate():
    q = np.ones((5, 5))
    res = diversity_coordinates(q)
    assert res.degenerate
    assert np.array_equal(res.coords, np.zeros(5))


def test_diversity_single_model():
    res = diversity_coordinates(np.array([[1.0]]))
    assert res.degenerate
    assert res.coords.tolist() == [0.0]


def test_diversity_two_cluster_structure():
    # two internally identical, mutually complementary clusters
    n = 8
    a = np.array([True] * 4 + [False] * 4)
    correct = np.vstack([a, a, ~a, ~a])
    q = q_matrix(correct)
    res = diversity_coordinates(q)
    assert not res.degenerate
    values = np.round(res.coords, 9)
    assert len(set(values.tolist())) == 2
    assert values[0] == values[1]
    assert values[2] == values[3]
    assert values[0] == pytest.approx(-values[2])
    oracle = _diversity_oracle(q)
    assert np.abs(res.coords) == pytest.approx(np.abs(oracle), abs=1e-9)


def test_diversity_matches_eigh_oracle_random():
    rng = np.random.RandomState(21)
    for _ in range(20):
        m = rng.randint(2, 12)
        correct = rng.rand(m, 50) < rng.rand()
        q = q_matrix(correct)
        res = diversity_coordinates(q)
        if res.degenerate:
            continue
        centered = q - q.mean(axis=0)
        eigvals = np.linalg.eigvalsh(centered.T @ centered / max(m - 1, 1))
        top, second = eigvals[-1], eigvals[-2]
        # projection variance must always capture the top eigenvalue
        assert res.coords.var(ddof=1) == pytest.approx(top, rel=1e-6)
        if top - second > 1e-6 * max(top, 1.0):
            # unique first component: coordinates must match the oracle
            oracle = _diversity_oracle(q)
            agree = np.allclose(res.coords, oracle, atol=1e-7)
            flipped = np.allclose(res.coords, -oracle, atol=1e-7)
            assert agree or flipped
        # the sign convention itself: non-negative correlation with row means
        rm = q.mean(axis=1)
        assert res.coords @ (rm - rm.mean()) >= -1e-12


def test_diversity_constant_shift_invariant():
    rng = np.random.RandomState(13)
    correct = rng.rand(6, 40) < 0.6
    q = q_matrix(correct)
    base = diversity_coordinates(q).coords
    shifted = diversity_coordinates(q + 0.37).coords
    assert shifted == pytest.approx(base, abs=1e-9)


# --- local accuracy over the library ----------------------------------------------

def test_local_accuracy_full_selection_equals_global(demo_library):
    lib = demo_library
    all_test = lib.dataset.test_indices
    local = local_accuracy_all_models(lib, all_test)
    for i, record in enumerate(lib.model_metrics):
        assert local[i] == pytest.approx(record.accuracy_test, abs=1e-12)


def test_local_accuracy_single_point(demo_library):
    lib = demo_library
    one = [int(lib.dataset.test_indices[3])]
    local = local_accuracy_all_models(lib, one)
    assert set(np.unique(local)).issubset({0.0, 1.0})


def test_local_accuracy_hand_count(demo_library):
    lib = demo_library
    ids = lib.dataset.test_indices[:10]
    local = local_accuracy_all_models(lib, ids)
    true = lib.dataset.labels[ids]
    for i, cache in enumerate(lib.caches):
        pred = argmax_labels(cache.test_probs[:10])
        assert local[i] == pytest.approx((pred == true).mean())


def test_local_accuracy_empty_selection(demo_library):
    with pytest.raises(MetricError):
        local_accuracy_all_models(demo_library, [])


def test_metric_value_lookup():
    record = MetricRecord(0, 0.8, 0.9, (0.7, 0.6), 0.75, -0.1)
    classes = ("no", "yes")
    assert metric_value(record, "acc", classes) == 0.8
    assert metric_value(record, "auc_w", classes) == 0.9
    assert metric_value(record, "acc_cv", classes) == 0.75
    assert metric_value(record, "div_q", classes) == -0.1
    assert metric_value(record, "f1:yes", classes) == 0.6
    with pytest.raises(MetricError):
        metric_value(record, "f1:maybe", classes)
    with pytest.raises(MetricError):
        metric_value(record, "nope", classes)
