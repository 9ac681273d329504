import json

import numpy as np
import pytest

from ensemblescope import ensemble as ens
from ensemblescope.session import GuardPolicy, Session, SessionConfig, SessionError, SessionStore


def _session(lib, **kwargs):
    guard = kwargs.pop("guard", None)
    config = SessionConfig(guard=guard, **kwargs)
    return Session("s1", lib, config)


def test_create_session_matches_auto_select(demo_library):
    s = _session(demo_library, seed=0)
    trace = ens.auto_select(demo_library, seed=0)
    assert s.ensemble.members == trace.final_members
    assert s.initial_auto_ensemble is s.ensemble
    assert s.revision == 0
    assert s.raw_selection == ()
    assert s.layout_mode == f"attribute:{demo_library.dataset.attributes[0].name}"
    assert (s.axis_x, s.axis_y) == ("auc_w", "div_q")


def test_two_sessions_identical_initial_state(demo_library):
    a = _session(demo_library, seed=0)
    b = _session(demo_library, seed=0)
    assert a.state_json() == b.state_json()


def test_full_rectangle_local_equals_global(demo_library):
    s = _session(demo_library)
    resp = s.set_selection(rect={"x0": 0, "x1": 2, "y0": 0, "y1": 1.1})
    assert resp["selection_size"] == len(demo_library.dataset.test_indices)
    for local, record in zip(resp["local_accuracies"], demo_library.model_metrics):
        assert local == pytest.approx(record.accuracy_test, abs=1e-12)


def test_empty_rectangle_keeps_selection_flagged(demo_library):
    s = _session(demo_library)
    s.set_errors_filter(True)
    resp = s.set_selection(rect={"x0": -5, "x1": -4, "y0": 0, "y1": 1})
    assert resp["selection_size"] == 0
    assert resp["empty_effective"]
    ms = s.model_space("acc_local", "auc_w")
    assert not ms["available"]
    assert "selection" in ms["reason"]


def test_selection_ids_validated(demo_library):
    s = _session(demo_library)
    train_id = int(demo_library.dataset.train_indices[0])
    with pytest.raises(Exception):
        s.set_selection(ids=[train_id])
    with pytest.raises(SessionError):
        s.set_selection(ids=[1], rect={"x0": 0, "x1": 1, "y0": 0, "y1": 1})
    with pytest.raises(SessionError):
        s.set_selection()


def test_toggle_involution_revision(demo_library):
    s = _session(demo_library)
    rev0 = s.revision
    before = s.state_json()
    non_member = next(m for m in range(demo_library.n_models) if m not in s.ensemble.members)
    s.toggle_model(non_member)
    s.toggle_model(non_member)
    assert s.revision == rev0 + 2
    after = json.loads(s.state_json())
    base = json.loads(before)
    assert after["members"] == base["members"]
    assert after["perf"] == base["perf"]


def test_strict_guard_rolls_back(demo_library):
    s = _session(demo_library, guard=GuardPolicy("strict", 0.0))
    # find a toggle the guard must reject
    rejected = None
    for m in range(demo_library.n_models):
        if m in s.ensemble.members:
            continue
        trial = ens.toggle(demo_library, s.ensemble, m)
        if trial.perf.accuracy_test < s.ensemble.perf.accuracy_test:
            rejected = m
            break
    assert rejected is not None, "demo library unexpectedly has no harmful toggle"
    rev = s.revision
    members = s.ensemble.members
    resp = s.toggle_model(rejected)
    assert not resp["applied"]
    assert not resp["guard"]["ok"]
    assert s.revision == rev  # a rolled-back toggle is not a mutation
    assert s.ensemble.members == members


def test_strict_guard_accepts_harmless(demo_library):
    s = _session(demo_library, guard=GuardPolicy("strict", 1.0))  # tolerance swallows any drop
    non_member = next(m for m in range(demo_library.n_models) if m not in s.ensemble.members)
    resp = s.toggle_model(non_member)
    assert resp["applied"]


def test_toggle_validation(demo_library):
    from ensemblescope import build_library
    from ensemblescope.models import ModelSpec

    s = _session(demo_library)
    with pytest.raises(SessionError):
        s.toggle_model(demo_library.n_models + 5)
    single = build_library(
        demo_library.dataset, [ModelSpec.make("naive_bayes", alpha=1.0)], seed=0
    )
    s2 = _session(single)
    assert s2.ensemble.members == (0,)
    with pytest.raises(SessionError, match="last"):
        s2.toggle_model(0)


def test_errors_filter_effective_selection(demo_library):
    s = _session(demo_library)
    test_ids = demo_library.dataset.test_indices
    correct_ids = test_ids[s.ensemble.correct]
    wrong_ids = test_ids[~s.ensemble.correct]
    s.set_selection(ids=correct_ids.tolist())
    resp = s.set_errors_filter(True)
    assert resp["effective_size"] == 0  # only-correct selection empties under the filter
    s.set_selection(ids=test_ids.tolist())
    assert len(s.effective_selection()) == len(wrong_ids)
    resp = s.set_errors_filter(False)
    assert resp["effective_size"] == len(test_ids)


def test_filter_drops_points_fixed_by_toggle(demo_library):
    s = _session(demo_library)
    test_ids = demo_library.dataset.test_indices
    s.set_selection(ids=test_ids[~s.ensemble.correct].tolist())
    s.set_errors_filter(True)
    before_eff = set(s.effective_selection())
    assert before_eff
    fixing = None
    for m in range(demo_library.n_models):
        if m in s.ensemble.members:
            continue
        trial = ens.toggle(demo_library, s.ensemble, m)
        newly_right = ~s.ensemble.correct & trial.correct
        if newly_right.any():
            fixing = m
            fixed_ids = set(test_ids[newly_right].tolist()) & before_eff
            break
    assert fixing is not None
    s.toggle_model(fixing)
    after_eff = set(s.effective_selection())
    assert fixed_ids
    assert not (after_eff & fixed_ids)  # repaired points left the effective selection


def test_frame_identical_bytes_same_revision(demo_library):
    s = _session(demo_library)
    a = json.dumps(s.get_frame(), sort_keys=True)
    b = json.dumps(s.get_frame(), sort_keys=True)
    assert a == b


def test_frame_moves_points_after_toggle(demo_library):
    s = _session(demo_library)
    before = s.get_frame()
    non_member = next(m for m in range(demo_library.n_models) if m not in s.ensemble.members)
    s.toggle_model(non_member)
    after = s.get_frame()
    assert after["revision"] > before["revision"]
    xs_before = np.array([p["x"] for p in before["frame"]["points"]])
    xs_after = np.array([p["x"] for p in after["frame"]["points"]])
    assert not np.array_equal(xs_before, xs_after)  # probabilities changed, points moved


def test_frame_density_error_total_matches_misclassification(demo_library):
    s = _session(demo_library)
    resp = s.get_frame()
    total_errors = int(np.sum([c for col in resp["density_errors"]["counts"] for c in col]))
    assert total_errors == int((~s.ensemble.correct).sum())
    total_all = int(np.sum([c for col in resp["density"]["counts"] for c in col]))
    assert total_all == len(s.viz_ids)


def test_frame_mode_switch_bumps_revision_once(demo_library):
    s = _session(demo_library)
    rev = s.revision
    resp = s.get_frame(mode="pca")
    assert resp["revision"] == rev + 1
    resp2 = s.get_frame(mode="pca")
    assert resp2["revision"] == rev + 1  # unchanged mode: read-only
    assert resp2["frame"] == resp["frame"]


def test_selection_persists_across_layout_change(demo_library):
    s = _session(demo_library)
    ids = demo_library.dataset.test_indices[:17].tolist()
    s.set_selection(ids=ids)
    s.get_frame(mode="pca")
    assert list(s.raw_selection) == sorted(ids)


def test_run_cv_consistency(demo_library):
    from ensemblescope import build_library
    from ensemblescope.models import ModelSpec

    single = build_library(
        demo_library.dataset, [ModelSpec.make("knn", k=5, weights="uniform")], seed=0
    )
    s = _session(single)
    cv = s.run_cv()
    assert cv["accuracy_cv"] == single.model_metrics[0].accuracy_cv
    assert cv["folds"] == single.dataset.n_folds
    assert s.run_cv() == cv  # repeated calls identical, nothing retrains


def test_reset_to_auto(demo_library):
    s = _session(demo_library)
    ids = demo_library.dataset.test_indices[:9].tolist()
    s.set_selection(ids=ids)
    non_member = next(m for m in range(demo_library.n_models) if m not in s.ensemble.members)
    s.toggle_model(non_member)
    rev = s.revision
    resp = s.reset_to_auto()
    assert resp["revision"] == rev + 1
    assert resp["perf"] == s.initial_auto_ensemble.perf.to_json()
    assert list(s.raw_selection) == sorted(ids)  # selection survives the reset
    resp2 = s.reset_to_auto()  # idempotent on state, still bumps the revision
    assert resp2["revision"] == rev + 2
    assert resp2["members"] == resp["members"]


def test_model_space_axes_update(demo_library):
    s = _session(demo_library)
    rev = s.revision
    ms = s.model_space("acc", "acc_cv")
    assert ms["available"]
    assert s.revision == rev + 1
    ms2 = s.model_space("acc", "acc_cv")
    assert s.revision == rev + 1  # same axes: no extra bump
    assert ms2["points"] == ms["points"]


def test_perf_panel_has_baseline(demo_library):
    s = _session(demo_library)
    non_member = next(m for m in range(demo_library.n_models) if m not in s.ensemble.members)
    s.toggle_model(non_member)
    panel = s.perf_panel()
    assert panel["initial_members"] != panel["members"]
    assert panel["initial_auto"] == s.initial_auto_ensemble.perf.to_json()
    assert len(panel["member_specs"]) == len(panel["members"])


def test_viz_sample_limits_frame(demo_library):
    s = _session(demo_library, viz_sample=50, seed=1)
    assert len(s.viz_ids) == 50
    frame = s.get_frame()
    assert len(frame["frame"]["points"]) == 50
    s2 = _session(demo_library, viz_sample=50, seed=1)
    assert np.array_equal(s.viz_ids, s2.viz_ids)


def test_session_store(demo_library):
    store = SessionStore(demo_library)
    a = store.create()
    b = store.create()
    assert (a.session_id, b.session_id) == ("s1", "s2")
    assert store.get("s2") is b
    with pytest.raises(SessionError):
        store.get("s99")


def test_snapshot_to_disk(demo_library, tmp_path):
    s = _session(demo_library)
    path = tmp_path / "session.json"
    s.snapshot_to(path)
    snap = json.loads(path.read_text())
    assert snap["members"] == sorted(s.ensemble.members)
    assert snap["library_fingerprint"] == demo_library.fingerprint
    assert path.read_text() == s.state_json()


def test_projection_modes_render(demo_library):
    s = _session(demo_library, tsne_perplexity=8.0, tsne_iters=120)
    for mode in ("pca", "mds", "tsne"):
        resp = s.get_frame(mode=mode)
        assert len(resp["frame"]["points"]) == len(s.viz_ids)
        xs = [p["x"] for p in resp["frame"]["points"]]
        assert np.isfinite(xs).all()


def test_invalid_layout_mode(demo_library):
    s = _session(demo_library)
    with pytest.raises(Exception):
        s.get_frame(mode="umap")
    with pytest.raises(Exception):
        s.get_frame(mode="attribute:ghost")
