"""Interactive session: current ensemble, data selection, filters and layouts.

A session binds one loaded library to the two update triggers of the
exploration loop: selecting data recomputes per-model local accuracies,
toggling models recombines the ensemble and refreshes the data space. All
mutations of one session are serialized behind a lock and bump a monotone
revision counter; reads snapshot the last committed revision. The ensemble
chosen by the automatic search at creation time stays available as the
always-visible baseline.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass

import numpy as np

from . import ensemble as ens
from . import layout as lay
from .dataio import Dataset
from .library import ModelLibrary
from .metrics import MetricError, local_accuracy_all_models

GUARD_MODES = ("off", "warn", "strict")
DEFAULT_AXES = ("auc_w", "div_q")


class SessionError(ValueError):
    """Invalid session operations (bad ids, last-member removal, bad modes)."""


@dataclass
class GuardPolicy:
    mode: str = "warn"
    tolerance: float = 0.0


@dataclass
class SessionConfig:
    hillclimb: str = "acc_cv"
    max_size: int = 10
    bags: int = 1
    bag_fraction: float = 0.5
    seed: int = 0
    guard: GuardPolicy = None  # type: ignore[assignment]
    grid_cols: int = 24
    grid_rows: int = 12
    viz_sample: int | None = None
    tsne_perplexity: float = 30.0
    tsne_iters: int = 1000

    def __post_init__(self):
        if self.guard is None:
            self.guard = GuardPolicy()
        if self.guard.mode not in GUARD_MODES:
            raise SessionError(f"guard mode must be one of {GUARD_MODES}")


class Session:
    """One analyst's interactive state over a shared, read-only library."""

    def __init__(self, session_id: str, lib: ModelLibrary, config: SessionConfig | None = None):
        self.session_id = session_id
        self.lib = lib
        self.config = config or SessionConfig()
        self._lock = threading.RLock()

        trace = ens.auto_select(
            lib,
            hillclimb=self.config.hillclimb,
            max_size=self.config.max_size,
            bags=self.config.bags,
            bag_fraction=self.config.bag_fraction,
            seed=self.config.seed,
        )
        self.auto_trace = trace
        self.ensemble = ens.evaluate(lib, trace.final_members)
        self.initial_auto_ensemble = self.ensemble
        self.raw_selection: tuple[int, ...] = ()
        self.errors_filter = False
        self.layout_mode = f"attribute:{lib.dataset.attributes[0].name}"
        self.axis_x, self.axis_y = DEFAULT_AXES
        self.revision = 0

        test_ids = lib.dataset.test_indices
        n_viz = self.config.viz_sample
        if n_viz is not None and n_viz < len(test_ids):
            rng = np.random.RandomState(self.config.seed)
            pick = rng.choice(len(test_ids), size=n_viz, replace=False)
            self.viz_ids = np.sort(test_ids[pick])
        else:
            self.viz_ids = test_ids
        self._projection_coords: dict[str, np.ndarray] = {}

    # --- selection state ----------------------------------------------------

    def effective_selection(self) -> tuple[int, ...]:
        """Raw selection, restricted to currently misclassified rows when the
        errors filter is on."""
        if not self.errors_filter:
            return self.raw_selection
        if not self.raw_selection:
            return ()
        ids = np.asarray(self.raw_selection, dtype=np.int64)
        positions = self.lib.test_positions(ids)
        wrong = ~self.ensemble.correct[positions]
        return tuple(int(i) for i in ids[wrong])

    def _local_accuracies(self):
        eff = self.effective_selection()
        if not eff:
            return None
        return local_accuracy_all_models(self.lib, eff)

    def _ensemble_local_accuracy(self, ids) -> float:
        positions = self.lib.test_positions(ids)
        return float(self.ensemble.correct[positions].mean())

    # --- mutations ------------------------------------------------------------

    def set_selection(self, ids=None, rect=None) -> dict:
        """Store a new data selection (explicit test ids, or a rectangle
        resolved against the current layout frame)."""
        with self._lock:
            if (ids is None) == (rect is None):
                raise SessionError("provide exactly one of ids / rect")
            if rect is not None:
                frame = self._build_frame()
                sel = _rect_ids(frame, rect)
            else:
                sel = np.asarray(sorted(set(int(i) for i in ids)), dtype=np.int64)
                if len(sel):
                    self.lib.test_positions(sel)  # validates membership in the test set
            self.raw_selection = tuple(int(i) for i in sel)
            self.revision += 1
            return self._selection_response()

    def set_errors_filter(self, on: bool) -> dict:
        with self._lock:
            self.errors_filter = bool(on)
            self.revision += 1
            return self._selection_response()

    def toggle_model(self, model_id: int) -> dict:
        """Toggle membership; under a strict guard a violating toggle is
        rolled back and does not change state or revision."""
        with self._lock:
            model_id = int(model_id)
            if not 0 <= model_id < self.lib.n_models:
                raise SessionError(f"unknown model id {model_id}")
            if model_id in self.ensemble.members and len(self.ensemble.members) == 1:
                raise SessionError("cannot remove the last ensemble member")
            before = self.ensemble
            after = ens.toggle(self.lib, before, model_id)
            verdict = ens.guard_check(before, after, self.config.guard.tolerance)
            applied = True
            if self.config.guard.mode == "strict" and not verdict.ok:
                applied = False
            if applied:
                self.ensemble = after
                self.revision += 1
            return {
                "revision": self.revision,
                "applied": applied,
                "model_id": model_id,
                "action": "remove" if model_id in before.members else "add",
                "guard": {"mode": self.config.guard.mode, "ok": verdict.ok,
                          "delta": verdict.delta},
                "members": list(self.ensemble.members),
                "perf": self.ensemble.perf.to_json(),
            }

    def reset_to_auto(self) -> dict:
        """Return to the automatically selected baseline ensemble; the
        selection and filter survive."""
        with self._lock:
            self.ensemble = self.initial_auto_ensemble
            self.revision += 1
            return {
                "revision": self.revision,
                "members": list(self.ensemble.members),
                "perf": self.ensemble.perf.to_json(),
            }

    def set_layout_mode(self, mode: str) -> bool:
        """Switch the layout mode; returns True when this was a change."""
        with self._lock:
            _validate_mode(mode, self.lib.dataset)
            if mode == self.layout_mode:
                return False
            self.layout_mode = mode
            self.revision += 1
            return True

    def set_axes(self, axis_x: str, axis_y: str) -> bool:
        with self._lock:
            if (axis_x, axis_y) == (self.axis_x, self.axis_y):
                return False
            self.axis_x, self.axis_y = axis_x, axis_y
            self.revision += 1
            return True

    # --- reads ----------------------------------------------------------------

    def get_frame(self, mode: str | None = None) -> dict:
        """Current frame, both density grids and the performance panel, all
        derived from one revision. Passing a different ``mode`` switches the
        layout first."""
        with self._lock:
            if mode is not None:
                self.set_layout_mode(mode)
            frame = self._build_frame()
            grid_all = lay.density_grid(frame, self.config.grid_cols, self.config.grid_rows, "all")
            grid_err = lay.density_grid(frame, self.config.grid_cols, self.config.grid_rows, "errors")
            return {
                "revision": self.revision,
                "frame": frame.to_json(),
                "density": grid_all.to_json(),
                "density_errors": grid_err.to_json(),
                "perf_panel": self.perf_panel(),
            }

    def model_space(self, axis_x: str | None = None, axis_y: str | None = None) -> dict:
        """Model scatter under the session axes (optionally changing them)."""
        with self._lock:
            if axis_x is not None or axis_y is not None:
                self.set_axes(axis_x or self.axis_x, axis_y or self.axis_y)
            eff = self.effective_selection()
            try:
                points = lay.model_space_coords(
                    self.lib, self.axis_x, self.axis_y, self.ensemble.members, eff or None
                )
                available = True
                reason = ""
            except MetricError as exc:
                points = []
                available = False
                reason = str(exc)
            return {
                "revision": self.revision,
                "axis_x": self.axis_x,
                "axis_y": self.axis_y,
                "available": available,
                "reason": reason,
                "points": points,
            }

    def run_cv(self) -> dict:
        """The cross-validation button: a pure average over out-of-fold
        caches, no retraining."""
        with self._lock:
            return {
                "revision": self.revision,
                "folds": self.lib.dataset.n_folds,
                "accuracy_cv": self.ensemble.perf.accuracy_cv,
            }

    def perf_panel(self) -> dict:
        with self._lock:
            return {
                "current": self.ensemble.perf.to_json(),
                "initial_auto": self.initial_auto_ensemble.perf.to_json(),
                "members": list(self.ensemble.members),
                "initial_members": list(self.initial_auto_ensemble.members),
                "member_specs": [self.lib.spec_label(m) for m in self.ensemble.members],
                "cv_folds": self.lib.dataset.n_folds,
            }

    def _selection_response(self) -> dict:
        eff = self.effective_selection()
        local = self._local_accuracies()
        resp = {
            "revision": self.revision,
            "selection_size": len(self.raw_selection),
            "selected_ids": list(self.raw_selection),
            "effective_size": len(eff),
            "errors_filter": self.errors_filter,
            "empty_effective": len(eff) == 0,
            "local_accuracies": None if local is None else [float(v) for v in local],
        }
        if eff:
            resp["ensemble_local_accuracy"] = self._ensemble_local_accuracy(eff)
        if "acc_local" in (self.axis_x, self.axis_y):
            resp["model_space"] = self.model_space()
        return resp

    def _build_frame(self) -> lay.LayoutFrame:
        ds = self.lib.dataset
        mode = self.layout_mode
        if mode.startswith("attribute:"):
            attr = ds.attribute(mode.split(":", 1)[1])
            return lay.attribute_layout(self.ensemble, ds, attr, self.viz_ids)
        coords = self._projection(mode)
        return lay.projection_frame(mode, coords, self.ensemble, ds, self.viz_ids,
                                    seed=self.config.seed)

    def _projection(self, mode: str) -> np.ndarray:
        # coordinates depend only on the data and seed, never on the ensemble
        if mode not in self._projection_coords:
            positions = np.searchsorted(self.lib.dataset.test_indices, self.viz_ids)
            x = self.lib.view.matrix[self.lib.dataset.test_indices][positions]
            if mode == "pca":
                coords = lay.pca_2d(x).coords
            elif mode == "mds":
                coords = lay.mds_2d(np.sqrt(lay._pairwise_sq(x))).coords
            elif mode == "tsne":
                coords = lay.tsne_2d(
                    x,
                    perplexity=self.config.tsne_perplexity,
                    iters=self.config.tsne_iters,
                    seed=self.config.seed,
                ).coords
            else:
                raise SessionError(f"unknown layout mode {mode!r}")
            self._projection_coords[mode] = coords
        return self._projection_coords[mode]

    # --- replay / persistence -------------------------------------------------

    def state_json(self) -> str:
        """Canonical serialization of the session state (derived matrices
        excluded); identical states produce identical bytes."""
        with self._lock:
            state = {
                "session_id": self.session_id,
                "revision": self.revision,
                "members": sorted(self.ensemble.members),
                "initial_members": sorted(self.initial_auto_ensemble.members),
                "raw_selection": list(self.raw_selection),
                "errors_filter": self.errors_filter,
                "layout_mode": self.layout_mode,
                "axis_x": self.axis_x,
                "axis_y": self.axis_y,
                "guard": {"mode": self.config.guard.mode,
                          "tolerance": repr(self.config.guard.tolerance)},
                "perf": {k: repr(v) for k, v in self.ensemble.perf.to_json().items()},
                "library_fingerprint": self.lib.fingerprint,
            }
            return json.dumps(state, sort_keys=True, separators=(",", ":"))

    def state_digest(self) -> str:
        return hashlib.sha256(self.state_json().encode()).hexdigest()

    def snapshot_to(self, path) -> None:
        """Write the canonical state snapshot to disk."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.state_json())


def _validate_mode(mode: str, ds: Dataset) -> None:
    if mode.startswith("attribute:"):
        ds.attribute(mode.split(":", 1)[1])
        return
    if mode not in ("pca", "mds", "tsne"):
        raise SessionError(f"unknown layout mode {mode!r}")


def _rect_ids(frame: lay.LayoutFrame, rect: dict) -> np.ndarray:
    try:
        x0, x1 = float(rect["x0"]), float(rect["x1"])
        y0, y1 = float(rect["y0"]), float(rect["y1"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SessionError(f"malformed rectangle {rect!r}") from exc
    if x1 < x0:
        x0, x1 = x1, x0
    if y1 < y0:
        y0, y1 = y1, y0
    mask = (frame.x >= x0) & (frame.x < x1) & (frame.y >= y0) & (frame.y < y1)
    return np.sort(frame.instance_ids[mask])


class SessionStore:
    """Registry of live sessions over one loaded library."""

    def __init__(self, lib: ModelLibrary):
        self.lib = lib
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()
        self._counter = 0

    def create(self, config: SessionConfig | None = None) -> Session:
        with self._lock:
            self._counter += 1
            sid = f"s{self._counter}"
            session = Session(sid, self.lib, config)
            self._sessions[sid] = session
            return session

    def get(self, session_id: str) -> Session:
        with self._lock:
            if session_id not in self._sessions:
                raise SessionError(f"no such session {session_id!r}")
            return self._sessions[session_id]
