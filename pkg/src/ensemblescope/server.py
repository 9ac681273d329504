"""HTTP/JSON API over sessions; every response carries the session revision."""

from __future__ import annotations

import os

from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import FileResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .library import ModelLibrary, load_library
from .metrics import MetricError
from .session import GuardPolicy, SessionConfig, SessionError, SessionStore


class CreateSessionBody(BaseModel):
    hillclimb: str = "acc_cv"
    max_size: int = 10
    bags: int = 1
    bag_fraction: float = 0.5
    seed: int = 0
    guard_mode: str = "warn"
    guard_tolerance: float = 0.0
    grid_cols: int = 24
    grid_rows: int = 12
    viz_sample: int | None = None
    tsne_perplexity: float = 30.0
    tsne_iters: int = 1000


class SelectionBody(BaseModel):
    ids: list[int] | None = None
    rect: dict | None = None


class ErrorsFilterBody(BaseModel):
    on: bool


def create_app(
    lib: ModelLibrary, ui_dir: str | None = None, default_viz_sample: int | None = None
) -> FastAPI:
    app = FastAPI(title="ensemblescope", version="0.1.0")
    store = SessionStore(lib)

    def _get(session_id: str):
        try:
            return store.get(session_id)
        except SessionError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc

    def _wrap(fn):
        try:
            return fn()
        except (SessionError, MetricError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc

    @app.get("/library")
    def library_info():
        ds = lib.dataset
        return {
            "classes": list(ds.classes),
            "n_test": int(len(ds.test_indices)),
            "n_train": int(len(ds.train_indices)),
            "n_folds": ds.n_folds,
            "n_models": lib.n_models,
            "attributes": [{"name": a.name, "kind": a.kind} for a in ds.attributes],
            "metric_names": ["acc", "auc_w", "acc_cv", "div_q", "acc_local"]
            + [f"f1:{c}" for c in ds.classes],
            "models": [
                {"model_id": i, "spec_id": lib.spec_label(i), **lib.model_metrics[i].to_json()}
                for i in range(lib.n_models)
            ],
            "failures": [{"spec_id": f.spec_id, "error": f.error} for f in lib.failures],
        }

    @app.get("/library/rows")
    def library_rows(ids: str = Query(default="")):
        """Raw attribute values of test instances, for the selection table."""
        ds = lib.dataset
        try:
            wanted = [int(v) for v in ids.split(",") if v.strip() != ""]
            if wanted:
                lib.test_positions(wanted)  # refuse anything outside the test set
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        rows = []
        for inst in wanted:
            values = {}
            for a, col in zip(ds.attributes, ds.columns):
                v = col[inst]
                values[a.name] = a.categories[int(v)] if a.kind == "categorical" else float(v)
            rows.append({"id": inst, "label": ds.classes[int(ds.labels[inst])],
                         "values": values})
        return {"rows": rows}

    @app.post("/sessions")
    def create_session(body: CreateSessionBody):
        def run():
            config = SessionConfig(
                hillclimb=body.hillclimb,
                max_size=body.max_size,
                bags=body.bags,
                bag_fraction=body.bag_fraction,
                seed=body.seed,
                guard=GuardPolicy(body.guard_mode, body.guard_tolerance),
                grid_cols=body.grid_cols,
                grid_rows=body.grid_rows,
                viz_sample=body.viz_sample if body.viz_sample is not None
                else default_viz_sample,
                tsne_perplexity=body.tsne_perplexity,
                tsne_iters=body.tsne_iters,
            )
            session = store.create(config)
            return {
                "session_id": session.session_id,
                "revision": session.revision,
                "members": list(session.ensemble.members),
                "perf": session.ensemble.perf.to_json(),
                "auto_trace": session.auto_trace.to_json(),
                "layout_mode": session.layout_mode,
                "axis_x": session.axis_x,
                "axis_y": session.axis_y,
            }

        return _wrap(run)

    @app.get("/sessions/{session_id}/frame")
    def get_frame(session_id: str, mode: str | None = Query(default=None)):
        session = _get(session_id)
        return _wrap(lambda: session.get_frame(mode))

    @app.post("/sessions/{session_id}/selection")
    def set_selection(session_id: str, body: SelectionBody):
        session = _get(session_id)
        return _wrap(lambda: session.set_selection(ids=body.ids, rect=body.rect))

    @app.post("/sessions/{session_id}/models/{model_id}/toggle")
    def toggle_model(session_id: str, model_id: int):
        session = _get(session_id)
        return _wrap(lambda: session.toggle_model(model_id))

    @app.post("/sessions/{session_id}/errors-filter")
    def errors_filter(session_id: str, body: ErrorsFilterBody):
        session = _get(session_id)
        return _wrap(lambda: session.set_errors_filter(body.on))

    @app.get("/sessions/{session_id}/model-space")
    def model_space(
        session_id: str,
        x: str | None = Query(default=None),
        y: str | None = Query(default=None),
    ):
        session = _get(session_id)
        return _wrap(lambda: session.model_space(x, y))

    @app.post("/sessions/{session_id}/cv")
    def run_cv(session_id: str):
        session = _get(session_id)
        return _wrap(session.run_cv)

    @app.post("/sessions/{session_id}/reset")
    def reset(session_id: str):
        session = _get(session_id)
        return _wrap(session.reset_to_auto)

    @app.get("/sessions/{session_id}/perf")
    def perf(session_id: str):
        session = _get(session_id)
        return _wrap(lambda: {"revision": session.revision, **session.perf_panel()})

    if ui_dir and os.path.isdir(ui_dir):
        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

        @app.get("/")
        def index():
            return FileResponse(os.path.join(ui_dir, "index.html"))

    return app


def serve(
    lib_dir: str,
    host: str = "127.0.0.1",
    port: int = 8000,
    ui_dir: str | None = None,
    viz_sample: int | None = None,
):
    import uvicorn

    lib = load_library(lib_dir)
    app = create_app(lib, ui_dir=ui_dir, default_viz_sample=viz_sample)
    uvicorn.run(app, host=host, port=port, log_level="info")
