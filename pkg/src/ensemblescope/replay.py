"""Headless execution of recorded session call sequences.

A replay script is JSONL: one operation per line, mirroring the HTTP API
(create_session, frame, selection, toggle, errors_filter, model_space, cv,
reset, perf) plus three workflow helpers: ``select_density_cell`` picks the
densest heat-map cell of a class bin and selects its points,
``improve_selection`` walks non-members ranked by local accuracy and commits
the first toggle that fixes selected errors without hurting the global
score, and ``state_digest`` emits a canonical state hash so two replays can
be compared byte for byte.
"""

from __future__ import annotations

import json

import numpy as np

from . import ensemble as ens
from . import layout as lay
from .library import load_library
from .metrics import local_accuracy_all_models
from .session import GuardPolicy, Session, SessionConfig, SessionError


class ReplayError(ValueError):
    pass


def _session_config(args: dict) -> SessionConfig:
    guard = GuardPolicy(args.get("guard_mode", "warn"), args.get("guard_tolerance", 0.0))
    keys = ("hillclimb", "max_size", "bags", "bag_fraction", "seed", "grid_cols",
            "grid_rows", "viz_sample", "tsne_perplexity", "tsne_iters")
    kwargs = {k: args[k] for k in keys if k in args}
    return SessionConfig(guard=guard, **kwargs)


def select_density_cell(session: Session, class_name=None, subset: str = "errors",
                        cols: int | None = None, rows: int | None = None) -> dict:
    """Select the points of the densest grid cell, optionally restricted to
    one predicted-class bin of an attribute layout."""
    frame = session._build_frame()
    grid = lay.density_grid(
        frame, cols or session.config.grid_cols, rows or session.config.grid_rows, subset
    )
    counts = grid.counts.astype(np.int64).copy()
    if class_name is not None:
        classes = session.lib.dataset.classes
        cls = classes.index(class_name) if isinstance(class_name, str) else int(class_name)
        if not frame.mode.startswith("attribute:"):
            raise ReplayError("class-restricted cell selection needs an attribute layout")
        lo, hi = grid.x_extent
        width = (hi - lo) / grid.cols
        col_centers = lo + (np.arange(grid.cols) + 0.5) * width
        outside = (col_centers < cls) | (col_centers >= cls + 1)
        counts[outside, :] = -1
    flat = int(np.argmax(counts))  # ties: lowest (col, row)
    col, row = divmod(flat, grid.rows)
    if counts[col, row] <= 0:
        session.set_selection(ids=[])
        return {"revision": session.revision, "found": False, "count": 0}
    ids = lay.cell_instance_ids(frame, grid, col, row, subset)
    resp = session.set_selection(ids=[int(i) for i in ids])
    return {
        "found": True,
        "cell": {"col": col, "row": row},
        "count": int(counts[col, row]),
        **resp,
    }


def improve_selection(session: Session, max_candidates: int = 10,
                      tolerance: float = 0.005) -> dict:
    """Try the top non-member candidates by local accuracy; commit the first
    toggle that raises local accuracy, fixes at least one selected error and
    costs at most ``tolerance`` global test accuracy. Reports an explicit
    no-candidate outcome when none qualifies."""
    eff = session.effective_selection()
    if not eff:
        return {"revision": session.revision, "no_candidate": True,
                "reason": "empty selection"}
    lib = session.lib
    ids = np.asarray(eff, dtype=np.int64)
    positions = lib.test_positions(ids)
    before = session.ensemble
    local_before = float(before.correct[positions].mean())
    local_all = local_accuracy_all_models(lib, eff)
    records = {r.model_id: r for r in lib.model_metrics}
    non_members = [m for m in range(lib.n_models) if m not in before.members]
    ranked = sorted(
        non_members,
        key=lambda m: (-local_all[m], -records[m].accuracy_test, m),
    )[:max_candidates]

    tried = []
    for candidate in ranked:
        after = ens.toggle(lib, before, candidate)
        local_after = float(after.correct[positions].mean())
        global_delta = after.perf.accuracy_test - before.perf.accuracy_test
        fixed = int((~before.correct[positions] & after.correct[positions]).sum())
        entry = {
            "model_id": candidate,
            "spec_id": lib.spec_label(candidate),
            "acc_local": float(local_all[candidate]),
            "local_before": local_before,
            "local_after": local_after,
            "global_delta": global_delta,
            "fixed": fixed,
        }
        tried.append(entry)
        if local_after > local_before and global_delta >= -tolerance and fixed >= 1:
            resp = session.toggle_model(candidate)
            if not resp["applied"]:
                continue  # the session guard vetoed it; try the next candidate
            return {
                "no_candidate": False,
                "committed": entry,
                "toggle": resp,
                "tried": tried,
            }
    return {"revision": session.revision, "no_candidate": True, "tried": tried,
            "reason": "no candidate improves the selection within tolerance"}


def run_ops(ops: list[dict], lib_cache: dict | None = None) -> list[dict]:
    """Execute a parsed op sequence; returns one result dict per op."""
    lib_cache = lib_cache if lib_cache is not None else {}
    session: Session | None = None
    results = []
    for i, op in enumerate(ops):
        kind = op.get("op")
        args = {k: v for k, v in op.items() if k != "op"}
        try:
            if kind == "create_session":
                lib_dir = args.pop("lib")
                if lib_dir not in lib_cache:
                    lib_cache[lib_dir] = load_library(lib_dir)
                session = Session("s1", lib_cache[lib_dir], _session_config(args))
                out = {
                    "session_id": session.session_id,
                    "revision": session.revision,
                    "members": list(session.ensemble.members),
                    "perf": session.ensemble.perf.to_json(),
                }
            elif session is None:
                raise ReplayError("first op must be create_session")
            elif kind == "frame":
                out = session.get_frame(args.get("mode"))
                out = {k: out[k] for k in ("revision", "density", "density_errors", "perf_panel")} | {
                    "frame_points": len(out["frame"]["points"]),
                    "frame_mode": out["frame"]["mode"],
                }
            elif kind == "selection":
                out = session.set_selection(ids=args.get("ids"), rect=args.get("rect"))
            elif kind == "toggle":
                out = session.toggle_model(args["model_id"])
            elif kind == "errors_filter":
                out = session.set_errors_filter(args["on"])
            elif kind == "model_space":
                out = session.model_space(args.get("x"), args.get("y"))
            elif kind == "cv":
                out = session.run_cv()
            elif kind == "reset":
                out = session.reset_to_auto()
            elif kind == "perf":
                out = {"revision": session.revision, **session.perf_panel()}
            elif kind == "select_density_cell":
                out = select_density_cell(
                    session,
                    class_name=args.get("class"),
                    subset=args.get("subset", "errors"),
                    cols=args.get("cols"),
                    rows=args.get("rows"),
                )
            elif kind == "improve_selection":
                out = improve_selection(
                    session,
                    max_candidates=args.get("max_candidates", 10),
                    tolerance=args.get("tolerance", 0.005),
                )
            elif kind == "state_digest":
                out = {
                    "revision": session.revision,
                    "digest": session.state_digest(),
                    "state": session.state_json(),
                }
            else:
                raise ReplayError(f"unknown op {kind!r}")
            results.append({"op": kind, "ok": True, "result": out})
        except (SessionError, ReplayError, KeyError, ValueError) as exc:
            results.append({"op": kind, "ok": False, "error": f"{type(exc).__name__}: {exc}"})
    return results


def run_script(path, out_stream=None, lib_cache=None) -> list[dict]:
    """Run a JSONL script file; prints one JSON line per op when a stream is
    given."""
    with open(path, encoding="utf-8") as fh:
        ops = [json.loads(line) for line in fh if line.strip()]
    results = run_ops(ops, lib_cache)
    if out_stream is not None:
        for r in results:
            out_stream.write(json.dumps(r, sort_keys=True) + "\n")
    return results
