"""Command-line entry points: build libraries, select ensembles, export
layouts, serve the API, replay recorded sessions, generate demo data."""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import ensemble as ens
from . import layout as lay
from . import synth
from .dataio import load_csv, split_and_fold
from .library import build_library, load_library, save_library
from .models import GRID_DESCRIPTION, default_grid, small_grid


def _cols_arg(value: str | None) -> list[str]:
    return [c.strip() for c in value.split(",") if c.strip()] if value else []


def cmd_synth_data(args) -> int:
    info = synth.write_csv(args.out, n_rows=args.rows, seed=args.seed)
    print(f"wrote {args.out}: {info['rows']} rows, "
          f"{info['positive']} positive, {info['with_missing']} with missing values")
    return 0


def cmd_build_lib(args) -> int:
    hints = {c: "categorical" for c in _cols_arg(args.categorical)}
    hints.update({c: "numeric" for c in _cols_arg(args.numeric)})
    ds = load_csv(args.data, args.label, hints or None)
    print(f"loaded {ds.n_rows} rows ({ds.dropped_rows} dropped), "
          f"{len(ds.attributes)} attributes, classes: {list(ds.classes)}")
    ds = split_and_fold(ds, args.test_fraction, args.folds, args.seed)
    print(f"split: {len(ds.train_indices)} train / {len(ds.test_indices)} test, "
          f"{ds.n_folds} folds")
    specs = small_grid() if args.grid == "small" else default_grid()
    t0 = time.time()

    def progress(done, total, spec_id, status):
        print(f"[{done}/{total}] {spec_id}: {status}", flush=True)

    lib = build_library(ds, specs, seed=args.seed, n_jobs=args.jobs,
                        progress=progress, grid_description=GRID_DESCRIPTION)
    save_library(lib, args.out)
    print(f"built {lib.n_models} models ({len(lib.failures)} failures) "
          f"in {time.time() - t0:.1f}s -> {args.out}")
    return 0


def cmd_auto_select(args) -> int:
    lib = load_library(args.lib)
    trace = ens.auto_select(
        lib,
        hillclimb=args.metric,
        max_size=args.max_size,
        bags=args.bags,
        bag_fraction=args.bag_fraction,
        seed=args.seed,
    )
    print(f"# hillclimb={trace.hillclimb_metric} max_size={trace.max_size} "
          f"bags={trace.bags} bag_fraction={trace.bag_fraction} seed={trace.seed}")
    for s in trace.steps:
        print(f"{s.action:6s} model {s.model_id:3d} "
              f"({lib.spec_label(s.model_id)})  {trace.hillclimb_metric}={s.value:.6f}")
    state = ens.evaluate(lib, trace.final_members)
    print(f"final members: {list(trace.final_members)}")
    print(f"test accuracy={state.perf.accuracy_test:.4f} "
          f"auc={state.perf.auc_weighted_test:.4f} cv accuracy={state.perf.accuracy_cv:.4f}")
    out = {
        "members": list(trace.final_members),
        "perf": state.perf.to_json(),
        "trace": trace.to_json(),
    }
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(out, fh, indent=1, sort_keys=True)
    print(f"wrote {args.out}")
    return 0


def cmd_export_layout(args) -> int:
    lib = load_library(args.lib)
    if args.members:
        members = [int(m) for m in args.members.split(",")]
    else:
        members = list(ens.auto_select(lib, seed=args.seed).final_members)
    state = ens.evaluate(lib, members)
    ds = lib.dataset
    mode = args.mode
    if mode.startswith("attribute:"):
        frame = lay.attribute_layout(state, ds, ds.attribute(mode.split(":", 1)[1]))
    else:
        test_rows = lib.view.matrix[ds.test_indices]
        if mode == "pca":
            coords = lay.pca_2d(test_rows).coords
        elif mode == "mds":
            coords = lay.mds_2d(np.sqrt(lay._pairwise_sq(test_rows))).coords
        elif mode == "tsne":
            coords = lay.tsne_2d(test_rows, perplexity=args.perplexity,
                                 iters=args.iters, seed=args.seed).coords
        else:
            print(f"unknown mode {mode!r}", file=sys.stderr)
            return 2
        frame = lay.projection_frame(mode, coords, state, ds, ds.test_indices, seed=args.seed)
    out = {"seed": args.seed, "members": members, **frame.to_json()}
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(out, fh, indent=1, sort_keys=True)
    print(f"wrote {args.out}: {frame.n_points} points, mode {frame.mode}")
    return 0


def cmd_serve(args) -> int:
    from .server import serve

    serve(args.lib, host=args.host, port=args.port, ui_dir=args.ui,
          viz_sample=args.viz_sample)
    return 0


def cmd_replay(args) -> int:
    from .replay import run_script

    results = run_script(args.script, out_stream=sys.stdout)
    return 0 if all(r["ok"] for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ensemblescope",
        description="Interactive exploration engine for classifier ensembles",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-data", help="generate the census-style demo CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--rows", type=int, default=10000)
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(fn=cmd_synth_data)

    p = sub.add_parser("build-lib", help="train the model library and cache predictions")
    p.add_argument("--data", required=True)
    p.add_argument("--label", required=True)
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--categorical", help="comma-separated columns forced categorical")
    p.add_argument("--numeric", help="comma-separated columns forced numeric")
    p.add_argument("--grid", choices=["default", "small"], default="default")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_build_lib)

    p = sub.add_parser("auto-select", help="run greedy ensemble selection")
    p.add_argument("--lib", required=True)
    p.add_argument("--metric", default="acc_cv", choices=["acc_cv", "auc_cv"])
    p.add_argument("--max-size", type=int, default=10)
    p.add_argument("--bags", type=int, default=1)
    p.add_argument("--bag-fraction", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="ensemble.json")
    p.set_defaults(fn=cmd_auto_select)

    p = sub.add_parser("export-layout", help="write one layout frame as JSON")
    p.add_argument("--lib", required=True)
    p.add_argument("--mode", required=True,
                   help="attribute:<name> | pca | mds | tsne")
    p.add_argument("--members", help="comma-separated model ids (default: auto-select)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--perplexity", type=float, default=30.0)
    p.add_argument("--iters", type=int, default=1000)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_export_layout)

    p = sub.add_parser("serve", help="serve the session HTTP API")
    p.add_argument("--lib", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--ui", help="directory of built UI assets to mount at /ui")
    p.add_argument("--viz-sample", type=int, default=None,
                   help="visualize only this many test points per session "
                        "(default: the full test set)")
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("replay", help="execute a recorded JSONL call sequence")
    p.add_argument("--script", required=True)
    p.set_defaults(fn=cmd_replay)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
