"""Build, persist and reload the model library (the overproduction phase).

For every spec the build trains F fold models for out-of-fold predictions
plus one full-train model for test predictions, caches both probability
blocks at float32 precision (the on-disk precision, so save/load round-trips
are bit-exact), and precomputes the per-model metric record. A failed spec is
recorded and skipped; the library builds from the survivors.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
import multiprocessing
import os
from dataclasses import dataclass, field

import numpy as np

from . import binio, metrics
from .dataio import Attribute, Dataset, EncodedView, encode
from .models import ModelSpec, derive_seed, predict_proba, train

FORMAT_VERSION = 1
MANIFEST_NAME = "manifest.json"


class LibraryError(ValueError):
    """Unusable library directory, fingerprint mismatch, version mismatch."""


@dataclass
class PredictionCache:
    """Cached probability blocks for one model.

    ``test_probs`` covers test rows in ascending row-id order; ``cv_probs``
    row i is the out-of-fold prediction for the i-th training row (the fold
    model trained without that row's fold). Values are float32-quantized.
    """

    model_id: int
    test_probs: np.ndarray
    cv_probs: np.ndarray


@dataclass
class BuildFailure:
    spec_id: str
    error: str


@dataclass
class ModelLibrary:
    """All trained models plus caches, metrics and the build manifest."""

    dataset: Dataset
    view: EncodedView
    specs: list[ModelSpec]
    seed: int
    models: list
    caches: list[PredictionCache]
    model_metrics: list[metrics.MetricRecord]
    failures: list[BuildFailure] = field(default_factory=list)
    grid_description: dict = field(default_factory=dict)

    @property
    def n_models(self) -> int:
        return len(self.models)

    @property
    def fingerprint(self) -> str:
        return self.dataset.fingerprint()

    def test_positions(self, instance_ids) -> np.ndarray:
        """Map global test-row ids to positions inside the test block."""
        ids = np.asarray(sorted(set(int(i) for i in instance_ids)), dtype=np.int64)
        test_idx = self.dataset.test_indices
        pos = np.searchsorted(test_idx, ids)
        bad = (pos >= len(test_idx)) | (test_idx[np.minimum(pos, len(test_idx) - 1)] != ids)
        if bad.any():
            raise LibraryError(f"instance ids not in test set: {ids[bad][:5].tolist()}")
        return pos

    def spec_label(self, model_id: int) -> str:
        return self.specs[model_id].spec_id


def _build_one_spec(spec: ModelSpec, ds: Dataset, view: EncodedView, seed: int):
    train_idx = ds.train_indices
    test_idx = ds.test_indices
    k = ds.n_classes
    train_folds = ds.folds[train_idx]
    cv = np.empty((len(train_idx), k))
    for f in range(ds.n_folds):
        in_fold = train_folds == f
        fit_rows = train_idx[~in_fold]
        fold_model = train(spec, view, fit_rows, ds.labels[fit_rows], k, seed)
        cv[in_fold] = predict_proba(fold_model, view, train_idx[in_fold])
    full = train(spec, view, train_idx, ds.labels[train_idx], k, seed)
    test = predict_proba(full, view, test_idx)
    # quantize to cache precision up front: what you compute is what persists
    test = test.astype(np.float32).astype(np.float64)
    cv = cv.astype(np.float32).astype(np.float64)
    return full, test, cv


_POOL_CTX: dict = {}


def _pool_init(ds, view, seed):
    _POOL_CTX["ds"] = ds
    _POOL_CTX["view"] = view
    _POOL_CTX["seed"] = seed


def _pool_job(item):
    idx, spec = item
    try:
        full, test, cv = _build_one_spec(spec, _POOL_CTX["ds"], _POOL_CTX["view"], _POOL_CTX["seed"])
        return idx, (full, test, cv), None
    except Exception as exc:  # recorded, not fatal: one bad spec must not kill the build
        return idx, None, f"{type(exc).__name__}: {exc}"


def compute_metric_records(
    caches: list[PredictionCache], ds: Dataset
) -> list[metrics.MetricRecord]:
    """Per-model metric records plus the shared diversity coordinates."""
    test_idx = ds.test_indices
    train_idx = ds.train_indices
    test_labels = ds.labels[test_idx]
    train_labels = ds.labels[train_idx]
    correct = np.empty((len(caches), len(train_idx)))
    records = []
    for i, cache in enumerate(caches):
        pred_test = metrics.argmax_labels(cache.test_probs)
        pred_cv = metrics.argmax_labels(cache.cv_probs)
        correct[i] = pred_cv == train_labels
        f1 = tuple(
            metrics.f_measure(pred_cv, train_labels, c).value for c in range(ds.n_classes)
        )
        records.append(
            metrics.MetricRecord(
                model_id=i,
                accuracy_test=metrics.accuracy(pred_test, test_labels),
                auc_weighted=metrics.auc_weighted(cache.cv_probs, train_labels).value,
                f_measure_per_class=f1,
                accuracy_cv=metrics.accuracy(pred_cv, train_labels),
                diversity_coord=0.0,
            )
        )
    div = metrics.diversity_coordinates(metrics.q_matrix(correct))
    return [
        metrics.MetricRecord(
            model_id=r.model_id,
            accuracy_test=r.accuracy_test,
            auc_weighted=r.auc_weighted,
            f_measure_per_class=r.f_measure_per_class,
            accuracy_cv=r.accuracy_cv,
            diversity_coord=float(div.coords[i]),
        )
        for i, r in enumerate(records)
    ]


def build_library(
    ds: Dataset,
    specs: list[ModelSpec],
    seed: int,
    n_jobs: int = 1,
    progress=None,
    grid_description: dict | None = None,
) -> ModelLibrary:
    """Train every spec and fill all prediction caches and metrics.

    ``n_jobs > 1`` trains specs in a process pool; results merge in spec
    order, so parallelism never changes the output. ``progress`` is called as
    ``progress(done, total, spec_id, status)`` after each spec.
    """
    if not specs:
        raise LibraryError("no specs to build")
    if ds.n_folds < 2 or not (ds.split == 1).any():
        raise LibraryError("dataset must be split and folded before building")
    view = encode(ds)

    results: list = [None] * len(specs)
    errors: list = [None] * len(specs)
    items = list(enumerate(specs))
    if n_jobs > 1:
        ctx = multiprocessing.get_context("fork")
        with concurrent.futures.ProcessPoolExecutor(
            max_workers=n_jobs, mp_context=ctx, initializer=_pool_init, initargs=(ds, view, seed)
        ) as pool:
            done = 0
            for idx, payload, err in pool.map(_pool_job, items):
                results[idx], errors[idx] = payload, err
                done += 1
                if progress:
                    progress(done, len(specs), specs[idx].spec_id, err or "ok")
    else:
        _pool_init(ds, view, seed)
        for done, (idx, spec) in enumerate(items, start=1):
            idx, payload, err = _pool_job((idx, spec))
            results[idx], errors[idx] = payload, err
            if progress:
                progress(done, len(specs), spec.spec_id, err or "ok")

    kept_specs: list[ModelSpec] = []
    models: list = []
    caches: list[PredictionCache] = []
    failures: list[BuildFailure] = []
    for idx, spec in enumerate(specs):
        if errors[idx] is not None:
            failures.append(BuildFailure(spec.spec_id, errors[idx]))
            continue
        full, test, cv = results[idx]
        model_id = len(models)
        kept_specs.append(spec)
        models.append(full)
        caches.append(PredictionCache(model_id=model_id, test_probs=test, cv_probs=cv))
    if not models:
        raise LibraryError("every spec failed to train; library is empty")

    return ModelLibrary(
        dataset=ds,
        view=view,
        specs=kept_specs,
        seed=seed,
        models=models,
        caches=caches,
        model_metrics=compute_metric_records(caches, ds),
        failures=failures,
        grid_description=dict(grid_description or {}),
    )


# --- persistence ------------------------------------------------------------

def _dataset_to_bytes(ds: Dataset) -> bytes:
    meta = {
        "classes": list(ds.classes),
        "n_folds": ds.n_folds,
        "dropped_rows": ds.dropped_rows,
        "attributes": [
            {
                "name": a.name,
                "kind": a.kind,
                "categories": list(a.categories),
                "vmin": a.vmin,
                "vmax": a.vmax,
            }
            for a in ds.attributes
        ],
    }
    arrays = {"labels": ds.labels, "split": ds.split, "folds": ds.folds}
    for i, col in enumerate(ds.columns):
        arrays[f"col_{i:04d}"] = col
    meta_bytes = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode()
    import struct

    return struct.pack("<I", len(meta_bytes)) + meta_bytes + binio._pack_arrays(arrays)


def _dataset_from_bytes(buf: bytes) -> Dataset:
    import struct

    (meta_len,) = struct.unpack_from("<I", buf, 0)
    meta = json.loads(buf[4 : 4 + meta_len].decode())
    arrays = binio._unpack_arrays(buf, 4 + meta_len, "dataset")
    attributes = tuple(
        Attribute(
            name=a["name"],
            kind=a["kind"],
            categories=tuple(a["categories"]),
            vmin=a["vmin"],
            vmax=a["vmax"],
        )
        for a in meta["attributes"]
    )
    columns = tuple(arrays[f"col_{i:04d}"] for i in range(len(attributes)))
    return Dataset(
        attributes=attributes,
        classes=tuple(meta["classes"]),
        columns=columns,
        labels=arrays["labels"],
        split=arrays["split"],
        folds=arrays["folds"],
        n_folds=meta["n_folds"],
        dropped_rows=meta["dropped_rows"],
    )


def save_library(lib: ModelLibrary, out_dir) -> None:
    """Write manifest.json, dataset.bin, models/<id>.bin and cache/<id>.f32.

    The manifest records a sha256 per binary file so any on-disk corruption
    is caught at load time with the offending model id.
    """
    os.makedirs(out_dir, exist_ok=True)
    os.makedirs(os.path.join(out_dir, "models"), exist_ok=True)
    os.makedirs(os.path.join(out_dir, "cache"), exist_ok=True)
    model_blobs = [binio.model_to_bytes(m) for m in lib.models]
    cache_blobs = [binio.cache_to_bytes(c.test_probs, c.cv_probs) for c in lib.caches]
    manifest = {
        "format_version": FORMAT_VERSION,
        "dataset_fingerprint": lib.fingerprint,
        "classes": list(lib.dataset.classes),
        "n_folds": lib.dataset.n_folds,
        "seed": lib.seed,
        "grid_description": lib.grid_description,
        "specs": [
            {**spec.to_json(), "derived_seed": derive_seed(lib.seed, spec.spec_id)}
            for spec in lib.specs
        ],
        "metrics": [r.to_json() for r in lib.model_metrics],
        "failures": [{"spec_id": f.spec_id, "error": f.error} for f in lib.failures],
        "model_sha256": [hashlib.sha256(b).hexdigest() for b in model_blobs],
        "cache_sha256": [hashlib.sha256(b).hexdigest() for b in cache_blobs],
    }
    with open(os.path.join(out_dir, MANIFEST_NAME), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
    with open(os.path.join(out_dir, "dataset.bin"), "wb") as fh:
        fh.write(_dataset_to_bytes(lib.dataset))
    for i, blob in enumerate(model_blobs):
        with open(os.path.join(out_dir, "models", f"{i}.bin"), "wb") as fh:
            fh.write(blob)
    for i, blob in enumerate(cache_blobs):
        with open(os.path.join(out_dir, "cache", f"{i}.f32"), "wb") as fh:
            fh.write(blob)


def load_library(lib_dir) -> ModelLibrary:
    """Reload a persisted library and verify its dataset fingerprint."""
    manifest_path = os.path.join(lib_dir, MANIFEST_NAME)
    if not os.path.exists(manifest_path):
        raise LibraryError(f"no {MANIFEST_NAME} in {lib_dir}")
    with open(manifest_path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("format_version") != FORMAT_VERSION:
        raise LibraryError(
            f"library format version {manifest.get('format_version')} unsupported "
            f"(expected {FORMAT_VERSION})"
        )
    with open(os.path.join(lib_dir, "dataset.bin"), "rb") as fh:
        ds = _dataset_from_bytes(fh.read())
    if ds.fingerprint() != manifest["dataset_fingerprint"]:
        raise LibraryError("dataset fingerprint mismatch: library belongs to different data")
    if tuple(manifest["classes"]) != ds.classes:
        raise LibraryError("class order mismatch between manifest and dataset")

    specs = [ModelSpec.from_json(s) for s in manifest["specs"]]
    n_test = len(ds.test_indices)
    n_train = len(ds.train_indices)
    model_hashes = manifest.get("model_sha256", [])
    cache_hashes = manifest.get("cache_sha256", [])
    models = []
    caches = []
    for i in range(len(specs)):
        with open(os.path.join(lib_dir, "models", f"{i}.bin"), "rb") as fh:
            blob = fh.read()
        if i < len(model_hashes) and hashlib.sha256(blob).hexdigest() != model_hashes[i]:
            raise binio.CorruptFileError(f"model {i}: checksum mismatch")
        models.append(binio.model_from_bytes(blob, context=f"model {i}"))
        with open(os.path.join(lib_dir, "cache", f"{i}.f32"), "rb") as fh:
            blob = fh.read()
        if i < len(cache_hashes) and hashlib.sha256(blob).hexdigest() != cache_hashes[i]:
            raise binio.CorruptFileError(f"cache for model {i}: checksum mismatch")
        test, cv = binio.cache_from_bytes(blob, context=f"cache for model {i}")
        if test.shape != (n_test, ds.n_classes) or cv.shape != (n_train, ds.n_classes):
            raise binio.CorruptFileError(f"cache for model {i}: block shape mismatch")
        caches.append(
            PredictionCache(
                model_id=i,
                test_probs=test.astype(np.float64),
                cv_probs=cv.astype(np.float64),
            )
        )
    records = [metrics.MetricRecord.from_json(r) for r in manifest["metrics"]]
    if not (len(models) == len(caches) == len(records)):
        raise LibraryError("models / caches / metrics length mismatch")
    return ModelLibrary(
        dataset=ds,
        view=encode(ds),
        specs=specs,
        seed=manifest["seed"],
        models=models,
        caches=caches,
        model_metrics=records,
        failures=[BuildFailure(f["spec_id"], f["error"]) for f in manifest["failures"]],
        grid_description=manifest.get("grid_description", {}),
    )


def verify_dataset(lib: ModelLibrary, ds: Dataset) -> None:
    """Refuse to attach the library to a different dataset or split."""
    if ds.fingerprint() != lib.fingerprint:
        raise LibraryError("dataset fingerprint mismatch: refusing to attach library")
