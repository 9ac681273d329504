"""Binary on-disk formats for model state and prediction caches.

Model files: magic ``EATM``, u16 format version, family tag, then named
little-endian arrays. Cache files: 16-byte header (magic ``EAPC``, u32
rows_test, u32 rows_cv, u32 n_classes) followed by float32 row-major data,
test block first. Both writers are byte-deterministic for fixed inputs.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .models.base import FAMILIES, ModelSpec, TrainedModel, _family_class

MODEL_MAGIC = b"EATM"
CACHE_MAGIC = b"EAPC"
MODEL_VERSION = 1

_DTYPES = ["<f8", "<f4", "<i4", "<i8", "|u1"]


class CorruptFileError(ValueError):
    """A persisted model or cache file failed structural validation."""


def _pack_arrays(arrays: dict[str, np.ndarray]) -> bytes:
    parts = [struct.pack("<I", len(arrays))]
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name])
        dt = arr.dtype.newbyteorder("<") if arr.dtype.byteorder == ">" else arr.dtype
        code = None
        for i, d in enumerate(_DTYPES):
            if np.dtype(d) == dt:
                code = i
                break
        if code is None:
            arr = arr.astype("<f8")
            code = 0
        else:
            arr = arr.astype(_DTYPES[code])
        nb = name.encode()
        parts.append(struct.pack("<H", len(nb)))
        parts.append(nb)
        parts.append(struct.pack("<BB", code, arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(arr.tobytes())
    return b"".join(parts)


def _unpack_arrays(buf: bytes, offset: int, context: str) -> dict[str, np.ndarray]:
    try:
        (n_blobs,) = struct.unpack_from("<I", buf, offset)
        offset += 4
        out = {}
        for _ in range(n_blobs):
            (name_len,) = struct.unpack_from("<H", buf, offset)
            offset += 2
            name = buf[offset : offset + name_len].decode()
            offset += name_len
            code, ndim = struct.unpack_from("<BB", buf, offset)
            offset += 2
            shape = struct.unpack_from(f"<{ndim}Q", buf, offset)
            offset += 8 * ndim
            dt = np.dtype(_DTYPES[code])
            nbytes = dt.itemsize * int(np.prod(shape)) if ndim else dt.itemsize
            raw = buf[offset : offset + nbytes]
            if len(raw) != nbytes:
                raise CorruptFileError(f"{context}: truncated array {name!r}")
            out[name] = np.frombuffer(raw, dtype=dt).reshape(shape).copy()
            offset += nbytes
        if offset != len(buf):
            raise CorruptFileError(f"{context}: {len(buf) - offset} trailing bytes")
        return out
    except (struct.error, IndexError, UnicodeDecodeError) as exc:
        raise CorruptFileError(f"{context}: malformed array section ({exc})") from exc


def model_to_bytes(model: TrainedModel) -> bytes:
    meta = {
        "spec": model.spec.to_json(),
        "train_seed": model.train_seed,
        "n_classes": model.n_classes,
        "n_features": model.n_features,
        "extra": model.state_meta(),
    }
    meta_bytes = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode()
    header = MODEL_MAGIC + struct.pack(
        "<HBI", MODEL_VERSION, FAMILIES.index(model.spec.family), len(meta_bytes)
    )
    return header + meta_bytes + _pack_arrays(model.state_arrays())


def model_from_bytes(buf: bytes, context: str = "model") -> TrainedModel:
    if buf[:4] != MODEL_MAGIC:
        raise CorruptFileError(f"{context}: bad magic {buf[:4]!r}")
    try:
        version, family_tag, meta_len = struct.unpack_from("<HBI", buf, 4)
    except struct.error as exc:
        raise CorruptFileError(f"{context}: truncated header") from exc
    if version != MODEL_VERSION:
        raise CorruptFileError(f"{context}: unsupported model format version {version}")
    if family_tag >= len(FAMILIES):
        raise CorruptFileError(f"{context}: unknown family tag {family_tag}")
    off = 4 + 7
    try:
        meta = json.loads(buf[off : off + meta_len].decode())
    except (ValueError, UnicodeDecodeError) as exc:
        raise CorruptFileError(f"{context}: malformed metadata") from exc
    arrays = _unpack_arrays(buf, off + meta_len, context)
    spec = ModelSpec.from_json(meta["spec"])
    if spec.family != FAMILIES[family_tag]:
        raise CorruptFileError(f"{context}: family tag/spec mismatch")
    cls = _family_class(spec.family)
    return cls.from_state(
        spec, meta["n_classes"], meta["n_features"], meta["train_seed"], arrays, meta["extra"]
    )


def cache_to_bytes(test_probs: np.ndarray, cv_probs: np.ndarray) -> bytes:
    if test_probs.shape[1] != cv_probs.shape[1]:
        raise ValueError("test and cv blocks disagree on class count")
    k = test_probs.shape[1]
    header = CACHE_MAGIC + struct.pack("<III", test_probs.shape[0], cv_probs.shape[0], k)
    return (
        header
        + np.ascontiguousarray(test_probs, dtype="<f4").tobytes()
        + np.ascontiguousarray(cv_probs, dtype="<f4").tobytes()
    )


def cache_from_bytes(buf: bytes, context: str = "cache") -> tuple[np.ndarray, np.ndarray]:
    if buf[:4] != CACHE_MAGIC:
        raise CorruptFileError(f"{context}: bad magic {buf[:4]!r}")
    try:
        rows_test, rows_cv, k = struct.unpack_from("<III", buf, 4)
    except struct.error as exc:
        raise CorruptFileError(f"{context}: truncated header") from exc
    expected = 16 + 4 * k * (rows_test + rows_cv)
    if len(buf) != expected:
        raise CorruptFileError(f"{context}: size {len(buf)} != expected {expected}")
    data = np.frombuffer(buf, dtype="<f4", offset=16)
    test = data[: rows_test * k].reshape(rows_test, k).copy()
    cv = data[rows_test * k :].reshape(rows_cv, k).copy()
    for name, block in (("test", test), ("cv", cv)):
        if not np.isfinite(block).all() or block.min() < -1e-3 or block.max() > 1 + 1e-3:
            raise CorruptFileError(f"{context}: {name} block holds non-probability values")
        if len(block) and np.abs(block.sum(axis=1) - 1.0).max() > 1e-3:
            raise CorruptFileError(f"{context}: {name} block rows do not sum to 1")
    return test, cv
