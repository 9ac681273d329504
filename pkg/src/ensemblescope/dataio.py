"""Tabular dataset ingestion, attribute typing, encoding and deterministic splits.

A Dataset is loaded once from CSV, then stratified into train/test rows and
cross-validation folds. All downstream consumers (model training, prediction
caches, layouts) read the same immutable Dataset/EncodedView pair, so row
indices are stable identifiers everywhere.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, replace

import numpy as np

MISSING_TOKENS = {"", "?"}

NUMERIC = "numeric"
CATEGORICAL = "categorical"


class DataError(ValueError):
    """Raised for unusable input data (missing file/column, too few classes...)."""


@dataclass(frozen=True)
class Attribute:
    """One typed column of the dataset.

    ``categories`` is meaningful for categorical attributes only and keeps
    first-appearance order. ``vmin``/``vmax`` are meaningful for numeric
    attributes only and are computed over training rows.
    """

    name: str
    kind: str
    categories: tuple[str, ...] = ()
    vmin: float = 0.0
    vmax: float = 0.0

    def __post_init__(self):
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise DataError(f"unknown attribute kind: {self.kind!r}")
        if self.kind == CATEGORICAL:
            if len(self.categories) < 1:
                raise DataError(f"categorical attribute {self.name!r} has no categories")
            if len(set(self.categories)) != len(self.categories):
                raise DataError(f"duplicate categories in attribute {self.name!r}")
        elif not self.vmin <= self.vmax:
            raise DataError(f"numeric attribute {self.name!r} has min > max")


@dataclass(frozen=True)
class Dataset:
    """Immutable typed table with class labels, train/test split and CV folds.

    Columns are stored per attribute: float64 values for numeric attributes,
    int32 category codes for categorical ones. ``split`` holds 0 for train
    rows and 1 for test rows; ``folds`` holds a fold index for train rows and
    -1 for test rows.
    """

    attributes: tuple[Attribute, ...]
    classes: tuple[str, ...]
    columns: tuple[np.ndarray, ...]
    labels: np.ndarray
    split: np.ndarray
    folds: np.ndarray
    n_folds: int
    dropped_rows: int = 0

    @property
    def n_rows(self) -> int:
        return int(self.labels.shape[0])

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    @property
    def train_indices(self) -> np.ndarray:
        return np.flatnonzero(self.split == 0)

    @property
    def test_indices(self) -> np.ndarray:
        return np.flatnonzero(self.split == 1)

    def attribute(self, name: str) -> Attribute:
        for a in self.attributes:
            if a.name == name:
                return a
        raise DataError(f"unknown attribute: {name!r}")

    def attribute_index(self, name: str) -> int:
        for i, a in enumerate(self.attributes):
            if a.name == name:
                return i
        raise DataError(f"unknown attribute: {name!r}")

    def fingerprint(self) -> str:
        """Stable hash of rows, labels, split and folds.

        Used to refuse attaching a persisted model library to a different
        dataset or a reshuffled split.
        """
        h = hashlib.sha256()
        h.update(("\x1f".join(self.classes)).encode())
        for a in self.attributes:
            h.update(f"\x1e{a.name}\x1f{a.kind}\x1f".encode())
            h.update(("\x1f".join(a.categories)).encode())
        for col in self.columns:
            h.update(col.tobytes())
        h.update(self.labels.tobytes())
        h.update(self.split.tobytes())
        h.update(self.folds.tobytes())
        h.update(str(self.n_folds).encode())
        return h.hexdigest()


@dataclass(frozen=True)
class EncodedView:
    """Model-ready N x D matrix: one-hot categoricals + standardized numerics.

    ``column_attr[j]`` is the source attribute index of encoded column j;
    ``column_category[j]`` is the category index for one-hot columns and -1
    for numeric columns. Numeric columns with zero training variance are
    encoded as all-zeros and listed in ``zero_variance_columns``.
    """

    matrix: np.ndarray
    column_attr: np.ndarray
    column_category: np.ndarray
    zero_variance_columns: tuple[int, ...]

    @property
    def n_columns(self) -> int:
        return int(self.matrix.shape[1])


def _freeze(*arrays: np.ndarray) -> None:
    for a in arrays:
        a.flags.writeable = False


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def load_csv(path, label_column: str, schema_hints: dict[str, str] | None = None) -> Dataset:
    """Load an RFC-4180-style CSV into a typed Dataset.

    Attribute kinds are inferred (every non-missing value parses as a number
    -> numeric, else categorical) unless overridden by ``schema_hints``
    mapping column name to ``"numeric"`` or ``"categorical"``. Rows with a
    missing value ("" or "?") in any used column are dropped and counted in
    ``dropped_rows``. Class order and category order follow first appearance
    among kept rows.
    """
    hints = dict(schema_hints or {})
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open data file {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"empty file: {path}") from None
        rows = [r for r in reader if r]

    if label_column not in header:
        raise DataError(f"label column {label_column!r} not in header {header}")
    for col in hints:
        if col not in header:
            raise DataError(f"schema hint for unknown column {col!r}")
    label_pos = header.index(label_column)
    feature_pos = [i for i in range(len(header)) if i != label_pos]
    if not feature_pos:
        raise DataError("no feature columns besides the label")
    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(f"row {r + 2} has {len(row)} fields, expected {len(header)}")

    missing = [[row[i].strip() in MISSING_TOKENS for i in range(len(header))] for row in rows]

    kinds: dict[int, str] = {}
    for i in feature_pos:
        name = header[i]
        values = [rows[r][i].strip() for r in range(len(rows)) if not missing[r][i]]
        hinted = hints.get(name)
        if hinted == NUMERIC:
            kinds[i] = NUMERIC
            # unparseable entries under a numeric hint count as missing
            for r in range(len(rows)):
                if not missing[r][i] and not _is_number(rows[r][i].strip()):
                    missing[r][i] = True
        elif hinted == CATEGORICAL:
            kinds[i] = CATEGORICAL
        elif hinted is not None:
            raise DataError(f"bad schema hint {hinted!r} for column {name!r}")
        else:
            kinds[i] = NUMERIC if values and all(_is_number(v) for v in values) else CATEGORICAL

    kept = [r for r in range(len(rows)) if not any(missing[r][i] for i in feature_pos + [label_pos])]
    dropped = len(rows) - len(kept)
    if not kept:
        raise DataError("no usable rows after dropping missing values")

    classes: list[str] = []
    class_index: dict[str, int] = {}
    labels = np.empty(len(kept), dtype=np.int32)
    for out_r, r in enumerate(kept):
        v = rows[r][label_pos].strip()
        if v not in class_index:
            class_index[v] = len(classes)
            classes.append(v)
        labels[out_r] = class_index[v]
    if len(classes) < 2:
        raise DataError(f"need at least 2 classes, found {len(classes)}")

    attributes: list[Attribute] = []
    columns: list[np.ndarray] = []
    for i in feature_pos:
        name = header[i]
        if kinds[i] == NUMERIC:
            col = np.array([float(rows[r][i].strip()) for r in kept], dtype=np.float64)
            attributes.append(Attribute(name, NUMERIC, vmin=float(col.min()), vmax=float(col.max())))
        else:
            cats: list[str] = []
            cat_index: dict[str, int] = {}
            col = np.empty(len(kept), dtype=np.int32)
            for out_r, r in enumerate(kept):
                v = rows[r][i].strip()
                if v not in cat_index:
                    cat_index[v] = len(cats)
                    cats.append(v)
                col[out_r] = cat_index[v]
            attributes.append(Attribute(name, CATEGORICAL, categories=tuple(cats)))
        columns.append(col)

    split = np.zeros(len(kept), dtype=np.uint8)
    folds = np.zeros(len(kept), dtype=np.int32)
    _freeze(labels, split, folds, *columns)
    return Dataset(
        attributes=tuple(attributes),
        classes=tuple(classes),
        columns=tuple(columns),
        labels=labels,
        split=split,
        folds=folds,
        n_folds=1,
        dropped_rows=dropped,
    )


def split_and_fold(ds: Dataset, test_fraction: float, folds: int, seed: int) -> Dataset:
    """Stratified train/test split plus stratified CV folds, deterministic per seed.

    Per-class test counts follow largest-remainder rounding of
    ``n_class * test_fraction``; train rows of each class are dealt
    round-robin over folds with a rotating start so per-class and total fold
    sizes stay within one row of the exact proportion. Numeric attribute
    min/max are recomputed over the new training rows.
    """
    n = ds.n_rows
    if not 0.0 < test_fraction < 1.0:
        raise DataError("test_fraction must be in (0, 1)")
    if folds < 2:
        raise DataError("need at least 2 folds")
    if n * test_fraction < 1 or n * (1 - test_fraction) < folds:
        raise DataError("dataset too small for the requested split")

    rng = np.random.RandomState(seed)
    n_test_total = int(round(n * test_fraction))
    class_rows = [np.flatnonzero(ds.labels == c) for c in range(ds.n_classes)]

    base = [int(len(r) * test_fraction) for r in class_rows]
    frac = [len(r) * test_fraction - b for r, b in zip(class_rows, base)]
    leftover = n_test_total - sum(base)
    # hand leftovers to the largest fractional parts, ties to the lowest class
    order = sorted(range(ds.n_classes), key=lambda c: (-frac[c], c))
    n_test = list(base)
    for c in order[: max(leftover, 0)]:
        n_test[c] += 1

    split = np.zeros(n, dtype=np.uint8)
    folds_arr = np.full(n, -1, dtype=np.int32)
    fold_offset = 0
    for c, rows in enumerate(class_rows):
        if len(rows) - n_test[c] < folds:
            raise DataError(
                f"class {ds.classes[c]!r} too small to stratify: "
                f"{len(rows) - n_test[c]} training rows for {folds} folds"
            )
        perm = rows[rng.permutation(len(rows))]
        test_rows = perm[: n_test[c]]
        train_rows = perm[n_test[c]:]
        split[test_rows] = 1
        for j, row in enumerate(train_rows):
            folds_arr[row] = (j + fold_offset) % folds
        fold_offset = (fold_offset + len(train_rows)) % folds

    train_mask = split == 0
    attributes = []
    for a, col in zip(ds.attributes, ds.columns):
        if a.kind == NUMERIC:
            tcol = col[train_mask]
            attributes.append(replace(a, vmin=float(tcol.min()), vmax=float(tcol.max())))
        else:
            attributes.append(a)

    _freeze(split, folds_arr)
    return replace(
        ds,
        attributes=tuple(attributes),
        split=split,
        folds=folds_arr,
        n_folds=folds,
    )


def encode(ds: Dataset) -> EncodedView:
    """Encode the dataset as one matrix shared by every model family.

    Column order is attribute order, categorical attributes expanding into
    their categories in order. Numerics are standardized with training-row
    mean/sd; zero-variance numerics become all-zero columns and are flagged.
    """
    train_mask = ds.split == 0
    if not train_mask.any():
        raise DataError("dataset has no training rows to standardize against")
    blocks: list[np.ndarray] = []
    column_attr: list[int] = []
    column_category: list[int] = []
    zero_var: list[int] = []
    for ai, (attr, col) in enumerate(zip(ds.attributes, ds.columns)):
        if attr.kind == NUMERIC:
            mean = float(col[train_mask].mean())
            sd = float(col[train_mask].std())
            if sd == 0.0:
                zero_var.append(len(column_attr))
                blocks.append(np.zeros((ds.n_rows, 1)))
            else:
                blocks.append(((col - mean) / sd).reshape(-1, 1))
            column_attr.append(ai)
            column_category.append(-1)
        else:
            k = len(attr.categories)
            onehot = np.zeros((ds.n_rows, k))
            onehot[np.arange(ds.n_rows), col] = 1.0
            blocks.append(onehot)
            column_attr.extend([ai] * k)
            column_category.extend(range(k))
    matrix = np.hstack(blocks)
    attr_arr = np.asarray(column_attr, dtype=np.int32)
    cat_arr = np.asarray(column_category, dtype=np.int32)
    _freeze(matrix, attr_arr, cat_arr)
    return EncodedView(
        matrix=matrix,
        column_attr=attr_arr,
        column_category=cat_arr,
        zero_variance_columns=tuple(zero_var),
    )


def decode_categorical(view: EncodedView, ds: Dataset) -> dict[str, list[str]]:
    """Recover categorical values from one-hot blocks (round-trip check)."""
    out: dict[str, list[str]] = {}
    for ai, attr in enumerate(ds.attributes):
        if attr.kind != CATEGORICAL:
            continue
        cols = np.flatnonzero(view.column_attr == ai)
        codes = np.argmax(view.matrix[:, cols], axis=1)
        out[attr.name] = [attr.categories[c] for c in codes]
    return out
