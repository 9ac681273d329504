import numpy as np
import pytest

from ensemblescope import (
    build_library,
    load_csv,
    small_grid,
    save_library,
    split_and_fold,
    synth,
)
from ensemblescope.dataio import EncodedView


@pytest.fixture(scope="session")
def demo_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "demo.csv"
    synth.write_csv(path, n_rows=1200, seed=7)
    return path


@pytest.fixture(scope="session")
def demo_dataset(demo_csv):
    ds = load_csv(demo_csv, "income")
    return split_and_fold(ds, 0.2, 5, seed=3)


@pytest.fixture(scope="session")
def demo_library(demo_dataset):
    return build_library(demo_dataset, small_grid(), seed=0)


@pytest.fixture(scope="session")
def demo_lib_dir(demo_library, tmp_path_factory):
    d = tmp_path_factory.mktemp("lib") / "demo_lib"
    save_library(demo_library, d)
    return d


def make_view(matrix, column_attr=None, column_category=None) -> EncodedView:
    """Hand-built EncodedView for driving model families directly."""
    matrix = np.asarray(matrix, dtype=np.float64)
    d = matrix.shape[1]
    if column_attr is None:
        column_attr = list(range(d))
    if column_category is None:
        column_category = [-1] * d
    return EncodedView(
        matrix=matrix,
        column_attr=np.asarray(column_attr, dtype=np.int32),
        column_category=np.asarray(column_category, dtype=np.int32),
        zero_variance_columns=(),
    )


def disjoint_blobs(n_per_class=60, seed=0):
    """2-D two-class toy set with disjoint supports (classes 3 units apart)."""
    rng = np.random.RandomState(seed)
    a = rng.uniform(0.0, 1.0, size=(n_per_class, 2))
    b = rng.uniform(3.0, 4.0, size=(n_per_class, 2))
    x = np.vstack([a, b])
    y = np.array([0] * n_per_class + [1] * n_per_class, dtype=np.int32)
    perm = rng.permutation(len(y))
    return x[perm], y[perm]


def random_simplex(rng, n, k):
    """Random probability rows (uniform Dirichlet)."""
    g = rng.gamma(1.0, 1.0, size=(n, k))
    return g / g.sum(axis=1, keepdims=True)
