"""The default overproduction grid: 49 specs across all 7 families.

The per-family parameter grids below are the artifact's own defaults and are
copied verbatim into every library manifest, so a persisted library always
documents how it was generated.
"""

from __future__ import annotations

from itertools import product

from .base import ModelSpec

GRID_DESCRIPTION = {
    "decision_tree": "depth in {2, 4, 8, unlimited} x min_leaf in {1, 5, 25}",
    "random_forest": "trees in {16, 64, 128} x mtry in {sqrt, third}",
    "bagged_trees": "bags in {10, 20, 30} x depth in {8, unlimited}",
    "adaboost_stumps": "rounds in {25, 100} x learning_rate in {0.5, 1.0}",
    "knn": "k in {1, 5, 15, 51} x weights in {uniform, distance}",
    "logistic_regression": "l2 in {0, 0.003, 0.01, 0.03, 0.1, 0.3, 1.0, 3.0}",
    "naive_bayes": "alpha in {0.1, 0.3, 1.0, 3.0, 10.0}",
}


def default_grid() -> list[ModelSpec]:
    """Deterministic list of the 49 default specs (7 families)."""
    specs: list[ModelSpec] = []
    for depth, min_leaf in product([2, 4, 8, None], [1, 5, 25]):
        specs.append(ModelSpec.make("decision_tree", depth=depth, min_leaf=min_leaf))
    for trees, mtry in product([16, 64, 128], ["sqrt", "third"]):
        specs.append(ModelSpec.make("random_forest", trees=trees, mtry=mtry))
    for bags, depth in product([10, 20, 30], [8, None]):
        specs.append(ModelSpec.make("bagged_trees", bags=bags, depth=depth))
    for rounds, lr in product([25, 100], [0.5, 1.0]):
        specs.append(ModelSpec.make("adaboost_stumps", rounds=rounds, learning_rate=lr))
    for k, weights in product([1, 5, 15, 51], ["uniform", "distance"]):
        specs.append(ModelSpec.make("knn", k=k, weights=weights))
    for l2 in [0.0, 0.003, 0.01, 0.03, 0.1, 0.3, 1.0, 3.0]:
        specs.append(ModelSpec.make("logistic_regression", l2=l2))
    for alpha in [0.1, 0.3, 1.0, 3.0, 10.0]:
        specs.append(ModelSpec.make("naive_bayes", alpha=alpha))
    return specs


def small_grid() -> list[ModelSpec]:
    """One cheap spec per family; handy for smoke tests and demos."""
    return [
        ModelSpec.make("decision_tree", depth=4, min_leaf=5),
        ModelSpec.make("random_forest", trees=16, mtry="sqrt"),
        ModelSpec.make("bagged_trees", bags=10, depth=8),
        ModelSpec.make("adaboost_stumps", rounds=25, learning_rate=1.0),
        ModelSpec.make("knn", k=5, weights="distance"),
        ModelSpec.make("logistic_regression", l2=0.01),
        ModelSpec.make("naive_bayes", alpha=1.0),
    ]
