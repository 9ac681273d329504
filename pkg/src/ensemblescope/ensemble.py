"""Ensemble combination, evaluation, and greedy forward/backward selection.

Combination is the arithmetic mean of member probability rows, computed from
the prediction caches only: evaluating an ensemble (including its
cross-validated accuracy from the out-of-fold block) never retrains anything.
Member sums accumulate in ascending model-id order so results do not depend
on how the member set is presented, and toggles update a running sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .library import ModelLibrary
from .metrics import accuracy, argmax_labels, auc_weighted

IMPROVEMENT_EPS = 1e-12
HILLCLIMB_METRICS = ("acc_cv", "auc_cv")


class EnsembleError(ValueError):
    """Empty member sets, unknown model ids, bad hillclimb metrics."""


class PerfSummary(NamedTuple):
    accuracy_test: float
    auc_weighted_test: float
    accuracy_cv: float

    def to_json(self) -> dict:
        return {
            "accuracy_test": self.accuracy_test,
            "auc_weighted_test": self.auc_weighted_test,
            "accuracy_cv": self.accuracy_cv,
        }


@dataclass(frozen=True)
class EnsembleState:
    """Current member set plus combined outputs and performance summary."""

    members: tuple[int, ...]
    test_sum: np.ndarray
    cv_sum: np.ndarray
    combined_test_probs: np.ndarray
    pred_labels: np.ndarray
    correct: np.ndarray
    perf: PerfSummary


class GuardVerdict(NamedTuple):
    ok: bool
    delta: float


@dataclass
class SelectionStep:
    action: str  # "add" | "remove"
    model_id: int
    value: float
    bag: int = 0

    def to_json(self) -> dict:
        return {"action": self.action, "model_id": self.model_id,
                "value": self.value, "bag": self.bag}


@dataclass
class SelectionTrace:
    """Full record of one automatic selection run.

    ``search_value`` is the hillclimb value reached by the (multiset) search;
    by construction it never falls below the best single model.
    ``final_members`` is the deduplicated support handed to the session, and
    ``final_value`` its equal-weight hillclimb value.
    """

    hillclimb_metric: str
    max_size: int
    bags: int
    bag_fraction: float
    seed: int
    steps: list[SelectionStep]
    final_members: tuple[int, ...]
    search_value: float
    final_value: float

    def to_json(self) -> dict:
        return {
            "hillclimb_metric": self.hillclimb_metric,
            "max_size": self.max_size,
            "bags": self.bags,
            "bag_fraction": self.bag_fraction,
            "seed": self.seed,
            "steps": [s.to_json() for s in self.steps],
            "final_members": list(self.final_members),
            "search_value": self.search_value,
            "final_value": self.final_value,
        }


def _check_members(lib: ModelLibrary, members) -> list[int]:
    ids = [int(m) for m in members]
    if not ids:
        raise EnsembleError("ensemble must have at least one member")
    for m in ids:
        if not 0 <= m < lib.n_models:
            raise EnsembleError(f"unknown model id {m}")
    if len(set(ids)) != len(ids):
        raise EnsembleError(f"duplicate member ids in {ids}")
    return ids


def _block(lib: ModelLibrary, model_id: int, rows: str) -> np.ndarray:
    cache = lib.caches[model_id]
    return cache.test_probs if rows == "test" else cache.cv_probs


def _member_sum(lib: ModelLibrary, members: list[int], rows: str) -> np.ndarray:
    acc = np.zeros_like(_block(lib, members[0], rows))
    for m in sorted(members):
        acc += _block(lib, m, rows)
    return acc


def combine(lib: ModelLibrary, members, rows: str = "test") -> np.ndarray:
    """Arithmetic mean of the members' cached probability rows."""
    if rows not in ("test", "cv"):
        raise EnsembleError(f"rows must be 'test' or 'cv', got {rows!r}")
    ids = _check_members(lib, members)
    return _member_sum(lib, ids, rows) / len(ids)


def _state_from_sums(lib: ModelLibrary, members: tuple[int, ...],
                     test_sum: np.ndarray, cv_sum: np.ndarray) -> EnsembleState:
    n = len(members)
    combined = test_sum / n
    pred = argmax_labels(combined)
    test_labels = lib.dataset.labels[lib.dataset.test_indices]
    train_labels = lib.dataset.labels[lib.dataset.train_indices]
    correct = pred == test_labels
    cv_pred = argmax_labels(cv_sum / n)
    perf = PerfSummary(
        accuracy_test=float(correct.mean()),
        auc_weighted_test=auc_weighted(combined, test_labels).value,
        accuracy_cv=float((cv_pred == train_labels).mean()),
    )
    return EnsembleState(
        members=members,
        test_sum=test_sum,
        cv_sum=cv_sum,
        combined_test_probs=combined,
        pred_labels=pred,
        correct=correct,
        perf=perf,
    )


def evaluate(lib: ModelLibrary, members) -> EnsembleState:
    """Full evaluation of a member set from the caches (no retraining)."""
    ids = _check_members(lib, members)
    return _state_from_sums(
        lib, tuple(ids), _member_sum(lib, ids, "test"), _member_sum(lib, ids, "cv")
    )


def toggle(lib: ModelLibrary, state: EnsembleState, model_id: int) -> EnsembleState:
    """New state with ``model_id`` added or removed, via running-sum update."""
    if not 0 <= model_id < lib.n_models:
        raise EnsembleError(f"unknown model id {model_id}")
    cache = lib.caches[model_id]
    if model_id in state.members:
        if len(state.members) == 1:
            raise EnsembleError("cannot remove the last ensemble member")
        members = tuple(m for m in state.members if m != model_id)
        test_sum = state.test_sum - cache.test_probs
        cv_sum = state.cv_sum - cache.cv_probs
    else:
        members = state.members + (model_id,)
        test_sum = state.test_sum + cache.test_probs
        cv_sum = state.cv_sum + cache.cv_probs
    return _state_from_sums(lib, members, test_sum, cv_sum)


def guard_check(before: EnsembleState, after: EnsembleState, tolerance: float = 0.0) -> GuardVerdict:
    """Violated iff test accuracy dropped by more than ``tolerance``."""
    delta = before.perf.accuracy_test - after.perf.accuracy_test
    return GuardVerdict(ok=delta <= tolerance, delta=max(delta, 0.0))


# --- greedy selection --------------------------------------------------------

def _hillclimb_fn(metric: str, labels: np.ndarray):
    if metric == "acc_cv":
        def fn(mean_probs):
            return accuracy(argmax_labels(mean_probs), labels)
    elif metric == "auc_cv":
        def fn(mean_probs):
            return auc_weighted(mean_probs, labels).value
    else:
        raise EnsembleError(
            f"hillclimb metric must be one of {HILLCLIMB_METRICS}, got {metric!r}"
        )
    return fn


def greedy_select(
    cv_blocks: list[np.ndarray],
    labels: np.ndarray,
    metric: str = "acc_cv",
    max_size: int = 10,
    candidates: list[int] | None = None,
    bag: int = 0,
) -> tuple[list[int], list[SelectionStep]]:
    """Sorted-init forward search with replacement plus backward pruning.

    Operates directly on out-of-fold probability blocks so synthetic
    libraries can exercise it without trained models. Returns the final
    multiset and the step log; the hillclimb value is non-decreasing step
    over step by construction.
    """
    if max_size < 1:
        raise EnsembleError("max_size must be >= 1")
    pool = sorted(candidates) if candidates is not None else list(range(len(cv_blocks)))
    if not pool:
        raise EnsembleError("no candidate models")
    value_of = _hillclimb_fn(metric, labels)

    # sorted initialization: best single model, ties to the lowest id
    best_id, best_val = -1, -math.inf
    for m in pool:
        v = value_of(cv_blocks[m])
        if v > best_val:
            best_id, best_val = m, v
    multiset = [best_id]
    total = cv_blocks[best_id].copy()
    current = best_val
    steps = [SelectionStep("add", best_id, current, bag)]

    # forward, with replacement
    while len(multiset) < max_size:
        best_id, best_val = -1, current
        for m in pool:
            v = value_of((total + cv_blocks[m]) / (len(multiset) + 1))
            if v <= current + IMPROVEMENT_EPS:
                continue
            if best_id < 0 or v > best_val:
                best_id, best_val = m, v
        if best_id < 0:
            break
        multiset.append(best_id)
        total += cv_blocks[best_id]
        current = best_val
        steps.append(SelectionStep("add", best_id, current, bag))

    # backward: drop members while some removal improves the value
    while len(multiset) > 1:
        best_id, best_val = -1, current
        for m in sorted(set(multiset)):
            v = value_of((total - cv_blocks[m]) / (len(multiset) - 1))
            if v <= current + IMPROVEMENT_EPS:
                continue
            if best_id < 0 or v > best_val:
                best_id, best_val = m, v
        if best_id < 0:
            break
        multiset.remove(best_id)
        total -= cv_blocks[best_id]
        current = best_val
        steps.append(SelectionStep("remove", best_id, current, bag))

    return multiset, steps


def replay_trace(trace: SelectionTrace) -> tuple[int, ...]:
    """Recompute final members from the step log (per-bag multisets, then
    the union of their supports)."""
    supports: set[int] = set()
    for bag in range(max(trace.bags, 1)):
        multiset: list[int] = []
        for s in trace.steps:
            if s.bag != bag:
                continue
            if s.action == "add":
                multiset.append(s.model_id)
            else:
                multiset.remove(s.model_id)
        supports.update(multiset)
    return tuple(sorted(supports))


def auto_select(
    lib: ModelLibrary,
    hillclimb: str = "acc_cv",
    max_size: int = 10,
    bags: int = 1,
    bag_fraction: float = 0.5,
    seed: int = 0,
) -> SelectionTrace:
    """Automatic ensemble selection over the library's out-of-fold caches.

    ``bags > 1`` repeats the search on random model subsets of size
    ceil(bag_fraction * M) and returns the deduplicated support of the
    averaged membership weights.
    """
    labels = lib.dataset.labels[lib.dataset.train_indices]
    blocks = [c.cv_probs for c in lib.caches]
    value_of = _hillclimb_fn(hillclimb, labels)

    steps: list[SelectionStep] = []
    if bags <= 1:
        multiset, steps = greedy_select(blocks, labels, hillclimb, max_size)
        search_value = steps[-1].value
        support = sorted(set(multiset))
    else:
        rng = np.random.RandomState(seed)
        m = lib.n_models
        size = max(1, math.ceil(bag_fraction * m))
        weights = np.zeros(m)
        search_value = -math.inf
        for b in range(bags):
            candidates = sorted(rng.choice(m, size=min(size, m), replace=False).tolist())
            multiset, bag_steps = greedy_select(
                blocks, labels, hillclimb, max_size, candidates=candidates, bag=b
            )
            steps.extend(bag_steps)
            search_value = max(search_value, bag_steps[-1].value)
            for mid in multiset:
                weights[mid] += 1.0 / (len(multiset) * bags)
        support = sorted(np.flatnonzero(weights > 0).tolist())

    final_members = tuple(support)
    final_value = value_of(combine(lib, final_members, rows="cv"))
    return SelectionTrace(
        hillclimb_metric=hillclimb,
        max_size=max_size,
        bags=bags,
        bag_fraction=bag_fraction,
        seed=seed,
        steps=steps,
        final_members=final_members,
        search_value=search_value,
        final_value=final_value,
    )
