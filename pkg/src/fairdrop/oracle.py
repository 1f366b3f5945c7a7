"""Exhaustive ground truth for bounded mask spaces at desk scale.

Enumeration walks every mask with weight in [n_l, n_u], prices each one with
the same cost evaluator the randomized searches use, and reports the global
optimum.  On top of that sit the census (how many states are globally
optimal, near-optimal, or below the F1 floor) and the single-neuron-drop
baseline (the best mask of weight exactly 1, the strongest repair a
one-neuron method could ever reach).

Everything here is order-independent: the optimum carries a deterministic
tie-break (smallest canonical state key), and census counters are plain sums,
so enumeration chunks may be processed in any order or concurrently and
merged by min / addition.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .dataset import TabularDataset
from .metrics import accuracy, confusion, f1, fairness
from .model import MlpModel, predict_batch
from .search import CostEvaluator, CostParams, DropoutState, SearchSpaceBounds

DEFAULT_ENUMERATION_BUDGET = 10_000_000


class EnumerationBudgetError(RuntimeError):
    """The bounded space is too large to enumerate; carries the cardinality."""

    def __init__(self, cardinality: int, budget: int):
        super().__init__(f"search space holds {cardinality} states, "
                         f"over the enumeration budget of {budget}")
        self.cardinality = cardinality
        self.budget = budget


def iter_states(bounds: SearchSpaceBounds) -> Iterator[DropoutState]:
    """All states with weight in [n_l, n_u], by weight then position tuple."""
    for k in range(bounds.n_l, bounds.n_u + 1):
        for combo in itertools.combinations(range(bounds.n_total), k):
            yield DropoutState.from_indices(bounds.n_total, combo)


def _check_budget(bounds: SearchSpaceBounds, budget: int) -> int:
    cardinality = bounds.size()
    if cardinality > budget:
        raise EnumerationBudgetError(cardinality, budget)
    return cardinality


def enumerate_best(model: MlpModel, validation_data: TabularDataset,
                   bounds: SearchSpaceBounds, params: CostParams,
                   budget: int = DEFAULT_ENUMERATION_BUDGET
                   ) -> tuple[DropoutState, float]:
    """Global optimum over the bounded space; cost ties break to the smallest
    canonical state key."""
    _check_budget(bounds, budget)
    evaluator = CostEvaluator(model, validation_data, params)
    best_state = None
    best_cost = math.inf
    for state in iter_states(bounds):
        c = evaluator.evaluate(state).cost
        if best_state is None or c < best_cost or (c == best_cost and state.bits < best_state.bits):
            best_state = state
            best_cost = c
    return best_state, best_cost


@dataclass(frozen=True)
class StateCensus:
    """Counts of globally optimal, near-optimal and floor-violating states.

    A state below the F1 floor is Bad regardless of cost; Best states have
    exactly the optimal cost (and are not Bad); Good states sit within
    ``good_margin`` above the optimum (and are neither Best nor Bad).  The
    remaining states are ordinary, so the three counts sum to at most total.
    """

    best_count: int
    good_count: int
    bad_count: int
    total: int
    optimal_cost: float
    good_margin: float
    f1_floor: float

    @property
    def best_likelihood(self) -> float:
        return self.best_count / self.total

    @property
    def good_likelihood(self) -> float:
        return self.good_count / self.total

    @property
    def bad_likelihood(self) -> float:
        return self.bad_count / self.total

    def to_dict(self) -> dict:
        return {
            "best_count": self.best_count, "best_likelihood": self.best_likelihood,
            "good_count": self.good_count, "good_likelihood": self.good_likelihood,
            "bad_count": self.bad_count, "bad_likelihood": self.bad_likelihood,
            "total": self.total,
            "optimal_cost": self.optimal_cost,
            "good_margin": self.good_margin,
            "f1_floor": self.f1_floor,
        }


def census(model: MlpModel, validation_data: TabularDataset, bounds: SearchSpaceBounds,
           params: CostParams, good_margin: float = 0.05,
           budget: int = DEFAULT_ENUMERATION_BUDGET) -> StateCensus:
    """Classify every state in the bounded space against the global optimum."""
    if good_margin < 0:
        raise ValueError("good_margin must be >= 0")
    total = _check_budget(bounds, budget)
    evaluator = CostEvaluator(model, validation_data, params)
    costs = np.empty(total, dtype=np.float64)
    f1s = np.empty(total, dtype=np.float64)
    for i, state in enumerate(iter_states(bounds)):
        ev = evaluator.evaluate(state)
        costs[i] = ev.cost
        f1s[i] = ev.f1
    optimal = float(costs.min())
    floor = params.f1_floor
    bad = f1s < floor
    best = (costs == optimal) & ~bad
    good = (costs <= optimal + good_margin) & ~best & ~bad
    return StateCensus(
        best_count=int(best.sum()),
        good_count=int(good.sum()),
        bad_count=int(bad.sum()),
        total=total,
        optimal_cost=optimal,
        good_margin=good_margin,
        f1_floor=floor,
    )


def _mask_metrics(model: MlpModel, data: TabularDataset, state: DropoutState) -> dict:
    preds = predict_batch(model, data, state)
    counts = confusion(preds, data.labels)
    report = fairness(preds, data.labels, data.protected)
    return {
        "eod": "undefined" if report.eod is None else report.eod,
        "f1": f1(counts),
        "accuracy": accuracy(counts),
    }


def single_neuron_baseline(model: MlpModel, validation_data: TabularDataset,
                           test_data: TabularDataset, params: CostParams) -> dict:
    """Best single-neuron drop by validation cost, evaluated on both splits.

    Scans all N weight-1 masks in linear time (identical to enumerating the
    space with bounds (1, 1)); ties break to the lowest neuron index.
    """
    n = model.hidden_total
    evaluator = CostEvaluator(model, validation_data, params)
    best_index = None
    best_cost = math.inf
    for i in range(n):
        state = DropoutState.from_indices(n, (i,))
        c = evaluator.evaluate(state).cost
        if best_index is None or c < best_cost:
            best_index = i
            best_cost = c
    best_state = DropoutState.from_indices(n, (best_index,))
    layer, unit = model.neuron_order[best_index]
    return {
        "neuron_index": best_index,
        "layer": layer,
        "unit": unit,
        "cost": best_cost,
        "evaluations": evaluator.evaluations,
        "validation": _mask_metrics(model, validation_data, best_state),
        "test": _mask_metrics(model, test_data, best_state),
    }


def per_state_cost_rows(model: MlpModel, validation_data: TabularDataset,
                        bounds: SearchSpaceBounds, params: CostParams,
                        budget: int = DEFAULT_ENUMERATION_BUDGET
                        ) -> Iterator[tuple[str, float, float, float]]:
    """(state_key_hex, cost, eod, f1) for every state, for offline analysis."""
    _check_budget(bounds, budget)
    evaluator = CostEvaluator(model, validation_data, params)
    for state in iter_states(bounds):
        ev = evaluator.evaluate(state)
        yield state.key_hex(), ev.cost, (math.nan if ev.eod is None else ev.eod), ev.f1
