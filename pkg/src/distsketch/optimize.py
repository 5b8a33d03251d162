"""Greedy set selection and welfare maximization over set-function oracles.

Oracles are plain callables taking a sorted tuple of item ids. Ties go to the
lowest item id (and, for welfare, the lowest part index first).
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .exceptions import CapacityError

Oracle = Callable[[tuple], float]

#: default cap on the number of candidate sets enumerated by brute force
BRUTE_FORCE_CAP = 2_000_000


@dataclass(frozen=True)
class SelectionResult:
    chosen: tuple[int, ...]
    objective: float
    oracle_calls: int
    trace: tuple[tuple[int, float], ...] = ()

    def to_json(self) -> dict:
        return {
            "chosen": list(self.chosen),
            "objective": self.objective,
            "oracle_calls": self.oracle_calls,
            "trace": [{"item": i, "gain": g} for i, g in self.trace],
        }


@dataclass(frozen=True)
class WelfareResult:
    parts: tuple[tuple[int, ...], ...]
    welfare: float
    oracle_calls: int = 0
    trace: tuple[tuple[int, int, float], ...] = field(default=())

    def to_json(self) -> dict:
        return {
            "parts": [list(p) for p in self.parts],
            "welfare": self.welfare,
            "oracle_calls": self.oracle_calls,
            "trace": [{"part": j, "item": i, "gain": g} for j, i, g in self.trace],
        }


def _ground(items) -> list[int]:
    ground = sorted(int(i) for i in items)
    if len(set(ground)) != len(ground):
        raise ValueError("ground set has duplicate items")
    return ground


def greedy_select(oracle: Oracle, items: Sequence[int], k: int, lazy: bool = False) -> SelectionResult:
    """Add the item of largest marginal gain, ``k`` times.

    Plain greedy makes ``sum_{t=1..k} (n - t + 1)`` calls on candidate sets;
    the baseline call on the empty set is not counted. ``lazy=True`` keeps
    stale gains in a priority queue and re-evaluates only the top; for
    submodular oracles it picks the same items.
    """
    ground = _ground(items)
    if k < 0 or k > len(ground):
        raise ValueError(f"k={k} must lie in [0, {len(ground)}]")
    if lazy:
        return _lazy_greedy(oracle, ground, k)
    chosen: list[int] = []
    current = float(oracle(()))
    calls = 0
    trace = []
    remaining = list(ground)
    for _ in range(k):
        best_item, best_val = None, -math.inf
        for i in remaining:
            val = float(oracle(tuple(sorted(chosen + [i]))))
            calls += 1
            if val > best_val:
                best_item, best_val = i, val
        chosen.append(best_item)
        remaining.remove(best_item)
        trace.append((best_item, best_val - current))
        current = best_val
    return SelectionResult(tuple(sorted(chosen)), current, calls, tuple(trace))


def _lazy_greedy(oracle: Oracle, ground: list[int], k: int) -> SelectionResult:
    current = float(oracle(()))
    calls = 0
    heap = []
    for i in ground:
        gain = float(oracle((i,))) - current
        calls += 1
        heap.append((-gain, i, 0))
    heapq.heapify(heap)
    chosen: list[int] = []
    trace = []
    while len(chosen) < k:
        neg_gain, i, stamp = heapq.heappop(heap)
        if stamp == len(chosen):
            chosen.append(i)
            current -= neg_gain
            trace.append((i, -neg_gain))
            continue
        gain = float(oracle(tuple(sorted(chosen + [i])))) - current
        calls += 1
        heapq.heappush(heap, (-gain, i, len(chosen)))
    return SelectionResult(tuple(sorted(chosen)), current, calls, tuple(trace))


def brute_force_best(
    oracle: Oracle, items: Sequence[int], k: int, cap: int = BRUTE_FORCE_CAP
) -> SelectionResult:
    """Exact maximizer over all ``k``-subsets, ties to the lexicographically smallest."""
    ground = _ground(items)
    if k < 0 or k > len(ground):
        raise ValueError(f"k={k} must lie in [0, {len(ground)}]")
    count = math.comb(len(ground), k)
    if count > cap:
        raise CapacityError(f"{count} candidate sets exceed the brute-force cap {cap}")
    best, best_val = None, -math.inf
    for combo in itertools.combinations(ground, k):
        val = float(oracle(combo))
        if val > best_val:
            best, best_val = combo, val
    return SelectionResult(tuple(best), best_val, count)


def greedy_welfare(
    oracles: Sequence[Oracle], items: Sequence[int], sizes: Sequence[int]
) -> WelfareResult:
    """Assign, one at a time, the (part, item) pair of largest marginal gain."""
    ground = _ground(items)
    sizes = [int(s) for s in sizes]
    if len(oracles) != len(sizes):
        raise ValueError("need one size per oracle")
    if any(s < 0 for s in sizes) or sum(sizes) > len(ground):
        raise ValueError(f"sizes {sizes} are infeasible for {len(ground)} items")
    m = len(oracles)
    parts: list[list[int]] = [[] for _ in range(m)]
    values = [float(o(())) for o in oracles]
    calls = 0
    remaining = list(ground)
    trace = []
    for _ in range(sum(sizes)):
        best = None
        best_gain = -math.inf
        for j in range(m):
            if len(parts[j]) >= sizes[j]:
                continue
            for i in remaining:
                val = float(oracles[j](tuple(sorted(parts[j] + [i]))))
                calls += 1
                gain = val - values[j]
                if gain > best_gain:
                    best, best_gain = (j, i, val), gain
        j, i, val = best
        parts[j].append(i)
        remaining.remove(i)
        values[j] = val
        trace.append((j, i, best_gain))
    return WelfareResult(
        tuple(tuple(sorted(p)) for p in parts), float(sum(values)), calls, tuple(trace)
    )


def brute_force_welfare(
    oracles: Sequence[Oracle], items: Sequence[int], sizes: Sequence[int],
    cap: int = BRUTE_FORCE_CAP,
) -> WelfareResult:
    """Exhaustive search over all assignments of disjoint parts with the given sizes."""
    ground = _ground(items)
    sizes = [int(s) for s in sizes]
    if len(oracles) != len(sizes) or sum(sizes) > len(ground):
        raise ValueError("infeasible welfare instance")
    count = 1
    left = len(ground)
    for s in sizes:
        count *= math.comb(left, s)
        left -= s
    if count > cap:
        raise CapacityError(f"{count} partitions exceed the brute-force cap {cap}")
    cache: dict[tuple[int, tuple], float] = {}

    def value(j, part):
        key = (j, part)
        if key not in cache:
            cache[key] = float(oracles[j](part))
        return cache[key]

    best, best_val = None, -math.inf

    def recurse(j, pool, acc, total):
        nonlocal best, best_val
        if j == len(sizes):
            if total > best_val:
                best, best_val = tuple(acc), total
            return
        for combo in itertools.combinations(pool, sizes[j]):
            rest = [i for i in pool if i not in combo]
            recurse(j + 1, rest, acc + [combo], total + value(j, combo))

    recurse(0, ground, [], 0.0)
    return WelfareResult(best, best_val, len(cache))
