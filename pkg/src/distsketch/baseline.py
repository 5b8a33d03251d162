"""Test-score baseline sketch.

Each item gets one number, the replication score ``E[f(X^(1), ..., X^(k))]``
over ``k`` i.i.d. copies of its value, and a set is valued by its best item
score. This is a stand-in for published test-score sketches, whose exact
construction is not reproduced here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

import numpy as np

from .dist import ItemDistribution
from .evaluation import item_set
from .rng import stream
from .valuation import Valuation


@dataclass(frozen=True)
class TestScoreTable:
    __test__ = False  # not a pytest class

    k: int
    n_samples: int
    seed: int
    scores: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if any(s < 0 for s in self.scores.values()):
            raise ValueError("test scores must be non-negative")

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "scores": {str(i): s for i, s in sorted(self.scores.items())},
        }

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> "TestScoreTable":
        scores = {int(i): float(s) for i, s in obj["scores"].items()}
        return cls(int(obj["k"]), int(obj["n_samples"]), int(obj["seed"]), scores)


def replication_test_score(
    dist: ItemDistribution,
    spec: Valuation,
    k: int,
    n_samples: int,
    seed: int,
    item: int = 0,
) -> float:
    """Monte Carlo estimate of ``f`` on ``k`` independent copies of one item."""
    if k < 1 or n_samples < 1:
        raise ValueError("k and n_samples must be positive")
    draws = dist.sample(stream(seed, "test-score", item), (n_samples, k))
    return float(np.mean(spec(draws, items=[item or 1] * k)))


def build_table(
    dists: Mapping[int, ItemDistribution], spec: Valuation, k: int, n_samples: int, seed: int
) -> TestScoreTable:
    scores = {
        i: replication_test_score(d, spec, k, n_samples, seed, item=i)
        for i, d in sorted(dists.items())
    }
    return TestScoreTable(k, n_samples, seed, scores)


def testscore_sketch_value(table: TestScoreTable, S: Iterable[int]) -> float:
    S = item_set(S)
    missing = [i for i in S if i not in table.scores]
    if missing:
        raise KeyError(f"no test score for items {missing}")
    return max((table.scores[i] for i in S), default=0.0)
