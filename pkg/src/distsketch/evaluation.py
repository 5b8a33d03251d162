"""Expected set valuations ``u(S) = E[f((X_i, i in S))]`` for independent items."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .dist import DiscreteDistribution, ItemDistribution, as_discrete
from .exceptions import CapacityError
from .rng import stream
from .valuation import Valuation

EXACT = "exact"
FAST = "fast"
MONTE_CARLO = "mc"

#: default cap on the number of joint outcomes enumerated exactly
ENUMERATION_CAP = 10_000_000
#: default cap on the support of an exact convolution
CONVOLUTION_CAP = 2_000_000
#: atoms of a convolution closer than this are merged
MERGE_TOL = 1e-12
_CHUNK = 1 << 18


@dataclass(frozen=True)
class EvalEstimate:
    value: float
    std_error: float
    method: str
    n_samples: int | None = None
    seed: int | None = None

    def __post_init__(self):
        if (self.method == MONTE_CARLO) != (self.n_samples is not None):
            raise ValueError("n_samples is set exactly for Monte Carlo estimates")
        if self.method != MONTE_CARLO and self.std_error != 0:
            raise ValueError("exact estimates carry no standard error")

    @property
    def exact(self) -> bool:
        return self.method != MONTE_CARLO

    def to_json(self) -> dict:
        out = {"value": self.value, "std_error": self.std_error, "method": self.method}
        if self.method == MONTE_CARLO:
            out["n_samples"] = self.n_samples
            out["seed"] = self.seed
        return out


def item_set(items: Iterable[int], n: int | None = None) -> tuple[int, ...]:
    """Validate and normalize an item set: sorted, distinct ids in ``[1, n]``."""
    out = tuple(sorted(int(i) for i in items))
    if len(set(out)) != len(out):
        raise ValueError(f"duplicate items in {out}")
    if out and out[0] < 1:
        raise ValueError("item ids start at 1")
    if n is not None and out and out[-1] > n:
        raise ValueError(f"item {out[-1]} exceeds ground set size {n}")
    return out


def parse_item_set(text: str) -> tuple[int, ...]:
    text = text.strip()
    if not text:
        return ()
    return item_set(int(tok) for tok in text.replace(";", ",").split(","))


def _empty(spec: Valuation) -> float:
    return float(spec(np.zeros((1, 0)))[0])


def _lookup(dists: Mapping[int, ItemDistribution], S) -> list:
    missing = [i for i in S if i not in dists]
    if missing:
        raise KeyError(f"no distribution for items {missing}")
    return [dists[i] for i in S]


# ---------------------------------------------------------------------------
# Exact enumeration
# ---------------------------------------------------------------------------


def expected_value_exact(
    spec: Valuation,
    dists: Mapping[int, ItemDistribution],
    S: Iterable[int],
    cap: int = ENUMERATION_CAP,
) -> EvalEstimate:
    """Sum ``f(outcome) * P(outcome)`` over the product of supports."""
    S = item_set(S)
    if not S:
        return EvalEstimate(_empty(spec), 0.0, EXACT)
    laws = [as_discrete(d) for d in _lookup(dists, S)]
    sizes = [law.size for law in laws]
    total = math.prod(sizes)
    if total > cap:
        raise CapacityError(
            f"{total} joint outcomes exceed the enumeration cap {cap}; "
            "use the fast path or Monte Carlo"
        )
    acc = 0.0
    for start in range(0, total, _CHUNK):
        flat = np.arange(start, min(start + _CHUNK, total))
        idx = np.unravel_index(flat, sizes)
        x = np.stack([law.values[i] for law, i in zip(laws, idx)], axis=-1)
        w = np.prod(np.stack([law.probs[i] for law, i in zip(laws, idx)], axis=-1), axis=-1)
        acc += float(np.dot(spec(x, items=S), w))
    return EvalEstimate(acc, 0.0, EXACT)


# ---------------------------------------------------------------------------
# Fast exact paths
# ---------------------------------------------------------------------------


def _max_law(laws: list[DiscreteDistribution]) -> tuple[np.ndarray, np.ndarray]:
    grid = np.unique(np.concatenate([law.values for law in laws]))
    joint = np.ones_like(grid)
    for law in laws:
        joint = joint * law.cdf(grid)
    probs = np.diff(np.concatenate([[0.0], joint]))
    return grid, probs


def _merge(values: np.ndarray, probs: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(values, kind="stable")
    values, probs = values[order], probs[order]
    starts = np.flatnonzero(np.concatenate([[True], np.diff(values) > tol]))
    return values[starts], np.add.reduceat(probs, starts)


def convolve(laws, cap: int = CONVOLUTION_CAP, tol: float = MERGE_TOL):
    """Exact law of a sum of independent atomic variables as ``(values, probs)``."""
    vals = np.zeros(1)
    probs = np.ones(1)
    for values, p in laws:
        if vals.size * np.size(values) > cap:
            raise CapacityError(
                f"convolution support {vals.size * np.size(values)} exceeds the cap {cap}; "
                "use Monte Carlo"
            )
        vals, probs = _merge(
            np.add.outer(vals, values).ravel(), np.multiply.outer(probs, p).ravel(), tol
        )
    return vals, probs


def expected_value_fast(
    spec: Valuation,
    dists: Mapping[int, ItemDistribution],
    S: Iterable[int],
    cap: int = CONVOLUTION_CAP,
) -> EvalEstimate:
    """Exact expectation for valuations of the form ``outer(agg inner(x_i))``."""
    dec = spec.decomposition()
    if dec is None:
        raise ValueError(f"{spec.label} does not decompose; use exact or Monte Carlo")
    S = item_set(S)
    if not S:
        return EvalEstimate(_empty(spec), 0.0, FAST)
    laws = [as_discrete(d) for d in _lookup(dists, S)]
    for law in laws:
        spec.check_domain(law.values.reshape(-1, 1))
    if dec.kind == "max":
        # inner maps are increasing, so they commute with max
        grid, probs = _max_law(laws)
        value = float(np.dot(dec.outer(dec.inner(grid)), probs))
    elif dec.kind == "prod":
        factor = 1.0
        for law in laws:
            factor *= float(np.dot(dec.inner(law.values), law.probs))
        value = 1.0 - factor
    elif dec.kind == "sum":
        mapped = [(np.asarray(dec.inner(law.values), dtype=float), law.probs) for law in laws]
        vals, probs = convolve(mapped[:-1], cap=cap)
        last_v, last_p = mapped[-1]
        if vals.size * last_v.size > cap:
            raise CapacityError(
                f"convolution support {vals.size * last_v.size} exceeds the cap {cap}; "
                "use Monte Carlo"
            )
        # the last step needs no merging, only the weighted sum
        value = float(probs @ dec.outer(np.add.outer(vals, last_v)) @ last_p)
    else:
        raise ValueError(f"unknown aggregation {dec.kind!r}")
    return EvalEstimate(value, 0.0, FAST)


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------


def draw_joint(
    dists: Mapping[int, ItemDistribution], S: Iterable[int], n_samples: int, seed: int
) -> np.ndarray:
    """``(n_samples, |S|)`` draws; item ``i`` always uses the stream ``(seed, i)``."""
    S = item_set(S)
    cols = [dists[i].sample(stream(seed, i), n_samples) for i in S]
    if not cols:
        return np.zeros((n_samples, 0))
    return np.stack(cols, axis=-1)


def expected_value_mc(
    spec: Valuation,
    dists: Mapping[int, ItemDistribution],
    S: Iterable[int],
    n_samples: int,
    seed: int,
) -> EvalEstimate:
    """Sample mean of ``f`` over ``n_samples`` independent joint draws."""
    if n_samples < 1:
        raise ValueError("need at least one sample")
    S = item_set(S)
    _lookup(dists, S)
    x = draw_joint(dists, S, n_samples, seed)
    vals = np.asarray(spec(x, items=S), dtype=float)
    mean = float(vals.mean())
    if n_samples > 1 and np.ptp(vals) > 0:
        se = float(vals.std(ddof=1) / math.sqrt(n_samples))
    else:
        se = 0.0
    return EvalEstimate(mean, se, MONTE_CARLO, n_samples=n_samples, seed=seed)


def expected_value(
    spec: Valuation,
    dists: Mapping[int, ItemDistribution],
    S: Iterable[int],
    method: str = FAST,
    n_samples: int = 10_000,
    seed: int = 0,
) -> EvalEstimate:
    if method == EXACT:
        return expected_value_exact(spec, dists, S)
    if method == FAST:
        return expected_value_fast(spec, dists, S)
    if method == MONTE_CARLO:
        return expected_value_mc(spec, dists, S, n_samples, seed)
    raise ValueError(f"unknown method {method!r}")


def set_function(
    spec: Valuation,
    dists: Mapping[int, ItemDistribution],
    method: str = FAST,
    n_samples: int = 10_000,
    seed: int = 0,
):
    """Wrap an evaluator as a plain ``S -> float`` oracle with a fixed seed."""

    def oracle(S) -> float:
        return expected_value(spec, dists, S, method, n_samples, seed).value

    return oracle
