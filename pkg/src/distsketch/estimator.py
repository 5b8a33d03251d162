"""Scikit-learn style wrappers around the functional sketching API.

Both estimators take a samples matrix whose columns are items (item ``j``
is column ``j - 1``) and learn one summary per column.
"""

from __future__ import annotations

from typing import Iterable

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_non_negative

from . import valuation as val
from .baseline import build_table, testscore_sketch_value
from .dist import ItemDistribution, from_samples
from .evaluation import expected_value, item_set
from .sketcher import (
    BoundReport,
    SketchParams,
    approximation_factors,
    apply_sketch,
    bound_variant,
    discretize,
    effective_degree,
    lower_cut_for,
)

_NAMED = {
    "max": val.Max,
    "sqrt_sum": lambda: val.ConcaveOfSum(val.Sqrt()),
    "success_probability": val.SuccessProbability,
}


def resolve_valuation(spec) -> val.Valuation:
    """Accept a ``Valuation``, its JSON object, or a short name."""
    if isinstance(spec, val.Valuation):
        return spec
    if isinstance(spec, dict):
        return val.from_json(spec)
    if isinstance(spec, str) and spec in _NAMED:
        return _NAMED[spec]()
    raise ValueError(f"cannot interpret valuation {spec!r}")


def _item_laws(X) -> dict[int, ItemDistribution]:
    if isinstance(X, dict):
        return {int(i): d for i, d in X.items()}
    if isinstance(X, (list, tuple)) and X and all(isinstance(d, ItemDistribution) for d in X):
        return {i + 1: d for i, d in enumerate(X)}
    arr = check_array(X, dtype=float, ensure_min_samples=1)
    check_non_negative(arr, "sketch input")
    return {j + 1: from_samples(arr[:, j]) for j in range(arr.shape[1])}


class DiscretizationSketch(TransformerMixin, BaseEstimator):
    """Per-item discrete summaries for a valuation.

    Parameters
    ----------
    valuation : Valuation, dict or str, default="max"
        The valuation ``f``; see :func:`resolve_valuation`.
    epsilon : float, default=0.1
        Tail mass kept above ``tau``; must exceed every item's atom mass at ``tau``.
    lower_cut : float or "auto", default="auto"
        ``a``. With ``"auto"`` it is ``[eps (eps - delta)] ** (1 / d)`` with
        ``delta`` the largest atom mass at ``tau`` over items.

    Attributes
    ----------
    sketches_ : dict of int to SketchResult
    lower_cut_ : float
    delta_ : float
    n_features_in_ : int
    """

    def __init__(self, valuation="max", epsilon=0.1, lower_cut="auto"):
        self.valuation = valuation
        self.epsilon = epsilon
        self.lower_cut = lower_cut

    def fit(self, X, y=None):
        """Summarize each item.

        ``X`` is an ``(n_samples, n_items)`` array, a list of distributions
        or a mapping from item id to distribution.
        """
        spec = resolve_valuation(self.valuation)
        laws = _item_laws(X)
        eps = float(self.epsilon)
        if not 0 < eps < 1:
            raise ValueError(f"epsilon must lie in (0, 1), got {eps}")
        delta = max(d.atom_mass_at(d.quantile(1.0 - eps)) for d in laws.values())
        if self.lower_cut == "auto":
            props = spec.properties(len(laws))
            a = lower_cut_for(eps, delta, effective_degree(props))
        else:
            a = float(self.lower_cut)
        params = SketchParams(eps, a)
        self.valuation_ = spec
        self.sketches_ = {i: discretize(d, spec, params, item=i) for i, d in laws.items()}
        self.lower_cut_ = a
        self.delta_ = float(delta)
        self.n_features_in_ = len(laws)
        return self

    def transform(self, X):
        """Replace each raw value by its summary value (same shape)."""
        check_is_fitted(self, "sketches_")
        arr = check_array(X, dtype=float)
        check_non_negative(arr, "sketch input")
        if arr.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {arr.shape[1]} columns, expected {self.n_features_in_}"
            )
        out = np.empty_like(arr)
        for j in range(arr.shape[1]):
            out[:, j] = apply_sketch(arr[:, j], self.sketches_[j + 1])
        return out

    @property
    def summaries_(self):
        check_is_fitted(self, "sketches_")
        return {i: sk.summary for i, sk in self.sketches_.items()}

    def value(self, S: Iterable[int], method: str = "fast", n_samples: int = 10_000, seed: int = 0):
        """``v(S)`` on the fitted summaries as an :class:`EvalEstimate`."""
        check_is_fitted(self, "sketches_")
        S = item_set(S, self.n_features_in_)
        return expected_value(self.valuation_, self.summaries_, S, method, n_samples, seed)

    def bounds(self, k: int) -> BoundReport:
        """Approximation factors for sets of size at most ``k``."""
        check_is_fitted(self, "sketches_")
        props = self.valuation_.properties(self.n_features_in_)
        return approximation_factors(
            k, float(self.epsilon), self.lower_cut_, self.delta_, props.degree,
            props.tolerance, bound_variant(props),
        )


class TestScoreSketch(BaseEstimator):
    """Replication test-score baseline: one number per item, max over a set."""

    __test__ = False

    def __init__(self, valuation="max", k=1, n_samples=1000, seed=0):
        self.valuation = valuation
        self.k = k
        self.n_samples = n_samples
        self.seed = seed

    def fit(self, X, y=None):
        spec = resolve_valuation(self.valuation)
        laws = _item_laws(X)
        self.table_ = build_table(laws, spec, int(self.k), int(self.n_samples), int(self.seed))
        self.n_features_in_ = len(laws)
        return self

    def value(self, S: Iterable[int]) -> float:
        check_is_fitted(self, "table_")
        return testscore_sketch_value(self.table_, S)


__all__ = ["DiscretizationSketch", "TestScoreSketch", "resolve_valuation"]
