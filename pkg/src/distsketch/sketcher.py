"""Per-item discretization of value distributions.

For an item with law ``P`` the summary is built in three moves:

1. values above the ``(1 - eps)``-quantile ``tau`` collapse onto one atom at
   ``f^{-1}(H)``, where ``H = E[f(X e_1) | X > tau]``;
2. values at or below ``a * tau`` collapse onto 0;
3. values in ``(a tau, tau]`` round down to the left edge of geometric bins
   with ratio ``1 / (1 - eps)``.

Only the quantile, the tail expectation and cdf range queries of ``P`` are
used, and each item is processed on its own.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .dist import DiscreteDistribution, ItemDistribution, as_discrete
from .exceptions import DomainError, SketchError
from .valuation import FunctionProperties, Valuation

WEAK_HOMOGENEOUS = "weakhom"
EXTENDABLE_CONCAVE = "concave"
COORDINATE_WISE = "coordinate"
VARIANTS = (WEAK_HOMOGENEOUS, EXTENDABLE_CONCAVE, COORDINATE_WISE)


@dataclass(frozen=True)
class SketchParams:
    epsilon: float
    lower_cut: float

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not 0 < self.lower_cut < 1:
            raise ValueError(f"lower_cut must lie in (0, 1), got {self.lower_cut}")

    @property
    def bin_count(self) -> int:
        return bin_count(self.epsilon, self.lower_cut)


@dataclass(frozen=True)
class SketchResult:
    summary: DiscreteDistribution
    tau: float
    tail_mean: float
    tail_atom: float
    bin_count: int
    delta_at_tau: float
    params: SketchParams | None = field(default=None, compare=False)

    @property
    def zero_mass(self) -> float:
        return self.summary.atom_mass_at(0.0)

    def to_json(self) -> dict:
        out = {
            "tau": self.tau,
            "tail_mean": self.tail_mean,
            "tail_atom": self.tail_atom,
            "bin_count": self.bin_count,
            "delta_at_tau": self.delta_at_tau,
            "summary": self.summary.to_json(),
        }
        if self.params is not None:
            out["epsilon"] = self.params.epsilon
            out["lower_cut"] = self.params.lower_cut
        return out

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> "SketchResult":
        params = None
        if "epsilon" in obj and "lower_cut" in obj:
            params = SketchParams(float(obj["epsilon"]), float(obj["lower_cut"]))
        return cls(
            summary=DiscreteDistribution.from_atoms(obj["summary"]["atoms"]),
            tau=float(obj["tau"]),
            tail_mean=float(obj["tail_mean"]),
            tail_atom=float(obj["tail_atom"]),
            bin_count=int(obj["bin_count"]),
            delta_at_tau=float(obj.get("delta_at_tau", 0.0)),
            params=params,
        )


@dataclass(frozen=True)
class BoundReport:
    """``alpha * v(S) <= u(S) <= beta * v(S)`` for ``|S| <= k``."""

    alpha: float
    beta: float
    variant: str
    psi: float | None = None

    def __post_init__(self):
        if not 0 < self.alpha <= self.beta:
            raise ValueError(f"need 0 < alpha <= beta, got {self.alpha}, {self.beta}")

    def contains(self, u: float, v: float, slack: float = 1e-9) -> bool:
        return self.alpha * v - slack <= u <= self.beta * v + slack

    def to_json(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "variant": self.variant, "psi": self.psi}


# ---------------------------------------------------------------------------
# Binning
# ---------------------------------------------------------------------------


def bin_count(epsilon: float, lower_cut: float) -> int:
    """Largest integer ``l`` with ``l <= log_{1/(1-eps)}(1/a)``."""
    ratio = math.log(1.0 / lower_cut) / -math.log1p(-epsilon)
    nearest = round(ratio)
    # absorb roundoff when the logarithm is an integer
    if abs(ratio - nearest) <= 1e-9 * max(1.0, ratio):
        return int(nearest)
    return int(math.floor(ratio))


def bin_edges(tau: float, epsilon: float, lower_cut: float) -> np.ndarray:
    """Edges ``a tau, a tau r, ..., a tau r^l`` and, if it is larger, ``tau``."""
    lvl = bin_count(epsilon, lower_cut)
    r = 1.0 / (1.0 - epsilon)
    edges = lower_cut * tau * np.power(r, np.arange(lvl + 1, dtype=float))
    edges = np.minimum(edges, tau)
    if edges[-1] < tau:
        edges = np.append(edges, tau)
    return edges


def quantize(x, tau: float, epsilon: float, lower_cut: float):
    """Map ``x`` in ``(a tau, tau]`` to the left edge of its bin.

    Bins are left-open, right-closed; the last one is truncated at ``tau``.
    Works elementwise on arrays.
    """
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    SketchParams(epsilon, lower_cut)
    arr = np.asarray(x, dtype=float)
    lo = lower_cut * tau
    if np.any(~(arr > lo)) or np.any(arr > tau):
        raise DomainError(f"quantize is defined on ({lo}, {tau}] only")
    lvl = bin_count(epsilon, lower_cut)
    r = 1.0 / (1.0 - epsilon)
    log_r = -math.log1p(-epsilon)
    j = np.ceil(np.log(arr / lo) / log_r)
    j = np.clip(j, 1, lvl + 1)

    def left(jj):
        return lo * np.power(r, jj - 1)

    def right(jj):
        return np.where(jj > lvl, tau, np.minimum(lo * np.power(r, jj), tau))

    # one correction step either way absorbs roundoff in the logarithm
    j = np.where((arr > right(j)) & (j <= lvl), j + 1, j)
    j = np.where((arr <= left(j)) & (j > 1), j - 1, j)
    out = left(j)
    return float(out) if out.ndim == 0 else out


def bin_index(x, tau: float, epsilon: float, lower_cut: float):
    """1-based index of the bin holding ``x``; ``l + 1`` is the truncated bin."""
    q = np.asarray(quantize(x, tau, epsilon, lower_cut))
    lo = lower_cut * tau
    r = 1.0 / (1.0 - epsilon)
    j = np.rint(np.log(q / lo) / math.log(r)).astype(np.int64) + 1
    return int(j) if j.ndim == 0 else j


# ---------------------------------------------------------------------------
# Discretization
# ---------------------------------------------------------------------------


def discretize(
    dist: ItemDistribution,
    spec: Valuation,
    params: SketchParams,
    item: int | None = None,
) -> SketchResult:
    """Summarize one item's distribution for valuation ``spec``."""
    eps, a = params.epsilon, params.lower_cut
    tau = dist.quantile(1.0 - eps)
    tail = dist.tail_mass(tau)
    if not tail > 0:
        raise SketchError(f"zero probability mass above tau={tau:.6g}")
    delta = dist.atom_mass_at(tau)
    if not eps > delta:
        raise SketchError(f"epsilon={eps} must exceed the atom mass {delta:.6g} at tau")
    if not tau > 0:
        raise SketchError("tau is zero; the lower cut and bins are empty")
    curve = spec.scalar_curve(item)
    try:
        h = dist.tail_value(curve, tau)
        tail_atom = spec.scalar_inverse(h, item)
    except DomainError as exc:
        raise SketchError(f"tail summary failed: {exc}") from exc

    edges = bin_edges(tau, eps, a)
    cum = np.asarray(dist.cdf(edges), dtype=float)
    zero_mass = float(cum[0])
    bin_masses = np.diff(cum)
    values = np.concatenate([[0.0], edges[:-1], [tail_atom]])
    masses = np.concatenate([[zero_mass], bin_masses, [tail]])
    summary = DiscreteDistribution.from_arrays(values, masses)
    return SketchResult(
        summary=summary,
        tau=float(tau),
        tail_mean=float(h),
        tail_atom=float(tail_atom),
        bin_count=bin_count(eps, a),
        delta_at_tau=float(delta),
        params=params,
    )


def apply_sketch(x, sketch: SketchResult):
    """Couple raw values with summary values: ``x -> Y``.

    Values above ``tau`` map to the tail atom, values at or below ``a tau``
    map to 0, the rest are quantized.
    """
    if sketch.params is None:
        raise ValueError("sketch does not carry its parameters")
    eps, a = sketch.params.epsilon, sketch.params.lower_cut
    tau = sketch.tau
    arr = np.asarray(x, dtype=float)
    out = np.zeros_like(arr)
    mid = (arr > a * tau) & (arr <= tau)
    if np.any(mid):
        out[mid] = quantize(arr[mid], tau, eps, a)
    out[arr > tau] = sketch.tail_atom
    return float(out) if out.ndim == 0 else out


def stage_distributions(
    dist: ItemDistribution, spec: Valuation, params: SketchParams, item: int | None = None
) -> dict[str, DiscreteDistribution]:
    """Intermediate laws for an atomic input.

    ``"capped"`` keeps values up to ``tau`` and moves the tail onto its atom,
    ``"truncated"`` is ``X 1{X <= tau}``, ``"cut"`` additionally zeroes values
    at or below ``a tau``, and ``"summary"`` is the final sketch.
    """
    base = as_discrete(dist)
    sk = discretize(base, spec, params, item)
    tau, a = sk.tau, params.lower_cut
    v, p = base.values, base.probs
    below = v <= tau
    capped = DiscreteDistribution.from_arrays(
        np.append(v[below], sk.tail_atom), np.append(p[below], p[~below].sum())
    )
    truncated = DiscreteDistribution.from_arrays(np.where(below, v, 0.0), p)
    cut_vals = np.where(capped.values > a * tau, capped.values, 0.0)
    cut = DiscreteDistribution.from_arrays(cut_vals, capped.probs)
    return {"capped": capped, "truncated": truncated, "cut": cut, "summary": sk.summary}


# ---------------------------------------------------------------------------
# Parameters and guarantees
# ---------------------------------------------------------------------------


def lower_cut_for(epsilon: float, delta: float, degree: float) -> float:
    """``a = [eps (eps - delta)] ** (1 / d)``."""
    if not 0 < degree <= 1:
        raise ValueError(f"degree must lie in (0, 1], got {degree}")
    if not epsilon > delta:
        raise SketchError(f"epsilon={epsilon} must exceed delta={delta}")
    a = (epsilon * (epsilon - delta)) ** (1.0 / degree)
    if not 0 < a < 1:
        raise SketchError(f"lower cut {a} falls outside (0, 1)")
    return a


def default_params(k: int, c: float, d: float, delta: float = 0.0) -> SketchParams:
    """``eps = c / k`` and ``a = [eps (eps - delta)] ** (1 / d)`` for ``c in (delta k, 1)``."""
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    if delta < 0:
        raise ValueError("delta must be non-negative")
    if not delta * k < c < 1:
        raise SketchError(f"c={c} must lie in (delta*k, 1) = ({delta * k:.6g}, 1)")
    eps = c / k
    return SketchParams(eps, lower_cut_for(eps, delta, d))


def bound_variant(props: FunctionProperties) -> str:
    """Pick the guarantee that applies to a valuation's declared properties."""
    if not props.monotone or not (props.subadditive or props.submodular):
        raise ValueError("guarantees need a monotone subadditive or submodular valuation")
    if props.degree > 0:
        return WEAK_HOMOGENEOUS
    if props.extendable_concave:
        return EXTENDABLE_CONCAVE
    raise ValueError("degree-0 valuations are covered only when extendable concave")


def effective_degree(props: FunctionProperties, variant: str | None = None) -> float:
    """Degree that enters ``a``; the concave route uses exponent 1."""
    variant = variant or bound_variant(props)
    return 1.0 if variant == EXTENDABLE_CONCAVE else props.degree


def params_for(
    props: FunctionProperties, epsilon: float, delta: float = 0.0, variant: str | None = None
) -> SketchParams:
    return SketchParams(epsilon, lower_cut_for(epsilon, delta, effective_degree(props, variant)))


def psi(c: float, delta: float) -> float:
    """``exp(-c / (1 - c)) * (1 - delta)``."""
    if not 0 < c < 1:
        raise ValueError(f"c must lie in (0, 1), got {c}")
    return math.exp(-c / (1.0 - c)) * (1.0 - delta)


def approximation_factors(
    k: int,
    epsilon: float,
    lower_cut: float,
    delta: float = 0.0,
    degree: float = 1.0,
    tolerance: float = 1.0,
    variant: str = WEAK_HOMOGENEOUS,
) -> BoundReport:
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    if k < 1:
        raise ValueError("k must be at least 1")
    if not delta < epsilon < 1:
        raise SketchError(f"need delta < epsilon < 1, got delta={delta}, epsilon={epsilon}")
    if not 0 < lower_cut < 1:
        raise ValueError("lower_cut must lie in (0, 1)")
    eps, a = epsilon, lower_cut
    keep = 1.0 - delta / eps
    alpha = 0.5 * (1 - eps) ** (k - 1) * keep
    if variant == WEAK_HOMOGENEOUS:
        beta = 2 * tolerance * (1 + a**degree * k / (eps - delta)) / ((1 - eps) ** k * keep)
    elif variant == EXTENDABLE_CONCAVE:
        beta = 2 * (1 + a * k / (eps - delta)) / ((1 - eps) ** k * keep)
    else:
        beta = 2 * tolerance**k * (1 + a**degree * k / (eps - delta)) / (1 - eps) ** (2 * k)
    return BoundReport(alpha, beta, variant)


def closed_form_factors(
    k: int, c: float, delta: float = 0.0, tolerance: float = 1.0, variant: str = WEAK_HOMOGENEOUS
) -> BoundReport:
    """Closed-form factors for ``eps = c / k`` and the matching default ``a``."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    if not delta * k < c < 1:
        raise SketchError(f"c={c} must lie in (delta*k, 1)")
    if variant == COORDINATE_WISE and tolerance != 1:
        raise ValueError("the coordinate-wise closed form needs tolerance 1")
    eta = 1.0 if variant == EXTENDABLE_CONCAVE else tolerance
    p = psi(c, delta * k / c)
    return BoundReport(0.5 * p, 2 * eta * (1 + c) / p, variant, psi=p)


def greedy_ratio(c: float, delta: float, k: int, tolerance: float, rho: float) -> float:
    """Guarantee for greedy run on the sketch, measured under the true objective."""
    return psi(c, delta * k / c) ** 2 / (1 + c) * rho / (4 * tolerance)
