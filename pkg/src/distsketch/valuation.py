"""Valuation functions ``f`` applied to vectors of item values.

Every valuation evaluates along the last axis of an array, so a batch of
outcomes of shape ``(m, k)`` yields ``m`` values. Coordinates for items outside
a set are treated as zero, which for all built-in variants means they can
simply be omitted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .exceptions import DomainError

_SLACK = 1e-9


# ---------------------------------------------------------------------------
# Univariate maps: used as concave outer functions g, as change-of-variable
# transforms phi, and as the scalar curve x -> f(x e_1).
# ---------------------------------------------------------------------------


class ScalarMap:
    """Continuous, strictly increasing map of R+ with ``map(0) == 0``."""

    kind = "abstract"
    #: supremum of the range; inverses reject values at or above it
    sup = math.inf

    def __call__(self, z):
        raise NotImplementedError

    def inverse(self, y):
        raise NotImplementedError

    @property
    def min_elasticity(self) -> float:
        raise NotImplementedError(f"{self.kind} has no declared elasticity")

    def to_json(self) -> dict:
        raise TypeError(f"{type(self).__name__} is not serializable")


@dataclass(frozen=True)
class Identity(ScalarMap):
    kind = "identity"

    def __call__(self, z):
        return np.asarray(z, dtype=float) if np.ndim(z) else float(z)

    def inverse(self, y):
        return self(y)

    @property
    def min_elasticity(self) -> float:
        return 1.0

    def to_json(self) -> dict:
        return {"kind": "identity"}


@dataclass(frozen=True)
class Power(ScalarMap):
    """``z -> z**exponent``."""

    exponent: float
    kind = "power"

    def __post_init__(self):
        if not self.exponent > 0:
            raise ValueError(f"power exponent must be positive, got {self.exponent}")

    def __call__(self, z):
        return np.power(z, self.exponent)

    def inverse(self, y):
        return np.power(y, 1.0 / self.exponent)

    @property
    def min_elasticity(self) -> float:
        if self.exponent > 1:
            raise ValueError("z**r with r > 1 is not concave")
        return float(self.exponent)

    def to_json(self) -> dict:
        return {"kind": "power", "exponent": self.exponent}


@dataclass(frozen=True)
class Sqrt(Power):
    exponent: float = 0.5
    kind = "sqrt"

    def __post_init__(self):
        if self.exponent != 0.5:
            raise ValueError("Sqrt has a fixed exponent of 0.5")

    def to_json(self) -> dict:
        return {"kind": "sqrt"}


@dataclass(frozen=True)
class ExpSaturation(ScalarMap):
    """``z -> 1 - exp(-rate * z)``; elasticity decays from 1 to 0."""

    rate: float = 1.0
    kind = "exp_saturation"
    sup = 1.0

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError(f"rate must be positive, got {self.rate}")

    def __call__(self, z):
        return -np.expm1(-self.rate * np.asarray(z, dtype=float))

    def inverse(self, y):
        return -np.log1p(-np.asarray(y, dtype=float)) / self.rate

    @property
    def min_elasticity(self) -> float:
        return 0.0

    def to_json(self) -> dict:
        return {"kind": "exp_saturation", "rate": self.rate}


@dataclass(frozen=True)
class Composed(ScalarMap):
    """``z -> outer(inner(z))``."""

    outer: ScalarMap
    inner: ScalarMap
    kind = "composed"

    @property
    def sup(self):
        return self.outer.sup if self.inner.sup == math.inf else float(self.outer(self.inner.sup))

    def __call__(self, z):
        return self.outer(self.inner(z))

    def inverse(self, y):
        return self.inner.inverse(self.outer.inverse(y))

    def to_json(self) -> dict:
        return {"kind": "composed", "outer": self.outer.to_json(), "inner": self.inner.to_json()}


@dataclass(frozen=True, eq=False)
class CustomMap(ScalarMap):
    """User-supplied map; validated for monotonicity on a probe grid."""

    func: Callable
    inv: Callable
    name: str = "custom"
    kind = "custom"

    def __post_init__(self):
        grid = np.concatenate([[0.0], np.geomspace(1e-6, 1e6, 400)])
        vals = np.asarray(self.func(grid), dtype=float)
        if abs(vals[0]) > _SLACK:
            raise ValueError(f"transform {self.name!r} must map 0 to 0")
        if not np.all(np.diff(vals) > 0):
            raise ValueError(f"transform {self.name!r} is not strictly increasing")

    def __call__(self, z):
        return self.func(z)

    def inverse(self, y):
        return self.inv(y)


def compose(outer: ScalarMap, inner: ScalarMap) -> ScalarMap:
    if isinstance(inner, Identity):
        return outer
    if isinstance(outer, Identity):
        return inner
    if isinstance(outer, Power) and isinstance(inner, Power):
        p = outer.exponent * inner.exponent
        return Identity() if math.isclose(p, 1.0, rel_tol=0, abs_tol=1e-15) else Power(p)
    return Composed(outer, inner)


def map_from_json(obj: Mapping[str, Any]) -> ScalarMap:
    kind = obj.get("kind")
    if kind == "identity":
        return Identity()
    if kind == "sqrt":
        return Sqrt()
    if kind == "power":
        return Power(float(obj["exponent"]))
    if kind == "exp_saturation":
        return ExpSaturation(float(obj.get("rate", 1.0)))
    if kind == "composed":
        return compose(map_from_json(obj["outer"]), map_from_json(obj["inner"]))
    raise ValueError(f"unknown scalar map kind: {kind!r}")


# ---------------------------------------------------------------------------
# Structural metadata
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FunctionProperties:
    monotone: bool = True
    subadditive: bool = True
    submodular: bool = True
    degree: float = 1.0
    tolerance: float = 1.0
    extendable_concave: bool = False
    coordinate_wise_degree: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.degree <= 1.0:
            raise ValueError(f"degree must lie in [0, 1], got {self.degree}")
        if self.tolerance < 1.0:
            raise ValueError(f"tolerance must be >= 1, got {self.tolerance}")
        if self.extendable_concave and not (self.monotone and self.subadditive):
            raise ValueError("extendable concave functions must be monotone and subadditive")

    def to_json(self) -> dict:
        return {
            "monotone": self.monotone,
            "subadditive": self.subadditive,
            "submodular": self.submodular,
            "degree": self.degree,
            "tolerance": self.tolerance,
            "extendable_concave": self.extendable_concave,
            "coordinate_wise_degree": self.coordinate_wise_degree,
        }

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> "FunctionProperties":
        unknown = set(obj) - set(cls().to_json())
        if unknown:
            raise ValueError(f"unknown property fields: {sorted(unknown)}")
        return cls(**obj)


@dataclass(frozen=True)
class Decomposition:
    """``f(x) = outer(aggregate_i inner(x_i))``.

    For ``kind == "prod"`` the outer map is always ``z -> 1 - z``, so the
    expectation over independent items factorizes.
    """

    kind: str  # "max" | "sum" | "prod"
    inner: Callable
    outer: Callable


# ---------------------------------------------------------------------------
# Valuations
# ---------------------------------------------------------------------------


def _as_matrix(x) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    return arr


class Valuation:
    """Base class; subclasses are frozen dataclasses."""

    variant = "abstract"

    def __call__(self, x, items: Sequence[int] | None = None):
        arr = _as_matrix(x)
        self.check_domain(arr)
        if arr.shape[-1] == 0:
            return np.zeros(arr.shape[:-1]) if arr.ndim > 1 else 0.0
        out = self._apply(arr)
        return out if arr.ndim > 1 else float(out)

    def _apply(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def check_domain(self, x: np.ndarray) -> None:
        if not np.all(np.isfinite(x)):
            raise DomainError("values must be finite")
        if np.any(x < 0):
            raise DomainError("values must be non-negative")

    def scalar_curve(self, item: int | None = None) -> ScalarMap:
        """The map ``x -> f(x e_1)``."""
        return Identity()

    def scalar_inverse(self, y: float, item: int | None = None) -> float:
        curve = self.scalar_curve(item)
        y = float(y)
        if not np.isfinite(y) or y < 0:
            raise DomainError(f"{y} is outside the scalar range of {self.label}")
        upper = curve.sup
        if y > upper or (y == upper and upper != self._scalar_max()):
            raise DomainError(f"{y} is outside the scalar range of {self.label}")
        return float(curve.inverse(y))

    def _scalar_max(self) -> float:
        # attained maximum of the scalar curve, if any
        return math.inf

    def properties(self, n: int | None = None) -> FunctionProperties:
        raise NotImplementedError

    def decomposition(self) -> Decomposition | None:
        return None

    @property
    def label(self) -> str:
        return self.variant

    def to_json(self) -> dict:
        return {"variant": self.variant}


@dataclass(frozen=True)
class Max(Valuation):
    variant = "max"

    def _apply(self, x):
        return x.max(axis=-1)

    def properties(self, n=None):
        return FunctionProperties()

    def decomposition(self):
        return Decomposition("max", _identity, _identity)


@dataclass(frozen=True)
class TopH(Valuation):
    """Sum of the ``h`` largest coordinates."""

    h: int = 1
    variant = "top_h"

    def __post_init__(self):
        if int(self.h) != self.h or self.h < 1:
            raise ValueError(f"h must be a positive integer, got {self.h}")

    def _apply(self, x):
        if x.shape[-1] <= self.h:
            return x.sum(axis=-1)
        part = np.partition(x, x.shape[-1] - self.h, axis=-1)
        return part[..., -self.h:].sum(axis=-1)

    def properties(self, n=None):
        return FunctionProperties()

    @property
    def label(self):
        return f"top_h{self.h}"

    def to_json(self):
        return {"variant": self.variant, "h": self.h}


@dataclass(frozen=True)
class CES(Valuation):
    """``(sum x_i**r) ** (1/r)`` with ``r >= 1``."""

    r: float = 2.0
    variant = "ces"

    def __post_init__(self):
        if not self.r >= 1:
            raise ValueError(f"CES requires r >= 1, got {self.r}")

    def _apply(self, x):
        if self.r == 1:
            return x.sum(axis=-1)
        # rescale by the row max to avoid overflow for large r
        scale = x.max(axis=-1, keepdims=True)
        safe = np.where(scale > 0, scale, 1.0)
        return safe[..., 0] * np.power(np.power(x / safe, self.r).sum(axis=-1), 1.0 / self.r)

    def properties(self, n=None):
        return FunctionProperties()

    def decomposition(self):
        r = self.r
        return Decomposition("sum", lambda v: np.power(v, r), lambda z: np.power(z, 1.0 / r))

    @property
    def label(self):
        return f"ces_r{self.r:g}"

    def to_json(self):
        return {"variant": self.variant, "r": self.r}


@dataclass(frozen=True)
class PowerOfSum(Valuation):
    """``(sum x_i) ** r`` with ``r in (0, 1]``."""

    r: float = 0.5
    variant = "power_of_sum"

    def __post_init__(self):
        if not 0 < self.r <= 1:
            raise ValueError(f"PowerOfSum requires r in (0, 1], got {self.r}")

    def _apply(self, x):
        return np.power(x.sum(axis=-1), self.r)

    def scalar_curve(self, item=None):
        return Identity() if self.r == 1 else Power(self.r)

    def properties(self, n=None):
        return FunctionProperties(degree=self.r, extendable_concave=self.r == 1)

    def decomposition(self):
        r = self.r
        return Decomposition("sum", _identity, lambda z: np.power(z, r))

    @property
    def label(self):
        return f"power_of_sum_r{self.r:g}"

    def to_json(self):
        return {"variant": self.variant, "r": self.r}


_CONCAVE_KINDS = (Power, ExpSaturation)


@dataclass(frozen=True)
class ConcaveOfSum(Valuation):
    """``g(sum x_i)`` for a concave, increasing ``g`` with ``g(0) = 0``."""

    g: ScalarMap = field(default_factory=Sqrt)
    variant = "concave_of_sum"

    def __post_init__(self):
        if not isinstance(self.g, _CONCAVE_KINDS):
            raise ValueError("g must be Sqrt, Power(r <= 1) or ExpSaturation")
        self.g.min_elasticity  # raises for non-concave powers

    def _apply(self, x):
        return self.g(x.sum(axis=-1))

    def scalar_curve(self, item=None):
        return self.g

    def properties(self, n=None):
        g = self.g
        extendable = isinstance(g, ExpSaturation) or (isinstance(g, Power) and g.exponent == 1)
        return FunctionProperties(degree=g.min_elasticity, extendable_concave=extendable)

    def decomposition(self):
        g = self.g
        if isinstance(g, ExpSaturation):
            rate = g.rate
            return Decomposition("prod", lambda v: np.exp(-rate * v), _one_minus)
        return Decomposition("sum", _identity, g)

    @property
    def label(self):
        g = self.g
        if isinstance(g, Sqrt):
            return "sqrt_sum"
        if isinstance(g, ExpSaturation):
            return f"expsat_sum_l{g.rate:g}"
        return f"pow_sum_r{g.exponent:g}"

    def to_json(self):
        return {"variant": self.variant, "g": self.g.to_json()}


@dataclass(frozen=True)
class SuccessProbability(Valuation):
    """``1 - prod(1 - x_i)`` on ``[0, 1]^n``."""

    variant = "success_probability"

    def check_domain(self, x):
        super().check_domain(x)
        if np.any(x > 1):
            raise DomainError("success probabilities must lie in [0, 1]")

    def _apply(self, x):
        return 1.0 - np.prod(1.0 - x, axis=-1)

    def _scalar_max(self):
        return 1.0

    def scalar_inverse(self, y, item=None):
        y = float(y)
        if not 0 <= y <= 1:
            raise DomainError(f"{y} is outside the scalar range [0, 1] of {self.label}")
        return y

    def properties(self, n=None):
        if n == 1:
            return FunctionProperties()
        return FunctionProperties(degree=0.5)

    def decomposition(self):
        return Decomposition("prod", _one_minus, _one_minus)


@dataclass(frozen=True)
class Transformed(Valuation):
    """``f*(x) = f(phi_1(x_1), ..., phi_n(x_n))``.

    ``transforms`` holds either one shared map or one map per item id (items
    are numbered from 1). Properties are declared, not derived.
    """

    base: Valuation
    transforms: tuple
    declared: FunctionProperties
    variant = "transformed"

    def __post_init__(self):
        if not self.transforms:
            raise ValueError("at least one transform is required")
        for phi in self.transforms:
            if not isinstance(phi, ScalarMap):
                raise TypeError(f"expected a ScalarMap, got {type(phi).__name__}")

    @property
    def shared(self) -> bool:
        return len(self.transforms) == 1

    def phi(self, item: int | None) -> ScalarMap:
        if self.shared:
            return self.transforms[0]
        if item is None:
            raise ValueError("per-item transforms need an item id")
        return self.transforms[item - 1]

    def __call__(self, x, items=None):
        arr = _as_matrix(x)
        Valuation.check_domain(self, arr)
        if arr.shape[-1] == 0:
            return np.zeros(arr.shape[:-1]) if arr.ndim > 1 else 0.0
        if self.shared:
            mapped = self.transforms[0](arr)
        else:
            if items is None or len(items) != arr.shape[-1]:
                raise ValueError("per-item transforms need one item id per coordinate")
            mapped = np.stack([self.phi(i)(arr[..., j]) for j, i in enumerate(items)], axis=-1)
        return self.base(mapped)

    def check_domain(self, x):
        Valuation.check_domain(self, x)
        if self.shared:
            self.base.check_domain(self.transforms[0](x))

    def scalar_curve(self, item=None):
        return compose(self.base.scalar_curve(), self.phi(item))

    def scalar_inverse(self, y, item=None):
        x = float(self.phi(item).inverse(self.base.scalar_inverse(y)))
        if not np.isfinite(x):
            raise DomainError(f"{y} is outside the scalar range of {self.label}")
        return x

    def properties(self, n=None):
        return self.declared

    def decomposition(self):
        inner_dec = self.base.decomposition()
        if inner_dec is None or not self.shared:
            return None
        phi = self.transforms[0]
        inner = inner_dec.inner
        return Decomposition(inner_dec.kind, lambda v: inner(phi(v)), inner_dec.outer)

    @property
    def label(self):
        return f"{self.base.label}_transformed"

    def to_json(self):
        return {
            "variant": self.variant,
            "base": self.base.to_json(),
            "transforms": [phi.to_json() for phi in self.transforms],
            "properties": self.declared.to_json(),
        }


def _identity(v):
    return v


def _one_minus(v):
    return 1.0 - v


# ---------------------------------------------------------------------------
# Functional interface
# ---------------------------------------------------------------------------


def evaluate(spec: Valuation, values: Mapping[int, float] | Sequence[float]) -> float:
    """Evaluate ``f`` on the values of a set; absent coordinates are zero."""
    if isinstance(values, Mapping):
        items = sorted(values)
        x = [values[i] for i in items]
        return float(spec(np.asarray(x, dtype=float).reshape(1, -1), items=items)[0])
    x = np.asarray(values, dtype=float).reshape(1, -1)
    return float(spec(x, items=list(range(1, x.shape[1] + 1)))[0])


def scalar_inverse(spec: Valuation, y: float) -> float:
    return spec.scalar_inverse(y)


def properties(spec: Valuation, n: int | None = None) -> FunctionProperties:
    return spec.properties(n)


def apply_transform(
    spec: Valuation,
    transforms: ScalarMap | Sequence[ScalarMap],
    properties: FunctionProperties | None = None,
) -> Valuation:
    """Change of variables ``x_i -> phi_i(x_i)``.

    Two composites have built-in properties: ``PowerOfSum(r)`` with
    ``Power(1/r)``, and ``SuccessProbability`` with ``ExpSaturation``.
    Anything else needs explicit ``properties``.
    """
    maps = (transforms,) if isinstance(transforms, ScalarMap) else tuple(transforms)
    if not maps:
        raise ValueError("at least one transform is required")
    for phi in maps:
        if not isinstance(phi, ScalarMap):
            raise TypeError("transforms must be ScalarMap instances")
    if all(isinstance(phi, Identity) for phi in maps):
        return spec
    declared = properties
    if declared is None and len(maps) == 1:
        declared = _worked_example_properties(spec, maps[0])
    if declared is None:
        raise ValueError(
            "properties of this composite are not known; pass properties= explicitly"
        )
    return Transformed(spec, maps, declared)


def _worked_example_properties(spec: Valuation, phi: ScalarMap) -> FunctionProperties | None:
    if isinstance(spec, PowerOfSum) and isinstance(phi, Power):
        if math.isclose(phi.exponent * spec.r, 1.0, rel_tol=1e-12):
            return FunctionProperties(degree=1.0, tolerance=1.0)
    if isinstance(spec, SuccessProbability) and isinstance(phi, ExpSaturation):
        return ConcaveOfSum(ExpSaturation(phi.rate)).properties()
    return None


@dataclass(frozen=True)
class HomogeneityCheck:
    ok: bool
    violated: str | None
    lower: float
    value: float
    upper: float

    def __bool__(self):
        return self.ok


def check_weak_homogeneity(
    spec: Valuation, x, theta: float, n: int | None = None, slack: float = _SLACK
) -> HomogeneityCheck:
    """Test ``theta f(x) / eta <= f(theta x) <= theta**d f(x)`` at one point."""
    if not 0 <= theta <= 1:
        raise ValueError(f"theta must lie in [0, 1], got {theta}")
    x = np.asarray(x, dtype=float)
    props = spec.properties(n if n is not None else x.size)
    items = list(range(1, x.size + 1))
    fx = float(spec(x.reshape(1, -1), items=items)[0])
    f_theta = float(spec((theta * x).reshape(1, -1), items=items)[0])
    lower = theta * fx / props.tolerance
    upper = theta ** props.degree * fx
    if fx < 1e-12:
        return HomogeneityCheck(True, None, lower, f_theta, upper)
    if f_theta < lower - slack:
        return HomogeneityCheck(False, "lower", lower, f_theta, upper)
    if f_theta > upper + slack:
        return HomogeneityCheck(False, "upper", lower, f_theta, upper)
    return HomogeneityCheck(True, None, lower, f_theta, upper)


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------


def from_json(obj: Mapping[str, Any]) -> Valuation:
    variant = obj.get("variant")
    if variant == "max":
        return Max()
    if variant == "top_h":
        return TopH(int(obj["h"]))
    if variant == "ces":
        return CES(float(obj["r"]))
    if variant == "power_of_sum":
        return PowerOfSum(float(obj["r"]))
    if variant == "concave_of_sum":
        g = obj["g"]
        return ConcaveOfSum(map_from_json(g if isinstance(g, Mapping) else {"kind": g}))
    if variant == "success_probability":
        return SuccessProbability()
    if variant == "transformed":
        base = from_json(obj["base"])
        maps = [map_from_json(t) for t in obj["transforms"]]
        props = obj.get("properties")
        return apply_transform(
            base, maps, FunctionProperties.from_json(props) if props is not None else None
        )
    raise ValueError(f"unknown valuation variant: {variant!r}")


def to_json(spec: Valuation) -> dict:
    return spec.to_json()

