"""Item value distributions.

Each distribution exposes the value-oracle surface that the discretization
consumes: ``cdf``, the generalized-inverse ``quantile``, the tail-conditional
expectation ``tail_value``, point masses, and inverse-transform sampling.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping

import numpy as np
from scipy import integrate, special

from .exceptions import DomainError
from .valuation import ExpSaturation, Identity, Power, ScalarMap

# tolerance on cumulative sums when locating quantiles of atomic laws
_CUM_TOL = 1e-12


class ItemDistribution:
    family = "abstract"

    def cdf(self, x):
        raise NotImplementedError

    def quantile(self, p: float) -> float:
        p = float(p)
        if not 0 < p < 1:
            raise ValueError(f"quantile level must lie in (0, 1), got {p}")
        return float(self._ppf(np.asarray([p]))[0])

    def _ppf(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size=None):
        """Inverse-transform draws using ``rng``."""
        u = rng.random(size)
        out = self._ppf(np.atleast_1d(u))
        return float(out[0]) if size is None else out.reshape(np.shape(u))

    def tail_mass(self, tau: float) -> float:
        return 1.0 - float(self.cdf(tau))

    def tail_value(self, scalar_f: ScalarMap | Callable, tau: float) -> float:
        """``E[scalar_f(X) | X > tau]``."""
        if self.tail_mass(tau) <= 0:
            raise DomainError(f"no probability mass above tau={tau}")
        value = self._tail_value(scalar_f, float(tau))
        if not np.isfinite(value):
            raise DomainError("tail expectation is infinite")
        return float(value)

    def _tail_value(self, scalar_f, tau):
        raise NotImplementedError

    def atom_mass_at(self, x: float) -> float:
        return 0.0

    def max_atom_mass(self) -> float:
        return 0.0

    def to_json(self) -> dict:
        raise NotImplementedError


def _tail_by_quadrature(dist: ItemDistribution, scalar_f, tau: float) -> float:
    # conditional expectation via the quantile representation: E[f(X) | X > tau]
    # equals the average of f(F^{-1}(u)) over u in (F(tau), 1)
    start = max(float(dist.cdf(tau)), 0.0)
    f = scalar_f

    def integrand(u):
        return float(f(float(dist._ppf(np.asarray([u]))[0])))

    val, _ = integrate.quad(integrand, start, 1.0, limit=200)
    return val / (1.0 - start)


@dataclass(frozen=True)
class Exponential(ItemDistribution):
    mean: float
    family = "exponential"

    def __post_init__(self):
        if not self.mean > 0:
            raise ValueError(f"mean must be positive, got {self.mean}")

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x > 0, -np.expm1(-np.maximum(x, 0) / self.mean), 0.0)
        return float(out) if out.ndim == 0 else out

    def _ppf(self, u):
        return -self.mean * np.log1p(-u)

    def _tail_value(self, scalar_f, tau):
        t = max(tau, 0.0)
        mu = self.mean
        if isinstance(scalar_f, Identity):
            return t + mu
        if isinstance(scalar_f, Power):
            p = scalar_f.exponent
            z = t / mu
            if z < 500:
                upper = special.gammaincc(p + 1, z) * special.gamma(p + 1)
                return mu**p * upper * math.exp(z)
        if isinstance(scalar_f, ExpSaturation):
            lam = scalar_f.rate
            return 1.0 - math.exp(-lam * t) / (1.0 + lam * mu)
        return _tail_by_quadrature(self, scalar_f, tau)

    def to_json(self):
        return {"family": self.family, "mean": self.mean}


@dataclass(frozen=True)
class Pareto(ItemDistribution):
    """``P(X > x) = (scale / x) ** shape`` for ``x >= scale``."""

    shape: float
    scale: float
    family = "pareto"

    def __post_init__(self):
        if not self.shape > 1:
            raise ValueError(f"Pareto shape must exceed 1 for a finite mean, got {self.shape}")
        if not self.scale > 0:
            raise ValueError(f"Pareto scale must be positive, got {self.scale}")

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        safe = np.maximum(x, self.scale)
        out = np.where(x >= self.scale, 1.0 - (self.scale / safe) ** self.shape, 0.0)
        return float(out) if out.ndim == 0 else out

    def _ppf(self, u):
        return self.scale * np.power(1.0 - u, -1.0 / self.shape)

    def _tail_value(self, scalar_f, tau):
        t = max(tau, self.scale)
        a = self.shape
        if isinstance(scalar_f, Identity):
            return a * t / (a - 1)
        if isinstance(scalar_f, Power):
            p = scalar_f.exponent
            if p >= a:
                return math.inf
            return a * t**p / (a - p)
        return _tail_by_quadrature(self, scalar_f, tau)

    def to_json(self):
        return {"family": self.family, "shape": self.shape, "scale": self.scale}


@dataclass(frozen=True)
class Uniform(ItemDistribution):
    lo: float
    hi: float
    family = "uniform"

    def __post_init__(self):
        if not (self.lo >= 0 and self.hi > self.lo):
            raise ValueError(f"need 0 <= lo < hi, got lo={self.lo}, hi={self.hi}")

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.clip((x - self.lo) / (self.hi - self.lo), 0.0, 1.0)
        return float(out) if out.ndim == 0 else out

    def _ppf(self, u):
        return self.lo + u * (self.hi - self.lo)

    def _tail_value(self, scalar_f, tau):
        t = max(tau, self.lo)
        hi = self.hi
        if isinstance(scalar_f, Identity):
            return 0.5 * (t + hi)
        if isinstance(scalar_f, Power):
            p = scalar_f.exponent
            return (hi ** (p + 1) - t ** (p + 1)) / ((p + 1) * (hi - t))
        if isinstance(scalar_f, ExpSaturation):
            lam = scalar_f.rate
            return 1.0 - (math.exp(-lam * t) - math.exp(-lam * hi)) / (lam * (hi - t))
        return _tail_by_quadrature(self, scalar_f, tau)

    def to_json(self):
        return {"family": self.family, "lo": self.lo, "hi": self.hi}


class _Atomic(ItemDistribution):
    """Shared machinery for laws with finitely many atoms."""

    values: np.ndarray
    _cum: np.ndarray

    def cdf(self, x):
        idx = np.searchsorted(self.values, x, side="right")
        out = np.where(idx > 0, self._cum[np.maximum(idx - 1, 0)], 0.0)
        out = np.minimum(out, 1.0)
        return float(out) if np.ndim(out) == 0 else out

    def _ppf(self, u):
        idx = np.searchsorted(self._cum, u - _CUM_TOL, side="left")
        return self.values[np.minimum(idx, self.values.size - 1)]

    def tail_mass(self, tau):
        return float(self._weights()[self.values > tau].sum())

    def _tail_value(self, scalar_f, tau):
        above = self.values > tau
        w = self._weights()[above]
        return float(np.dot(np.asarray(scalar_f(self.values[above]), dtype=float), w) / w.sum())

    def _weights(self) -> np.ndarray:
        raise NotImplementedError

    def atom_mass_at(self, x):
        i = np.searchsorted(self.values, x)
        if i < self.values.size and self.values[i] == x:
            return float(self._weights()[i])
        return 0.0


class DiscreteDistribution(_Atomic):
    """Finite atom list with strictly ascending values and positive masses."""

    family = "discrete"

    def __init__(self, values, probs, *, atol: float = 1e-9):
        values = np.array(values, dtype=float).ravel()
        probs = np.array(probs, dtype=float).ravel()
        if values.size == 0 or values.size != probs.size:
            raise ValueError("need matching, non-empty values and probabilities")
        if np.any(~np.isfinite(values)) or np.any(values < 0):
            raise DomainError("atom values must be finite and non-negative")
        if np.any(np.diff(values) <= 0):
            raise ValueError("atom values must be strictly ascending")
        if np.any(probs <= 0) or np.any(probs > 1 + atol):
            raise ValueError("atom probabilities must lie in (0, 1]")
        if abs(probs.sum() - 1.0) > atol:
            raise ValueError(f"atom probabilities sum to {probs.sum()!r}, not 1")
        values.flags.writeable = False
        probs.flags.writeable = False
        self.values = values
        self.probs = probs
        self._cum = np.cumsum(probs)

    @classmethod
    def from_atoms(cls, atoms: Iterable, *, merge_tol: float = 0.0) -> "DiscreteDistribution":
        """Build from unordered ``(value, prob)`` pairs, merging equal values."""
        pairs = np.asarray(list(atoms), dtype=float).reshape(-1, 2)
        return cls.from_arrays(pairs[:, 0], pairs[:, 1], merge_tol=merge_tol)

    @classmethod
    def from_arrays(cls, values, probs, *, merge_tol: float = 0.0) -> "DiscreteDistribution":
        values = np.asarray(values, dtype=float).ravel()
        probs = np.asarray(probs, dtype=float).ravel()
        keep = probs > 0
        values, probs = values[keep], probs[keep]
        order = np.argsort(values, kind="stable")
        values, probs = values[order], probs[order]
        if values.size > 1:
            starts = np.concatenate([[True], np.diff(values) > merge_tol])
            idx = np.flatnonzero(starts)
            probs = np.add.reduceat(probs, idx)
            values = values[idx]
        return cls(values, probs)

    @classmethod
    def point_mass(cls, value: float) -> "DiscreteDistribution":
        return cls([value], [1.0])

    def _weights(self):
        return self.probs

    def max_atom_mass(self):
        return float(self.probs.max())

    def mean(self) -> float:
        return float(np.dot(self.values, self.probs))

    @property
    def size(self) -> int:
        return int(self.values.size)

    def atoms(self) -> list[tuple[float, float]]:
        return list(zip(self.values.tolist(), self.probs.tolist()))

    def map_values(self, fn: Callable) -> "DiscreteDistribution":
        """Law of ``fn(X)`` for strictly increasing ``fn``."""
        return DiscreteDistribution(np.asarray(fn(self.values), dtype=float), self.probs)

    def to_json(self):
        return {"atoms": [[v, p] for v, p in self.atoms()]}

    def __eq__(self, other):
        if not isinstance(other, DiscreteDistribution):
            return NotImplemented
        return np.array_equal(self.values, other.values) and np.array_equal(self.probs, other.probs)

    def __repr__(self):
        return f"DiscreteDistribution(size={self.size}, mean={self.mean():.6g})"


class Empirical(_Atomic):
    """Empirical law of a sample; ties are kept as repeated values."""

    family = "empirical"

    def __init__(self, samples):
        samples = np.array(samples, dtype=float).ravel()
        if samples.size == 0:
            raise ValueError("empirical distribution needs at least one sample")
        if np.any(~np.isfinite(samples)) or np.any(samples < 0):
            raise DomainError("samples must be finite and non-negative")
        if np.any(np.diff(samples) < 0):
            raise ValueError("samples must be sorted ascending; use from_samples")
        samples.flags.writeable = False
        self.samples = samples
        self.values, counts = np.unique(samples, return_counts=True)
        self._counts = counts
        self._cum = np.cumsum(counts) / samples.size

    @property
    def n(self) -> int:
        return int(self.samples.size)

    def cdf(self, x):
        out = np.searchsorted(self.samples, x, side="right") / self.n
        return float(out) if np.ndim(out) == 0 else out

    def _ppf(self, u):
        # inf{x : F(x) >= u} is the ceil(u N)-th order statistic
        idx = np.ceil(np.asarray(u) * self.n - 1e-9).astype(np.int64) - 1
        return self.samples[np.clip(idx, 0, self.n - 1)]

    def _weights(self):
        return self._counts / self.n

    def max_atom_mass(self):
        return float(self._counts.max() / self.n)

    def mean(self) -> float:
        return float(self.samples.mean())

    def to_discrete(self) -> DiscreteDistribution:
        return DiscreteDistribution(self.values, self._weights())

    def map_values(self, fn: Callable) -> "Empirical":
        return Empirical(np.asarray(fn(self.samples), dtype=float))

    def to_json(self):
        return {"family": self.family, "samples": self.samples.tolist()}

    def __eq__(self, other):
        if not isinstance(other, Empirical):
            return NotImplemented
        return np.array_equal(self.samples, other.samples)

    def __repr__(self):
        return f"Empirical(n={self.n}, mean={self.mean():.6g})"


# ---------------------------------------------------------------------------
# Functional interface
# ---------------------------------------------------------------------------


def cdf(dist: ItemDistribution, x: float) -> float:
    return float(dist.cdf(x))


def quantile(dist: ItemDistribution, p: float) -> float:
    return dist.quantile(p)


def tail_value(dist: ItemDistribution, scalar_f, tau: float) -> float:
    return dist.tail_value(scalar_f, tau)


def sample(dist: ItemDistribution, rng: np.random.Generator, size=None):
    return dist.sample(rng, size)


def atom_mass_at(dist: ItemDistribution, x: float) -> float:
    return dist.atom_mass_at(x)


def max_atom_mass(dist: ItemDistribution) -> float:
    return dist.max_atom_mass()


def from_samples(values) -> Empirical:
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0:
        raise ValueError("cannot build an empirical distribution from no samples")
    if np.any(arr < 0):
        raise DomainError("samples must be non-negative")
    return Empirical(np.sort(arr, kind="stable"))


def as_discrete(dist: ItemDistribution) -> DiscreteDistribution:
    if isinstance(dist, DiscreteDistribution):
        return dist
    if isinstance(dist, Empirical):
        return dist.to_discrete()
    raise TypeError(f"{type(dist).__name__} has no finite support")


def from_json(obj: Mapping[str, Any]) -> ItemDistribution:
    if "atoms" in obj:
        return DiscreteDistribution.from_atoms(obj["atoms"])
    family = obj.get("family")
    if family == "exponential":
        return Exponential(float(obj["mean"]))
    if family == "pareto":
        return Pareto(float(obj["shape"]), float(obj["scale"]))
    if family == "uniform":
        return Uniform(float(obj["lo"]), float(obj["hi"]))
    if family == "empirical":
        return from_samples(obj["samples"])
    raise ValueError(f"unknown distribution family: {family!r}")


def read_samples_csv(path) -> Empirical:
    """One real per line; a non-numeric first line is taken as a header."""
    values = []
    with open(Path(path), newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not row[0].strip():
                continue
            try:
                values.append(float(row[0]))
            except ValueError:
                if lineno == 1 and not values:
                    continue
                raise ValueError(f"{path}:{lineno}: not a number: {row[0]!r}") from None
    return from_samples(values)
