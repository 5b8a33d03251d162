"""Approximation-ratio experiments.

A run draws training samples for every item, estimates ``u(S)`` on random
sets, sketches each item, evaluates the sketch ``v(S)`` on the same sets and
records ``v(S) / u(S)``. Everything is a pure function of the config and its
seed: each random quantity comes from a stream keyed by its coordinates.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import platform
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from . import __version__
from . import valuation as val
from .baseline import build_table, testscore_sketch_value
from .dist import Empirical, Exponential, ItemDistribution, Pareto, from_samples
from .evaluation import (
    MONTE_CARLO,
    EvalEstimate,
    expected_value_fast,
    expected_value_mc,
)
from .exceptions import CapacityError, SketchError
from .rng import derive_seed, stream
from .sketcher import (
    SketchParams,
    approximation_factors,
    bound_variant,
    discretize,
    lower_cut_for,
    effective_degree,
)

log = logging.getLogger(__name__)

EXPONENTIAL = "exponential"
PARETO = "pareto"
CSV = "csv"
FAMILIES = (EXPONENTIAL, PARETO)

RESULT_COLUMNS = (
    "valuation", "family", "k", "c", "epsilon", "a", "delta", "set",
    "u", "u_std_error", "u_method", "v", "v_std_error", "v_method",
    "ratio", "alpha", "beta", "baseline", "baseline_ratio",
)


def default_valuations() -> list[val.Valuation]:
    return [val.Max(), val.CES(2.0), val.ConcaveOfSum(val.Sqrt())]


@dataclass
class ExperimentConfig:
    n: int = 50
    n_train: int = 500
    valuations: list = field(default_factory=default_valuations)
    dist_family: list = field(default_factory=lambda: list(FAMILIES))
    k_values: list = field(default_factory=lambda: list(range(1, 21)))
    c_values: list = field(default_factory=lambda: [0.1])
    epsilon_values: list | None = None
    sets_per_k: int = 50
    seed: int = 0
    a_override: float | None = None
    v_samples: int = 20_000
    u_method: str = "mc"
    sketch_source: str = "samples"
    baseline: bool = False
    baseline_samples: int = 1000
    min_rows: int = 1

    def __post_init__(self):
        if isinstance(self.dist_family, str):
            self.dist_family = [self.dist_family]
        self.k_values = [int(k) for k in self.k_values]
        self.c_values = [float(c) for c in self.c_values]
        if self.epsilon_values is not None:
            self.epsilon_values = [float(e) for e in self.epsilon_values]
        self.valuations = [v if isinstance(v, val.Valuation) else val.from_json(v)
                           for v in self.valuations]
        if not self.valuations:
            raise ValueError("at least one valuation is required")
        if not self.k_values or min(self.k_values) < 1:
            raise ValueError("k_values must be positive")
        if self.n < 1 or self.n_train < 1 or self.sets_per_k < 1:
            raise ValueError("n, n_train and sets_per_k must be positive")
        if any(c <= 0 for c in self.c_values):
            raise ValueError("c values must be positive")
        for fam in self.dist_family:
            if fam not in FAMILIES + (CSV,):
                raise ValueError(f"unknown distribution family {fam!r}")
        if self.u_method not in ("mc", "exact"):
            raise ValueError("u_method must be 'mc' or 'exact'")
        if self.sketch_source not in ("samples", "distribution"):
            raise ValueError("sketch_source must be 'samples' or 'distribution'")
        if self.u_method == "exact" and self.sketch_source != "distribution":
            raise ValueError("exact u needs the sketch built from the same distribution")
        if self.a_override is not None and not 0 < self.a_override < 1:
            raise ValueError("a_override must lie in (0, 1)")

    def check_ground_set(self):
        if self.n < max(self.k_values):
            raise ValueError(f"n={self.n} is smaller than the largest k")

    def to_json(self) -> dict:
        out = asdict(self)
        out["valuations"] = [v.to_json() for v in self.valuations]
        return out

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**dict(obj))

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


@dataclass(frozen=True)
class RatioRecord:
    valuation: str
    family: str
    k: int
    c: float
    epsilon: float
    a: float
    delta: float
    set: tuple[int, ...]
    u: EvalEstimate
    v: EvalEstimate
    alpha: float = math.nan
    beta: float = math.nan
    baseline: float = math.nan

    @property
    def ratio(self) -> float:
        return self.v.value / self.u.value

    @property
    def baseline_ratio(self) -> float:
        return self.baseline / self.u.value

    def row(self) -> list:
        return [
            self.valuation, self.family, self.k, repr(self.c), repr(self.epsilon),
            repr(self.a), repr(self.delta), ";".join(map(str, self.set)),
            repr(self.u.value), repr(self.u.std_error), self.u.method,
            repr(self.v.value), repr(self.v.std_error), self.v.method,
            repr(self.ratio), repr(self.alpha), repr(self.beta),
            repr(self.baseline), repr(self.baseline_ratio),
        ]


@dataclass(frozen=True)
class Skip:
    valuation: str
    family: str
    k: int
    c: float
    set: tuple[int, ...]
    reason: str

    def to_json(self) -> dict:
        out = asdict(self)
        out["set"] = list(self.set)
        return out


@dataclass
class RunResult:
    records: list
    skips: list
    tasks: int
    items: dict = field(default_factory=dict)

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)


# ---------------------------------------------------------------------------
# Item populations
# ---------------------------------------------------------------------------


def synthetic_items(family: str, n: int, seed: int) -> dict[int, ItemDistribution]:
    """Exponential means ~ U(0, 1); Pareto shapes ~ U(1.1, 3) with scale 1.5."""
    rng = stream(seed, "item-params", family)
    if family == EXPONENTIAL:
        # U(0, 1] avoids a degenerate zero mean
        means = 1.0 - rng.random(n)
        return {i + 1: Exponential(float(m)) for i, m in enumerate(means)}
    if family == PARETO:
        shapes = rng.uniform(1.1, 3.0, n)
        return {i + 1: Pareto(float(s), 1.5) for i, s in enumerate(shapes)}
    raise ValueError(f"unknown synthetic family {family!r}")


def training_samples(
    dists: Mapping[int, ItemDistribution], n_train: int, seed: int, family: str
) -> np.ndarray:
    """``(n_train, n)`` matrix; column ``i - 1`` holds item ``i``'s draws."""
    n = len(dists)
    out = np.empty((n_train, n))
    for i in range(1, n + 1):
        out[:, i - 1] = dists[i].sample(stream(seed, "train", family, i), n_train)
    return out


def sample_sets(n: int, k: int, count: int, seed: int, family: str) -> list[tuple[int, ...]]:
    """Distinct ``k``-subsets of ``1..n`` drawn without replacement."""
    total = math.comb(n, k)
    if total <= count:
        import itertools

        return [tuple(s) for s in itertools.combinations(range(1, n + 1), k)]
    rng = stream(seed, "sets", family, k)
    seen: set = set()
    out = []
    while len(out) < count:
        s = tuple(sorted(int(i) + 1 for i in rng.choice(n, size=k, replace=False)))
        if s not in seen:
            seen.add(s)
            out.append(s)
    return out


# ---------------------------------------------------------------------------
# Core loop
# ---------------------------------------------------------------------------


def _epsilons(config: ExperimentConfig, k: int) -> list[tuple[float, float]]:
    if config.epsilon_values is not None:
        return [(e * k, e) for e in config.epsilon_values]
    return [(c, c / k) for c in config.c_values]


def _u_estimate(spec, train, dists, S, config, family) -> EvalEstimate:
    if config.u_method == "exact":
        return expected_value_fast_or_exact(spec, dists, S)
    x = train[:, [i - 1 for i in S]]
    vals = np.asarray(spec(x, items=S), dtype=float)
    n = vals.size
    se = float(vals.std(ddof=1) / math.sqrt(n)) if n > 1 and np.ptp(vals) > 0 else 0.0
    return EvalEstimate(float(vals.mean()), se, MONTE_CARLO, n_samples=n,
                        seed=derive_seed(config.seed, "train", family))


def expected_value_fast_or_exact(spec, dists, S) -> EvalEstimate:
    from .evaluation import expected_value_exact

    if spec.decomposition() is not None:
        return expected_value_fast(spec, dists, S)
    return expected_value_exact(spec, dists, S)


def _v_estimate(spec, summaries, S, config, coords) -> EvalEstimate:
    if spec.decomposition() is not None:
        try:
            return expected_value_fast(spec, summaries, S)
        except CapacityError:
            pass
    return expected_value_mc(spec, summaries, S, config.v_samples,
                             derive_seed(config.seed, "v", *coords))


def _run_family(
    config: ExperimentConfig,
    family: str,
    dists: Mapping[int, ItemDistribution],
    result: RunResult,
) -> None:
    n = len(dists)
    train = training_samples(dists, config.n_train, config.seed, family)
    if config.sketch_source == "samples":
        sources = {i: from_samples(train[:, i - 1]) for i in dists}
    else:
        sources = dict(dists)
    k_values = sorted({min(k, n) for k in config.k_values})
    for k in k_values:
        sets = sample_sets(n, k, config.sets_per_k, config.seed, family)
        for spec in config.valuations:
            props = spec.properties()
            for c, eps in _epsilons(config, k):
                _run_task(config, family, spec, props, k, c, eps, sets, sources, dists,
                          train, result)


def _run_task(config, family, spec, props, k, c, eps, sets, sources, dists, train, result):
    label = spec.label
    result.tasks += len(sets)

    def skip_all(reason):
        for S in sets:
            result.skips.append(Skip(label, family, k, c, S, reason))
        log.info("skipped %s/%s k=%d c=%g: %s", label, family, k, c, reason)

    if not 0 < eps < 1:
        skip_all(f"epsilon={eps:g} outside (0, 1)")
        return
    try:
        variant = bound_variant(props)
    except ValueError as exc:
        skip_all(str(exc))
        return
    # global atom bound at the item quantiles
    deltas = {}
    for i, d in sources.items():
        tau = d.quantile(1.0 - eps)
        deltas[i] = d.atom_mass_at(tau)
    delta = max(deltas.values())
    if config.a_override is not None:
        a = config.a_override
    else:
        try:
            a = lower_cut_for(eps, delta, effective_degree(props, variant))
        except (SketchError, ValueError) as exc:
            skip_all(f"no valid lower cut: {exc}")
            return
    params = SketchParams(eps, a)
    summaries, failures = {}, {}
    needed = sorted({i for S in sets for i in S})
    for i in needed:
        try:
            summaries[i] = discretize(sources[i], spec, params, item=i).summary
        except SketchError as exc:
            failures[i] = str(exc)
    try:
        bounds = approximation_factors(k, eps, a, delta, props.degree, props.tolerance, variant)
        alpha, beta = bounds.alpha, bounds.beta
    except (SketchError, ValueError):
        alpha = beta = math.nan
    table = None
    if config.baseline:
        table = build_table({i: sources[i] for i in needed}, spec, k,
                            config.baseline_samples, derive_seed(config.seed, "baseline", family))
    for idx, S in enumerate(sets):
        bad = [i for i in S if i in failures]
        if bad:
            result.skips.append(Skip(label, family, k, c, S,
                                     f"item {bad[0]}: {failures[bad[0]]}"))
            continue
        u = _u_estimate(spec, train, dists, S, config, family)
        if not u.value > 0:
            result.skips.append(Skip(label, family, k, c, S, "u(S) is zero"))
            continue
        v = _v_estimate(spec, summaries, S, config, (family, label, k, c, idx))
        base = testscore_sketch_value(table, S) if table is not None else math.nan
        result.records.append(RatioRecord(label, family, k, c, eps, a, delta, S, u, v,
                                          alpha, beta, base))


def run_synthetic(config: ExperimentConfig) -> RunResult:
    config.check_ground_set()
    result = RunResult([], [], 0)
    for family in config.dist_family:
        if family == CSV:
            raise ValueError("csv data goes through run_real")
        dists = synthetic_items(family, config.n, config.seed)
        _run_family(config, family, dists, result)
    _check_accounting(result)
    return result


def run_real(config: ExperimentConfig, dataset: Mapping[Any, Empirical]) -> RunResult:
    """Same pipeline on empirical item distributions; items are renumbered 1..n."""
    kept = {name: d for name, d in dataset.items() if d.n >= config.min_rows}
    if not kept:
        raise ValueError("dataset has no items with enough samples")
    names = sorted(kept, key=str)
    dists = {i + 1: kept[name] for i, name in enumerate(names)}
    result = RunResult([], [], 0, items={i + 1: str(name) for i, name in enumerate(names)})
    _run_family(config, CSV, dists, result)
    _check_accounting(result)
    return result


def _check_accounting(result: RunResult) -> None:
    if result.tasks != len(result.records) + len(result.skips):
        raise RuntimeError("record accounting mismatch")


# ---------------------------------------------------------------------------
# Data ingestion and metrics
# ---------------------------------------------------------------------------


def ingest_csv(
    path, value_column: str = "value", group_column: str = "item", min_rows: int = 1
) -> dict[str, Empirical]:
    """Group rows of a headed CSV into per-item empirical distributions."""
    groups: dict[str, list[float]] = defaultdict(list)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in (value_column, group_column):
            if col not in header:
                raise ValueError(f"{path}: missing column {col!r}; found {header}")
        for rowno, row in enumerate(reader, start=2):
            raw = row[value_column]
            try:
                x = float(raw)
            except (TypeError, ValueError):
                raise ValueError(f"{path}:{rowno}: non-numeric value {raw!r}") from None
            if not math.isfinite(x) or x < 0:
                raise ValueError(f"{path}:{rowno}: value {raw!r} must be finite and >= 0")
            groups[row[group_column]].append(x)
    out = {g: from_samples(v) for g, v in sorted(groups.items()) if len(v) >= min_rows}
    if not out:
        raise ValueError(f"{path}: no group has at least {min_rows} rows")
    return out


def bayesian_ratio(up: int, down: int, c1: float, c2: float) -> float:
    """``(up + c1) / (up + down + c2)``."""
    if up < 0 or down < 0:
        raise ValueError("vote counts must be non-negative")
    if not (c1 > 0 and c2 > 0):
        raise ValueError("c1 and c2 must be positive")
    return (up + c1) / (up + down + c2)


# ---------------------------------------------------------------------------
# Reporting
# ---------------------------------------------------------------------------


def _quartiles(x: Sequence[float]) -> dict:
    arr = np.asarray(x, dtype=float)
    q = np.percentile(arr, [0, 25, 50, 75, 100])
    return {"count": int(arr.size), "min": q[0], "q1": q[1], "median": q[2], "q3": q[3],
            "max": q[4]}


def summarize(records: Iterable[RatioRecord], by_k: bool = True) -> list[dict]:
    groups: dict[tuple, list[float]] = defaultdict(list)
    base: dict[tuple, list[float]] = defaultdict(list)
    for r in records:
        key = (r.valuation, r.family, r.k, r.c) if by_k else (r.valuation, r.family, r.c)
        groups[key].append(r.ratio)
        if not math.isnan(r.baseline):
            base[key].append(r.baseline_ratio)
    out = []
    for key in sorted(groups, key=lambda t: tuple(map(str, t))):
        names = ("valuation", "family", "k", "c") if by_k else ("valuation", "family", "c")
        entry = dict(zip(names, key))
        entry["ratio"] = _quartiles(groups[key])
        if base.get(key):
            entry["baseline_ratio"] = _quartiles(base[key])
        out.append(entry)
    return out


def write_results_csv(records: Iterable[RatioRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULT_COLUMNS)
        for r in records:
            writer.writerow(r.row())


def emit_report(
    records: Sequence[RatioRecord] | RunResult,
    out_dir,
    config: ExperimentConfig | None = None,
    skips: Sequence[Skip] = (),
) -> dict[str, Path]:
    """Write ``results.csv``, ``summary.json`` and ``run_meta.json``."""
    if isinstance(records, RunResult):
        skips = records.skips
        items = records.items
        records = records.records
    else:
        items = {}
    if not records:
        raise ValueError("no records to report")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ValueError(f"cannot create output directory {out}: {exc}") from exc
    paths = {
        "results": out / "results.csv",
        "summary": out / "summary.json",
        "meta": out / "run_meta.json",
    }
    try:
        write_results_csv(records, paths["results"])
        summary = {"groups": summarize(records, by_k=True),
                   "aggregates": summarize(records, by_k=False)}
        paths["summary"].write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
        meta = {
            "config": config.to_json() if config is not None else None,
            "seed": config.seed if config is not None else None,
            "records": len(records),
            "skips": [s.to_json() for s in skips],
            "items": {str(k): v for k, v in items.items()},
            "versions": {
                "distsketch": __version__,
                "numpy": np.__version__,
                "python": platform.python_version(),
            },
        }
        paths["meta"].write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise ValueError(f"cannot write report to {out}: {exc}") from exc
    return paths


def bounds_report(k, epsilon, lower_cut, delta, degree, tolerance, variant) -> dict:
    return approximation_factors(k, epsilon, lower_cut, delta, degree, tolerance, variant).to_json()
