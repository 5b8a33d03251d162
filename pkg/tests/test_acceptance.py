"""Acceptance criteria 1-10 plus the baseline direction check.

Every criterion records a pass/fail line; ``conftest.py`` prints them at the
end of the session. Run alone with ``pytest tests/test_acceptance.py -v``.
"""

from __future__ import annotations

import itertools
import json
import math
import statistics
import subprocess
import sys
import time
from collections import defaultdict

import numpy as np
import pytest

from distsketch import bench
from distsketch import sketcher as sk
from distsketch import valuation as val
from distsketch.dist import DiscreteDistribution
from distsketch.evaluation import (
    expected_value_exact,
    expected_value_fast,
    expected_value_mc,
    set_function,
)
from distsketch.optimize import (
    brute_force_best,
    brute_force_welfare,
    greedy_select,
    greedy_welfare,
)

from conftest import random_discrete

# criterion -> list of (part, ok, detail)
RESULTS: dict[str, list[tuple[str, bool, str]]] = defaultdict(list)

SLACK = 1e-9
GREEDY = 1 - 1 / math.e


def record(criterion, part, ok, detail=""):
    RESULTS[criterion].append((part, bool(ok), detail))
    print(f"[{criterion}] {part}: {'PASS' if ok else 'FAIL'} {detail}")


def summary_lines():
    lines = []
    for crit in sorted(RESULTS, key=lambda c: (len(c), c)):
        parts = RESULTS[crit]
        ok = all(p[1] for p in parts)
        failed = [f"{p[0]} ({p[2]})" for p in parts if not p[1]]
        detail = "; ".join(failed) if failed else "; ".join(f"{p[0]} {p[2]}".strip() for p in parts)
        lines.append(f"criterion {crit}: {'PASS' if ok else 'FAIL'} - {detail}")
    return lines


# ---------------------------------------------------------------------------
# 1. quantizer invariants
# ---------------------------------------------------------------------------


def reference_bin_count(eps, a):
    # count geometric steps directly instead of using a logarithm
    r = 1.0 / (1.0 - eps)
    count, edge = 0, a
    while edge * r <= 1.0 * (1 + 1e-12):
        edge *= r
        count += 1
    return count


def test_criterion_1_quantizer():
    rng = np.random.default_rng(1)
    n_params, per = 20_000, 50
    start = time.perf_counter()
    violations = bins_bad = 0
    eps_all = rng.uniform(1e-3, 0.99, n_params)
    a_all = np.exp(rng.uniform(math.log(1e-6), math.log(0.99), n_params))
    tau_all = np.exp(rng.uniform(math.log(1e-3), math.log(1e3), n_params))
    u_all = rng.uniform(0, 1, (n_params, per))
    for eps, a, tau, u in zip(eps_all, a_all, tau_all, u_all):
        lo = a * tau
        x = lo + (1 - u) * (tau - lo)
        x = x[(x > lo) & (x <= tau)]
        q = sk.quantize(x, tau, eps, a)
        violations += int(np.sum(q < (1 - eps) * x * (1 - 1e-12)) + np.sum(q > x))
        lvl = sk.bin_count(eps, a)
        if lvl != reference_bin_count(eps, a):
            bins_bad += 1
        j = sk.bin_index(x, tau, eps, a)
        bins_bad += int(np.sum(j > lvl + 1) + np.sum(j < 1))
    elapsed = time.perf_counter() - start
    ok = violations == 0 and bins_bad == 0 and elapsed < 10
    record("1", "quantizer", ok,
           f"checks={n_params * per} violations={violations} bin_errors={bins_bad} "
           f"time={elapsed:.1f}s")
    assert ok


# ---------------------------------------------------------------------------
# 2-3. sandwich bounds on exact instances
# ---------------------------------------------------------------------------

EPS = 0.2
K = 3


def _instance(rng):
    n = int(rng.integers(2, 7))
    return {i: random_discrete(rng, int(rng.integers(50, 101)))
            for i in range(1, n + 1)}


def _delta(laws, eps):
    return max(d.atom_mass_at(d.quantile(1 - eps)) for d in laws.values())


def _sandwich(laws_u, spec_u, laws_v, spec_v, variant):
    """Check alpha v <= u <= beta v for all |S| <= K. Returns (checked, violations, worst)."""
    delta = _delta(laws_v, EPS)
    props = spec_v.properties()
    params = sk.default_params(K, EPS * K, sk.effective_degree(props, variant), delta)
    rep = sk.approximation_factors(K, params.epsilon, params.lower_cut, delta, props.degree,
                                   props.tolerance, variant)
    summaries = {i: sk.discretize(d, spec_v, params, item=i).summary for i, d in laws_v.items()}
    items = sorted(laws_u)
    checked = bad = 0
    lo_ratio, hi_ratio = math.inf, 0.0
    for r in range(1, K + 1):
        for S in itertools.combinations(items, r):
            u = expected_value_fast(spec_u, laws_u, S).value
            v = expected_value_fast(spec_v, summaries, S).value
            checked += 1
            if not rep.contains(u, v, SLACK):
                bad += 1
            lo_ratio, hi_ratio = min(lo_ratio, u / v), max(hi_ratio, u / v)
    return checked, bad, lo_ratio, hi_ratio, rep


def test_criterion_2_sandwich():
    rng = np.random.default_rng(2)
    start = time.perf_counter()
    transformed = val.apply_transform(val.PowerOfSum(0.5), val.Power(2.0))
    assert transformed.properties().degree == 1.0
    total = bad = 0
    lo, hi = math.inf, 0.0
    for _ in range(300):
        laws = _instance(rng)
        for spec in (val.Max(), val.CES(2.0)):
            c, b, l, h, _ = _sandwich(laws, spec, laws, spec, sk.WEAK_HOMOGENEOUS)
            total, bad, lo, hi = total + c, bad + b, min(lo, l), max(hi, h)
        # sketch in z = x^r coordinates; u is computed on the original x
        z_laws = {i: d.map_values(np.sqrt) for i, d in laws.items()}
        c, b, l, h, _ = _sandwich(laws, val.PowerOfSum(0.5), z_laws, transformed,
                                  sk.WEAK_HOMOGENEOUS)
        total, bad, lo, hi = total + c, bad + b, min(lo, l), max(hi, h)
    elapsed = time.perf_counter() - start
    ok = bad == 0 and elapsed < 300
    record("2", "weakly homogeneous sandwich", ok,
           f"sets={total} violations={bad} u/v in [{lo:.3f}, {hi:.3f}] time={elapsed:.0f}s")
    assert ok


def test_criterion_3_concave_sandwich():
    rng = np.random.default_rng(3)
    spec = val.ConcaveOfSum(val.ExpSaturation(1.0))
    assert spec.properties().degree == 0.0
    assert sk.bound_variant(spec.properties()) == sk.EXTENDABLE_CONCAVE
    total = bad = 0
    lo, hi = math.inf, 0.0
    for _ in range(300):
        laws = _instance(rng)
        c, b, l, h, rep = _sandwich(laws, spec, laws, spec, sk.EXTENDABLE_CONCAVE)
        assert rep.variant == sk.EXTENDABLE_CONCAVE
        total, bad, lo, hi = total + c, bad + b, min(lo, l), max(hi, h)
    ok = bad == 0
    record("3", "concave sandwich", ok,
           f"sets={total} violations={bad} u/v in [{lo:.3f}, {hi:.3f}]")
    assert ok


# ---------------------------------------------------------------------------
# 4. function properties
# ---------------------------------------------------------------------------

PROPERTY_SPECS = [
    val.Max(),
    val.TopH(2),
    val.CES(2.0),
    val.CES(4.0),
    val.PowerOfSum(0.5),
    val.ConcaveOfSum(val.Sqrt()),
    val.ConcaveOfSum(val.Power(0.3)),
    val.ConcaveOfSum(val.ExpSaturation(1.0)),
    val.SuccessProbability(),
]
N_POINTS = 10_000
DIM = 4


def _points(spec, rng, shape):
    hi = 1.0 if isinstance(spec, val.SuccessProbability) else 5.0
    return rng.uniform(0, hi, shape)


def _weak_homogeneity_violations(spec, rng):
    x = _points(spec, rng, (N_POINTS, DIM))
    theta = rng.uniform(0, 1, N_POINTS)
    props = spec.properties(DIM)
    fx = spec(x)
    ft = spec(theta[:, None] * x)
    mask = fx >= 1e-12
    lower = theta * fx / props.tolerance
    upper = theta ** props.degree * fx
    viol = mask & ((ft < lower - SLACK) | (ft > upper + SLACK))
    return int(viol.sum()), x[viol][:1], theta[viol][:1]


def _subadditivity_violations(spec, rng):
    x = _points(spec, rng, (N_POINTS, DIM))
    y = _points(spec, rng, (N_POINTS, DIM))
    if isinstance(spec, val.SuccessProbability):
        # keep x + y inside the unit cube
        x, y = x / 2, y / 2
    return int(np.sum(spec(x + y) > spec(x) + spec(y) + SLACK))


def _weak_dr_violations(spec, rng):
    cap = 1.0 if isinstance(spec, val.SuccessProbability) else np.inf
    x = _points(spec, rng, (N_POINTS, DIM))
    y = np.minimum(x + _points(spec, rng, (N_POINTS, DIM)) / 2, cap)
    i = rng.integers(0, DIM, N_POINTS)
    rows = np.arange(N_POINTS)
    y[rows, i] = x[rows, i]
    room = cap - x[rows, i] if np.isfinite(cap) else np.full(N_POINTS, 5.0)
    z = rng.uniform(0, 1, N_POINTS) * room
    xz, yz = x.copy(), y.copy()
    xz[rows, i] += z
    yz[rows, i] += z
    gain_x = spec(xz) - spec(x)
    gain_y = spec(yz) - spec(y)
    return int(np.sum(gain_x < gain_y - SLACK))


def test_criterion_4_property_suites():
    rng = np.random.default_rng(4)
    problems = []
    for spec in PROPERTY_SPECS:
        props = spec.properties(DIM)
        if props.subadditive:
            n = _subadditivity_violations(spec, rng)
            if n:
                problems.append(f"{spec.label} subadditivity x{n}")
        if props.submodular:
            n = _weak_dr_violations(spec, rng)
            if n:
                problems.append(f"{spec.label} weak-DR x{n}")
        if isinstance(spec, val.SuccessProbability):
            continue  # declared degree checked separately below
        n, _, _ = _weak_homogeneity_violations(spec, rng)
        if n:
            problems.append(f"{spec.label} weak homogeneity x{n}")
    # boundary identity: equality at the stated theta* for d = 1/2
    d = 0.5
    theta_star = 1 / (2 * (1 - d))
    eq_gap = abs(theta_star ** (1 - d) * (2 - theta_star) - 1)
    if eq_gap > 1e-9:
        problems.append(f"boundary equality gap {eq_gap:.2e}")
    ok = not problems
    record("4", "subadditivity / weak-DR / weak homogeneity (non success-prob.)", ok,
           "; ".join(problems) if problems else f"{N_POINTS} points per check")
    assert ok


@pytest.mark.xfail(strict=True, reason=(
    "success probability is not weakly homogeneous of degree 1/2: at x=(1,1), "
    "theta=2/3 f(theta x)=8/9 > theta^(1/2) f(x)=0.816; theta^(1-d)(2-theta) peaks at "
    "2(1-d)/(2-d), not at 1/(2(1-d))"
))
def test_criterion_4_success_probability_degree():
    rng = np.random.default_rng(44)
    spec = val.SuccessProbability()
    n, x, theta = _weak_homogeneity_violations(spec, rng)
    d = spec.properties(DIM).degree
    thetas = np.linspace(0, 1, 100_001)
    peak = float(np.max(thetas ** (1 - d) * (2 - thetas)))
    ok = n == 0 and peak <= 1 + 1e-9
    detail = (f"declared d={d}: {n}/{N_POINTS} weak-homogeneity violations"
              + (f", e.g. x={np.round(x[0], 3).tolist()} theta={theta[0]:.3f}" if n else "")
              + f"; max theta^(1-d)(2-theta) = {peak:.4f}")
    record("4", "success probability d=1/2", ok, detail)
    assert ok


# ---------------------------------------------------------------------------
# 5. evaluator equivalence
# ---------------------------------------------------------------------------


def test_criterion_5_evaluator_equivalence():
    rng = np.random.default_rng(5)
    specs = [
        val.Max(), val.CES(2.0), val.PowerOfSum(0.5), val.ConcaveOfSum(val.Sqrt()),
        val.ConcaveOfSum(val.ExpSaturation(1.0)),
        val.apply_transform(val.PowerOfSum(0.5), val.Power(2.0)),
    ]
    worst = 0.0
    bad = 0
    for _ in range(200):
        n = int(rng.integers(1, 5))
        laws = {i: random_discrete(rng, int(rng.integers(1, 7)), zero_prob=0.3 * rng.random())
                for i in range(1, n + 1)}
        unit = {i: d.map_values(lambda v: v / (1 + v)) for i, d in laws.items()}
        S = tuple(range(1, n + 1))
        cases = [(s, laws) for s in specs] + [(val.SuccessProbability(), unit)]
        for spec, ls in cases:
            a = expected_value_fast(spec, ls, S).value
            b = expected_value_exact(spec, ls, S).value
            rel = abs(a - b) / max(abs(b), 1e-300)
            worst = max(worst, rel)
            bad += rel > 1e-9
    covered = 0
    for t in range(1000):
        n = int(rng.integers(1, 4))
        laws = {i: random_discrete(rng, int(rng.integers(2, 6))) for i in range(1, n + 1)}
        spec = (val.Max(), val.CES(2.0), val.ConcaveOfSum(val.Sqrt()))[t % 3]
        S = tuple(range(1, n + 1))
        exact = expected_value_exact(spec, laws, S).value
        mc = expected_value_mc(spec, laws, S, 400, seed=t)
        covered += abs(mc.value - exact) <= 4 * mc.std_error + 1e-15
    ok = bad == 0 and covered >= 990
    record("5", "fast vs exact, MC coverage", ok,
           f"max rel diff={worst:.1e} mismatches={bad}; MC within 4se in {covered}/1000")
    assert ok


# ---------------------------------------------------------------------------
# 6-7 and the baseline direction: synthetic experiment
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def full_scale_run():
    cfg = bench.ExperimentConfig(
        n=50, n_train=500, k_values=list(range(1, 21)), c_values=[0.1], sets_per_k=50,
        dist_family=["exponential", "pareto"], seed=2024, baseline=True,
    )
    start = time.perf_counter()
    res = bench.run_synthetic(cfg)
    return res, time.perf_counter() - start


def _by_group(records, key):
    groups = defaultdict(list)
    for r in records:
        groups[key(r)].append(r)
    return groups


@pytest.mark.slow
def test_criterion_6_full_scale(full_scale_run):
    res, elapsed = full_scale_run
    lines, ok = [], not res.skips and elapsed < 1800
    for (v, fam), recs in sorted(_by_group(res.records, lambda r: (r.valuation, r.family)).items()):
        ratios = [r.ratio for r in recs]
        q1, med, q3 = np.percentile(ratios, [25, 50, 75])
        good = 0.85 <= med <= 1.15 and q3 - q1 <= 0.3
        ok &= good
        lines.append(f"{v}/{fam} median={med:.3f} iqr={q3 - q1:.3f}")
    record("6", "full-scale ratios", ok,
           f"records={len(res.records)} skips={len(res.skips)} time={elapsed:.0f}s; "
           + ", ".join(lines))
    assert ok


@pytest.mark.slow
def test_baseline_direction(full_scale_run):
    res, _ = full_scale_run
    ok = True
    parts = []
    exp_records = [r for r in res.records if r.family == "exponential"]
    for v, recs in sorted(_by_group(exp_records, lambda r: r.valuation).items()):
        ours = statistics.median(abs(r.ratio - 1) for r in recs)
        theirs = statistics.median(abs(r.baseline_ratio - 1) for r in recs)
        ok &= ours <= theirs
        parts.append(f"{v}: {ours:.3f} vs {theirs:.3f}")
    record("baseline", "median |ratio-1| sketch vs test score", ok, ", ".join(parts))
    assert ok


@pytest.mark.slow
def test_criterion_7_knee():
    cfg = bench.ExperimentConfig(
        n=50, n_train=500, k_values=[2, 5, 8, 10, 15, 20], c_values=[0.1, 0.5, 1, 2, 5, 10],
        sets_per_k=20, dist_family=["exponential", "pareto"], seed=7, v_samples=5000,
    )
    res = bench.run_synthetic(cfg)
    assert res.tasks == len(res.records) + len(res.skips)
    dev = {}
    for key, recs in _by_group(res.records, lambda r: (r.valuation, r.family, r.c)).items():
        dev[key] = abs(statistics.median(r.ratio for r in recs) - 1)
    ok = True
    parts = []
    for v, fam in sorted({(k[0], k[1]) for k in dev}):
        d05, d5 = dev[(v, fam, 0.5)], dev[(v, fam, 5.0)]
        ok &= d5 > d05
        parts.append(f"{v}/{fam} {d05:.3f}->{d5:.3f}")
    record("7", "deviation at c=5 exceeds c=0.5", ok,
           f"skips={len(res.skips)}; " + ", ".join(parts))
    assert ok


# ---------------------------------------------------------------------------
# 8-9. greedy guarantees
# ---------------------------------------------------------------------------


def test_criterion_8_greedy():
    rng = np.random.default_rng(8)
    worst = math.inf
    bad = 0
    for t in range(200):
        laws = {i: random_discrete(rng, int(rng.integers(2, 6))) for i in range(1, 9)}
        spec = (val.Max(), val.ConcaveOfSum(val.Sqrt()), val.CES(2.0))[t % 3]
        oracle = set_function(spec, laws)
        g = greedy_select(oracle, range(1, 9), 3).objective
        opt = brute_force_best(oracle, range(1, 9), 3).objective
        worst = min(worst, g / opt)
        bad += g < GREEDY * opt - SLACK
    worst_w = math.inf
    bad_w = 0
    for t in range(100):
        laws = {i: random_discrete(rng, int(rng.integers(2, 5))) for i in range(1, 7)}
        oracles = [set_function(val.Max(), laws), set_function(val.ConcaveOfSum(val.Sqrt()), laws)]
        if t % 2:
            oracles.reverse()
        g = greedy_welfare(oracles, range(1, 7), (2, 2)).welfare
        opt = brute_force_welfare(oracles, range(1, 7), (2, 2)).welfare
        worst_w = min(worst_w, g / opt)
        bad_w += g < 0.5 * opt - SLACK
    ok = bad == 0 and bad_w == 0
    record("8", "greedy ratios", ok,
           f"selection min ratio={worst:.3f} violations={bad}; "
           f"welfare min ratio={worst_w:.3f} violations={bad_w}")
    assert ok


def test_criterion_9_greedy_on_sketch():
    rng = np.random.default_rng(9)
    bad = 0
    worst = math.inf
    for t in range(100):
        n = int(rng.integers(5, 9))
        k = int(rng.integers(1, 4))
        c = 0.5
        laws = {i: random_discrete(rng, int(rng.integers(40, 61)), max_mass=0.05)
                for i in range(1, n + 1)}
        spec = (val.Max(), val.ConcaveOfSum(val.Sqrt()))[t % 2]
        props = spec.properties()
        eps = c / k
        delta = _delta(laws, eps)
        assert delta * k < c
        params = sk.default_params(k, c, sk.effective_degree(props), delta)
        summaries = {i: sk.discretize(d, spec, params, item=i).summary for i, d in laws.items()}
        v_oracle = set_function(spec, summaries)
        u_oracle = set_function(spec, laws)
        chosen = greedy_select(v_oracle, range(1, n + 1), k).chosen
        u_greedy = u_oracle(chosen)
        u_opt = brute_force_best(u_oracle, range(1, n + 1), k).objective
        bound = sk.greedy_ratio(c, delta, k, props.tolerance, GREEDY)
        worst = min(worst, u_greedy / u_opt)
        bad += u_greedy < bound * u_opt - SLACK
    ok = bad == 0
    record("9", "greedy on sketch vs true optimum", ok,
           f"min u(S_g)/u(S*)={worst:.3f} violations={bad}")
    assert ok


# ---------------------------------------------------------------------------
# 10. reproducibility through the CLI
# ---------------------------------------------------------------------------


def test_criterion_10_cli_reproducible(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "n": 20, "n_train": 300, "k_values": [1, 3, 8, 12], "c_values": [0.1, 0.5],
        "sets_per_k": 10, "seed": 99, "v_samples": 3000, "baseline": True,
        "baseline_samples": 300,
    }))
    outputs = []
    for name in ("first", "second"):
        proc = subprocess.run(
            [sys.executable, "-m", "distsketch.cli", "bench", "synthetic",
             "--config", str(cfg), "--out", str(tmp_path / name)],
            capture_output=True, text=True, check=False,
        )
        assert proc.returncode == 0, proc.stderr
        outputs.append((tmp_path / name / "results.csv").read_bytes())
    mc_runs = [
        subprocess.run(
            [sys.executable, "-m", "distsketch.cli", "bench", "bounds", "--k", "3",
             "--epsilon", "0.2", "--lower-cut", "0.038", "--delta", "0.01"],
            capture_output=True, check=False,
        ).stdout
        for _ in range(2)
    ]
    ok = outputs[0] == outputs[1] and len(outputs[0]) > 0 and mc_runs[0] == mc_runs[1]
    record("10", "byte-identical results.csv", ok,
           f"{len(outputs[0].splitlines()) - 1} rows, identical={outputs[0] == outputs[1]}")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
