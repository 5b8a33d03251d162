"""Command line entry point: ``distsketch <command> ...``.

Every command prints JSON on stdout. Failures exit nonzero with a JSON error
object on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import bench
from . import dist as dist_mod
from . import valuation as val
from .evaluation import expected_value, parse_item_set, set_function
from .optimize import greedy_select, greedy_welfare
from .sketcher import (
    VARIANTS,
    SketchParams,
    SketchResult,
    approximation_factors,
    discretize,
    effective_degree,
    lower_cut_for,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _load_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON ({exc})") from None


def _load_dist(path) -> dist_mod.ItemDistribution:
    if str(path).lower().endswith(".csv"):
        return dist_mod.read_samples_csv(path)
    return dist_mod.from_json(_load_json(path))


def _load_sketches(directory) -> dict[int, SketchResult]:
    d = Path(directory)
    if not d.is_dir():
        raise ValueError(f"{d} is not a directory")
    out = {}
    for p in sorted(d.glob("*.json")):
        if not p.stem.isdigit():
            continue
        out[int(p.stem)] = SketchResult.from_json(_load_json(p))
    if not out:
        raise ValueError(f"{d} holds no <item>.json sketch files")
    return out


def _emit(obj) -> None:
    json.dump(obj, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_discretize(args) -> None:
    spec = val.from_json(_load_json(args.valuation))
    law = _load_dist(args.dist)
    eps = args.epsilon
    if args.lower_cut is None:
        delta = law.atom_mass_at(law.quantile(1.0 - eps))
        a = lower_cut_for(eps, delta, effective_degree(spec.properties()))
    else:
        a = args.lower_cut
    result = discretize(law, spec, SketchParams(eps, a), item=args.item)
    text = json.dumps(result.to_json(), indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_evaluate(args) -> None:
    spec = val.from_json(_load_json(args.valuation))
    sketches = _load_sketches(args.sketches)
    summaries = {i: sk.summary for i, sk in sketches.items()}
    S = parse_item_set(args.set)
    est = expected_value(spec, summaries, S, args.method, args.samples, args.seed)
    _emit(est.to_json())


def cmd_greedy(args) -> None:
    spec = val.from_json(_load_json(args.valuation))
    sketches = _load_sketches(args.sketches)
    summaries = {i: sk.summary for i, sk in sketches.items()}
    oracle = set_function(spec, summaries, args.method, args.samples, args.seed)
    items = sorted(summaries)
    if args.welfare:
        sizes = [int(t) for t in args.welfare.split(",") if t.strip()]
        result = greedy_welfare([oracle] * len(sizes), items, sizes)
    else:
        if args.k is None:
            raise UsageError("greedy needs --k or --welfare")
        result = greedy_select(oracle, items, args.k)
    _emit(result.to_json())


def cmd_bench_synthetic(args) -> None:
    config = bench.ExperimentConfig.load(args.config)
    result = bench.run_synthetic(config)
    paths = bench.emit_report(result, args.out, config)
    _emit({"records": len(result.records), "skips": len(result.skips),
           "files": {k: str(v) for k, v in paths.items()}})


def cmd_bench_real(args) -> None:
    config = bench.ExperimentConfig.load(args.config)
    data = bench.ingest_csv(args.data, args.value_column, args.group_column, config.min_rows)
    result = bench.run_real(config, data)
    paths = bench.emit_report(result, args.out, config)
    _emit({"records": len(result.records), "skips": len(result.skips),
           "files": {k: str(v) for k, v in paths.items()}})


def cmd_bench_bounds(args) -> None:
    report = approximation_factors(
        args.k, args.epsilon, args.lower_cut, args.delta, args.degree, args.tolerance,
        args.variant,
    )
    _emit(report.to_json())


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="distsketch", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    d = sub.add_parser("discretize", help="summarize one item distribution")
    d.add_argument("--dist", required=True, help="distribution JSON or samples CSV")
    d.add_argument("--valuation", required=True, help="valuation JSON file")
    d.add_argument("--epsilon", type=float, required=True)
    d.add_argument("--lower-cut", type=float, default=None,
                   help="a; default [eps (eps - delta)]^(1/d)")
    d.add_argument("--item", type=int, default=None, help="item id for per-item transforms")
    d.add_argument("--out", default=None, help="output file (default stdout)")
    d.set_defaults(func=cmd_discretize)

    for name, func in (("evaluate", cmd_evaluate), ("greedy", cmd_greedy)):
        c = sub.add_parser(name)
        c.add_argument("--valuation", required=True)
        c.add_argument("--sketches", required=True, help="directory of <item>.json sketches")
        c.add_argument("--method", choices=("exact", "fast", "mc"), default="fast")
        c.add_argument("--samples", type=int, default=10_000)
        c.add_argument("--seed", type=int, default=0)
        c.set_defaults(func=func)
        if name == "evaluate":
            c.add_argument("--set", required=True, help='comma separated ids, e.g. "1,4,7"')
        else:
            c.add_argument("--k", type=int, default=None)
            c.add_argument("--welfare", default=None, help="part sizes, e.g. 2,2")

    b = sub.add_parser("bench", help="approximation-ratio experiments")
    bsub = b.add_subparsers(dest="bench_command", required=True, parser_class=_Parser)
    s = bsub.add_parser("synthetic")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_bench_synthetic)
    r = bsub.add_parser("real")
    r.add_argument("--config", required=True)
    r.add_argument("--data", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--value-column", default="value")
    r.add_argument("--group-column", default="item")
    r.set_defaults(func=cmd_bench_real)
    bb = bsub.add_parser("bounds")
    bb.add_argument("--k", type=int, required=True)
    bb.add_argument("--epsilon", type=float, required=True)
    bb.add_argument("--lower-cut", type=float, required=True)
    bb.add_argument("--delta", type=float, default=0.0)
    bb.add_argument("--degree", type=float, default=1.0)
    bb.add_argument("--tolerance", type=float, default=1.0)
    bb.add_argument("--variant", choices=VARIANTS, default=VARIANTS[0])
    bb.set_defaults(func=cmd_bench_bounds)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        _error("usage", str(exc))
        return 2
    if args.verbose:
        logging.basicConfig(level=logging.INFO, stream=sys.stderr)
    try:
        args.func(args)
    except UsageError as exc:
        _error("usage", str(exc))
        return 2
    except (ValueError, KeyError, TypeError, OSError) as exc:
        _error(type(exc).__name__, str(exc))
        return 1
    return 0


def _error(kind: str, message: str) -> None:
    json.dump({"error": kind, "message": message}, sys.stderr)
    sys.stderr.write("\n")


if __name__ == "__main__":
    sys.exit(main())
