"""Command-line front end.

Exit codes: 0 success, 1 domain violation, 2 usage or parse error,
3 resource cap exceeded.  All randomness comes from ``--seed`` (default 0).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from .errors import CapExceededError, ModelError, PolicyError, ScenarioError
from .estimators import (
    EstimatorConfig,
    estimate_opt,
    estimate_opt_given_edge,
    estimate_opt_given_empty,
    exact_opt,
    exact_opt_given_edge,
    exact_opt_given_empty,
)
from .exact_dp import DEFAULT_MAX_STATES, chi_star
from .generators import from_generator, make_sn_family
from .matching import max_matching
from .model import StochasticModel
from .policies import (
    POLICY_NAMES,
    DecisionCache,
    evaluate_policy_exact,
    make_policy,
    run_adaptive,
)
from .sampling import (
    Instantiation,
    enumerate_instantiations,
    instantiation_graph,
    sample_death_matrix,
)
from .scenario import load_scenario, parse_scenario, serialize_scenario

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE, EXIT_CAP = 0, 1, 2, 3
RATIO_HEADER = ("n", "chi_star", "opt", "ratio")


class UsageError(Exception):
    pass


def fmt(x) -> str:
    """12 significant digits; exact fractions keep their p/q form."""
    if isinstance(x, Fraction):
        return str(x)
    return f"{float(x):.12g}"


@dataclass(frozen=True)
class ExperimentSpec:
    command: str
    source: str | None = None
    policy: str | None = None
    estimator: EstimatorConfig | None = None
    seed: int = 0
    samples: int | None = None
    out: str | None = None
    output_format: str = "text"


def load_model(source: str) -> StochasticModel:
    """A scenario path, or a generator string such as ``sn:4``."""
    if os.path.exists(source):
        return load_scenario(source)
    if ":" in source:
        return from_generator(source)
    raise UsageError(f"{source!r} is neither an existing file nor a generator string")


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _emit(value, detail: dict, spec: ExperimentSpec) -> None:
    if spec.output_format == "json":
        _write(json.dumps({"value": float(value), **detail}, sort_keys=True) + "\n", spec.out)
    else:
        _write(fmt(value) + "\n", spec.out)


def _estimator_config(args: argparse.Namespace) -> EstimatorConfig:
    eps, delta = args.fpras
    if args.k is None and not args.paper_k:
        raise UsageError("--fpras needs either --k K or --paper-k")
    return EstimatorConfig(epsilon=eps, delta=delta, sample_override=args.k, seed=args.seed)


# -- commands --------------------------------------------------------------

def cmd_validate(args: argparse.Namespace) -> int:
    try:
        text = Path(args.path).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        model = parse_scenario(text)
    except ScenarioError as exc:
        if exc.violations:
            print("invalid")
            for v in exc.violations:
                print(f"  {v}")
            return EXIT_DOMAIN
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"ok: {model.n} vertices, {len(model.edges)} edges, lifetime {model.lifetime}")
    return EXIT_OK


def cmd_generate(args: argparse.Namespace) -> int:
    _write(serialize_scenario(load_model(args.source)), args.out)
    return EXIT_OK


def cmd_opt(args: argparse.Namespace) -> int:
    m = load_model(args.source)
    spec = ExperimentSpec("opt", args.source, seed=args.seed, out=args.out,
                          output_format=args.format)
    edge = tuple(args.given_edge) if args.given_edge else None
    if args.exact:
        if edge:
            value = exact_opt_given_edge(m, edge, rational=args.rational)
        elif args.given_empty:
            value = exact_opt_given_empty(m, rational=args.rational)
        else:
            value = exact_opt(m, rational=args.rational)
        detail = {"method": "exact"}
        if isinstance(value, Fraction):
            detail["value_exact"] = str(value)
        _emit(value, detail, spec)
        return EXIT_OK

    cfg = _estimator_config(args)
    if edge:
        est = estimate_opt_given_edge(m, edge, cfg)
    elif args.given_empty:
        est = estimate_opt_given_empty(m, cfg)
    else:
        est = estimate_opt(m, cfg)
    detail = {"method": "fpras", "epsilon": cfg.epsilon, "delta": cfg.delta, "seed": cfg.seed,
              "samples_per_run": cfg.sample_count(m.n), "runs": est.runs,
              "samples_used": est.samples_used, "degenerate_zero": est.degenerate_zero,
              "run_values": list(est.run_values), "max_run_std": est.max_run_std}
    _emit(est.value, detail, spec)
    return EXIT_OK


def cmd_chi_star(args: argparse.Namespace) -> int:
    m = load_model(args.source)
    value, table = chi_star(m, rational=args.rational, max_states=args.max_states)
    if args.export:
        Path(args.export).write_text(json.dumps(table.to_json(), indent=1) + "\n", encoding="utf-8")
    spec = ExperimentSpec("chi-star", args.source, out=args.out, output_format=args.format)
    detail = {"states": len(table)}
    if isinstance(value, Fraction):
        detail["value_exact"] = str(value)
    _emit(value, detail, spec)
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    m = load_model(args.source)
    cfg = None
    if args.policy == "split-matching-fpras":
        if args.k is None:
            raise UsageError("split-matching-fpras needs --k")
        cfg = EstimatorConfig(epsilon=args.epsilon, delta=args.delta,
                              sample_override=args.k, seed=args.seed)
    policy = make_policy(args.policy, m, cfg)
    spec = ExperimentSpec("run", args.source, policy=args.policy, estimator=cfg, seed=args.seed,
                          samples=args.samples, out=args.out, output_format=args.format)
    traces = []
    if args.exact:
        value = evaluate_policy_exact(m, policy, rational=args.rational)
        if args.traces:
            cache = DecisionCache()
            for inst, p in enumerate_instantiations(m):
                tr = run_adaptive(m, policy, inst, cache=cache)
                traces.append({"probability": float(p), "death_times": _deaths_json(inst), **tr.to_json()})
        detail = {"method": "exact", "policy": args.policy}
        if isinstance(value, Fraction):
            detail["value_exact"] = str(value)
    else:
        deaths = sample_death_matrix(m, args.seed, 0, args.samples)
        cache = DecisionCache() if policy.deterministic else None
        sizes = []
        for i, row in enumerate(deaths):
            inst = Instantiation(tuple(zip(m.ids, (int(d) for d in row))))
            tr = run_adaptive(m, policy, inst, cache=cache)
            sizes.append(len(tr.matching))
            if args.traces:
                traces.append({"index": i, "death_times": _deaths_json(inst), **tr.to_json()})
        n = len(sizes)
        value = sum(sizes) / n
        var = sum((x - value) ** 2 for x in sizes) / (n - 1) if n > 1 else 0.0
        detail = {"method": "monte-carlo", "policy": args.policy, "samples": n,
                  "seed": args.seed, "stderr": (var / n) ** 0.5}
    if args.traces:
        Path(args.traces).write_text("".join(json.dumps(t, sort_keys=True) + "\n" for t in traces),
                                     encoding="utf-8")
    _emit(value, detail, spec)
    return EXIT_OK


def _deaths_json(inst: Instantiation) -> dict[str, int]:
    return {str(v): d for v, d in inst.deaths}


def cmd_ratio(args: argparse.Namespace) -> int:
    if args.family != "sn":
        raise UsageError(f"unknown family {args.family!r}; only 'sn' is available")
    if not 1 <= args.lo <= args.hi:
        raise UsageError("need 1 <= --from <= --to")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RATIO_HEADER)
    for n in range(args.lo, args.hi + 1):
        m = make_sn_family(n, rational=True)
        chi, _ = chi_star(m, rational=True)
        opt = exact_opt(m, rational=True)
        writer.writerow((n, f"{float(chi):.12g}", f"{float(opt):.12g}", f"{float(chi / opt):.12g}"))
    _write(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_sample(args: argparse.Namespace) -> int:
    m = load_model(args.source)
    deaths = sample_death_matrix(m, args.seed, 0, args.count)
    lines = []
    for i, row in enumerate(deaths):
        inst = Instantiation(tuple(zip(m.ids, (int(d) for d in row))))
        opt = len(max_matching(instantiation_graph(m, inst)))
        lines.append(json.dumps({"index": i, "death_times": _deaths_json(inst), "opt": opt}) + "\n")
    _write("".join(lines), args.out)
    return EXIT_OK


# -- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stochmatch",
                                     description="Matching in stochastic arrival-departure graphs.")
    sub = parser.add_subparsers(dest="command", required=True)

    def source_cmd(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("source", help="scenario JSON path or generator (sn:N, tri:EPS, random:N:T:SEED[:P])")
        p.add_argument("--out", help="write primary output here instead of stdout")
        return p

    p = sub.add_parser("validate", help="check a scenario file")
    p.add_argument("path")
    p.set_defaults(func=cmd_validate)

    p = source_cmd("generate", "write a scenario file from a generator")
    p.set_defaults(func=cmd_generate)

    p = source_cmd("opt", "expected hindsight-optimal matching size")
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--exact", action="store_true", help="enumerate every instantiation")
    mode.add_argument("--fpras", nargs=2, type=float, metavar=("EPS", "DELTA"))
    p.add_argument("--k", type=int, help="samples per run")
    p.add_argument("--paper-k", action="store_true", help="use k = ceil(n^4 / eps^2)")
    p.add_argument("--rational", action="store_true", help="exact fractions (with --exact)")
    cond = p.add_mutually_exclusive_group()
    cond.add_argument("--given-edge", nargs=2, type=int, metavar=("U", "V"))
    cond.add_argument("--given-empty", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_opt)

    p = source_cmd("chi-star", "optimal adaptive value by exact DP")
    p.add_argument("--rational", action="store_true")
    p.add_argument("--export", help="write the DP table as JSON")
    p.add_argument("--max-states", type=int, default=DEFAULT_MAX_STATES)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_chi_star)

    p = source_cmd("run", "evaluate an adaptive policy")
    p.add_argument("--policy", required=True, choices=POLICY_NAMES)
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--exact", action="store_true")
    mode.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rational", action="store_true")
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--delta", type=float, default=0.25)
    p.add_argument("--k", type=int, help="estimator samples per run (split-matching-fpras)")
    p.add_argument("--traces", help="write per-run traces as JSON lines")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("ratio", help="stochasticity ratio over a model family, as CSV")
    p.add_argument("--family", default="sn")
    p.add_argument("--from", dest="lo", type=int, required=True)
    p.add_argument("--to", dest="hi", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_ratio)

    p = source_cmd("sample", "dump sampled instantiations as JSON lines")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_sample)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN if exc.violations else EXIT_USAGE
    except CapExceededError as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (ModelError, PolicyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
