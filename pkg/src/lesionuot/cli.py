"""Command-line driver: ``lesionuot {match,synth,eval,bench}``.

Exit codes: 0 success, 1 malformed input, 2 numerical failure, 3 bad
configuration.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import io
from .baselines import EDGE_RULES, distance_bipartite, normdist_bipartite
from .core import ConfigError, LesionUOTError, MatchConfig, NumericalError
from .cost import build_cost_matrix
from .graph import STATES, MatchResult, match_case
from .metrics import evaluate
from .prior import asymmetry_prior
from .stats import wilcoxon_greater
from .synth import EventBudget, GenerationError, SynthSpec, generate_suite, inject_channels

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NUMERICAL = 2
EXIT_CONFIG = 3

METHODS = ("uot", "dist", "normdist")
TABLE_METRICS = (
    "edge_precision",
    "edge_recall",
    "edge_f1",
    "state_weighted_precision",
    "state_weighted_recall",
    "component_f1",
)
WILCOXON_METRICS = ("edge_f1", "state_weighted_recall", "component_f1")


@dataclass(frozen=True)
class RunSettings:
    """Everything a method needs besides the case itself."""

    match: MatchConfig = field(default_factory=MatchConfig)
    epsilon_scaling: bool = False
    dist_threshold_mm: float = 10.0
    normdist_threshold: float = 1.0
    baseline_rule: str = "nearest"

    def __post_init__(self):
        if self.dist_threshold_mm <= 0 or self.normdist_threshold <= 0:
            raise ConfigError("baseline thresholds must be > 0")
        if self.baseline_rule not in EDGE_RULES:
            raise ConfigError(f"baseline_rule must be one of {EDGE_RULES}, got {self.baseline_rule!r}")


def _flag(value: str, key: str) -> bool:
    if value.lower() in ("1", "true", "yes"):
        return True
    if value.lower() in ("0", "false", "no"):
        return False
    raise ConfigError(f"{key} must be a boolean, got {value!r}")


def _float(value: str, key: str) -> float:
    try:
        return float(value)
    except ValueError as exc:
        raise ConfigError(f"{key} must be a number, got {value!r}") from exc


def load_settings(path: Optional[str] = None, overrides: Sequence[str] = ()) -> RunSettings:
    """Config file values, then ``key=value`` overrides, then defaults."""
    raw = {}
    if path is not None:
        try:
            raw.update(io.read_keyvalue(path))
        except io.FormatError as exc:
            raise ConfigError(str(exc)) from exc
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must look like key=value, got {item!r}")
        key, value = (s.strip() for s in item.split("=", 1))
        raw[key] = value
    match, rest = io.parse_config_values(raw)
    kw = {}
    for key, value in rest.items():
        if key == "epsilon_scaling":
            kw[key] = _flag(value, key)
        elif key in ("dist_threshold_mm", "normdist_threshold"):
            kw[key] = _float(value, key)
        elif key == "baseline_rule":
            kw[key] = value
        else:
            raise ConfigError(f"unknown config key {key!r}")
    return RunSettings(match, **kw)


def run_method(method: str, set0, set1, settings: RunSettings, rule: Optional[str] = None) -> MatchResult:
    rule = rule or settings.baseline_rule
    if method == "uot":
        return match_case(set0, set1, settings.match, epsilon_scaling=settings.epsilon_scaling)
    if method == "dist":
        return MatchResult(distance_bipartite(set0, set1, settings.dist_threshold_mm, rule))
    if method == "normdist":
        graph = normdist_bipartite(set0, set1, settings.normdist_threshold, settings.match.distance_cap, rule)
        return MatchResult(graph)
    raise ConfigError(f"unknown method {method!r}; expected one of {METHODS}")


def parse_methods(spec: str) -> list:
    methods = [m.strip() for m in spec.split(",") if m.strip()]
    bad = [m for m in methods if m not in METHODS]
    if bad or not methods:
        raise ConfigError(f"unknown method(s) {bad or spec!r}; expected a comma list from {METHODS}")
    return methods


# match


def cmd_match(case_path, config_path, method, out_path, overrides=()) -> int:
    settings = load_settings(config_path, overrides)
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}; expected one of {METHODS}")
    case = io.read_case(case_path, settings.match)
    result = run_method(method, case.set0, case.set1, settings)
    out = io.ensure_dir(out_path)
    io.write_graph(out / "predicted.graph", result.graph, case.set0, case.set1)
    if result.plan is not None:
        io.write_plan(out / "plan.txt", result.plan)
    if len(case.set0) and len(case.set1):
        cost = result.cost or build_cost_matrix(case.set0, case.set1, settings.match)
        io.write_cost(out / "cost.txt", cost)
    m = settings.match
    prior = result.prior or asymmetry_prior(case.set0, case.set1, m.lambda_base, m.mu_base, m.rho_gamma)
    io.write_prior(out / "prior.txt", prior)
    return EXIT_OK


# synth

SYNTH_INT_KEYS = ("n_initial", "base_seed", "n_cases", "channel_seed", "write_masks")
SYNTH_FLOAT_KEYS = ("shift_mm", "clearance_mm")
SYNTH_TUPLE_KEYS = ("volume_dims", "spacing", "radius_range", "growth_range")
BUDGET_KEYS = tuple(EventBudget.__dataclass_fields__)


def load_synth_spec(path: Optional[str]):
    """Parse a generator spec file into (SynthSpec template, extra options)."""
    raw = {}
    if path is not None:
        try:
            raw = io.read_keyvalue(path)
        except io.FormatError as exc:
            raise ConfigError(str(exc)) from exc
    spec_kw, budget, extra = {}, {}, {"base_seed": 0, "n_cases": 30, "channel_seed": None, "write_masks": 1}
    try:
        for key, value in raw.items():
            if key in BUDGET_KEYS:
                budget[key] = int(value)
            elif key in SYNTH_INT_KEYS:
                (spec_kw if key == "n_initial" else extra)[key] = int(value)
            elif key in SYNTH_FLOAT_KEYS:
                spec_kw[key] = float(value)
            elif key in SYNTH_TUPLE_KEYS:
                cast = int if key == "volume_dims" else float
                spec_kw[key] = tuple(cast(v) for v in value.replace(",", " ").split())
            else:
                raise ConfigError(f"unknown synth spec key {key!r}")
    except ValueError as exc:
        raise ConfigError(f"bad synth spec value: {exc}") from exc
    try:
        template = SynthSpec(event_budget=EventBudget(**budget), **spec_kw)
    except GenerationError as exc:
        raise ConfigError(str(exc)) from exc
    return template, extra


def cmd_synth(spec_path, n_cases, out_dir, seed=None) -> int:
    template, extra = load_synth_spec(spec_path)
    n_cases = extra["n_cases"] if n_cases is None else n_cases
    base_seed = extra["base_seed"] if seed is None else seed
    if n_cases < 1:
        raise ConfigError(f"n_cases must be >= 1, got {n_cases}")
    cases = generate_suite(n_cases, base_seed, template)
    out = io.ensure_dir(out_dir)
    for k, case in enumerate(cases):
        if extra["channel_seed"] is not None:
            case = inject_channels(case, extra["channel_seed"] + k)
        masks = dict(mask0=case.mask0, mask1=case.mask1) if extra["write_masks"] else {}
        bundle = io.CaseBundle(case.case_id, case.set0, case.set1, case.reference, **masks)
        io.write_case(out / case.case_id, bundle)
    return EXIT_OK


# eval


def cmd_eval(predicted_path, reference_path, out_path) -> int:
    report = evaluate(io.read_graph(predicted_path), io.read_graph(reference_path))
    io.write_report(out_path, report)
    return EXIT_OK


# bench


def _bench_case(args):
    case_path, methods, settings, sensitivity = args
    case = io.read_case(case_path, settings.match)
    if case.reference is None:
        raise io.FormatError(f"{case_path}: bench needs a reference.graph")
    reports = {}
    for method in methods:
        reports[method] = evaluate(run_method(method, case.set0, case.set1, settings).graph, case.reference)
    for method, rule in sensitivity:
        graph = run_method(method, case.set0, case.set1, settings, rule).graph
        reports[f"{method}[{rule}]"] = evaluate(graph, case.reference)
    return case.case_id, reports


def _mean(values) -> float:
    return float(np.mean(values))


def bench_tables(results, methods, sensitivity):
    """Render the per-case table and the summary as lists of lines."""
    fmt = io.fmt
    header = ["case_id", "method", *TABLE_METRICS, *(f"recall_{s}" for s in STATES)]
    table = ["\t".join(header)]
    for case_id, reports in results:
        for method in methods:
            r = reports[method]
            row = [case_id, method, *(fmt(r.scalars()[m]) for m in TABLE_METRICS)]
            row += [fmt(r.state_recall(s)) for s in STATES]
            table.append("\t".join(row))

    summary = [("cases", len(results)), ("methods", " ".join(methods))]
    labels = list(methods) + [f"{m}[{rule}]" for m, rule in sensitivity]
    for label in labels:
        reports = [reps[label] for _, reps in results]
        for metric in TABLE_METRICS:
            summary.append((f"mean.{label}.{metric}", _mean([r.scalars()[metric] for r in reports])))
        pooled = sum(r.state_confusion for r in reports)
        for k, state in enumerate(STATES):
            support = int(pooled[k].sum())
            recall = pooled[k, k] / support if support else float("nan")
            summary.append((f"pooled_recall.{label}.{state}", float(recall)))
            summary.append((f"pooled_support.{label}.{state}", support))
    if "uot" in methods:
        for other in (m for m in methods if m != "uot"):
            for metric in WILCOXON_METRICS:
                x = [reps["uot"].scalars()[metric] for _, reps in results]
                y = [reps[other].scalars()[metric] for _, reps in results]
                res = wilcoxon_greater(x, y)
                key = f"wilcoxon.uot_gt_{other}.{metric}"
                summary.append((f"{key}.n", res.n))
                summary.append((f"{key}.method", res.method))
                summary.append((f"{key}.statistic", "n/a" if res.statistic is None else float(res.statistic)))
                summary.append((f"{key}.pvalue", "n/a" if res.pvalue is None else float(res.pvalue)))
    return table, summary


def run_bench(suite_dir, methods, settings: RunSettings, jobs: int = 1, sensitivity: bool = True):
    dirs = io.case_dirs(suite_dir)
    other = [r for r in EDGE_RULES if r != settings.baseline_rule]
    sens = [(m, rule) for m in methods if m != "uot" for rule in other] if sensitivity else []
    work = [(d, methods, settings, sens) for d in dirs]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_bench_case, work))
    else:
        results = [_bench_case(w) for w in work]
    return results, sens


def cmd_bench(suite_dir, config_path, methods, out_path, jobs=1, overrides=()) -> int:
    if isinstance(methods, str):
        methods = parse_methods(methods)
    else:
        methods = parse_methods(",".join(methods))
    if jobs < 1:
        raise ConfigError(f"--jobs must be >= 1, got {jobs}")
    settings = load_settings(config_path, overrides)
    results, sens = run_bench(suite_dir, methods, settings, jobs)
    table, summary = bench_tables(results, methods, sens)
    out = io.ensure_dir(out_path)
    (out / "cases.tsv").write_text("".join(line + "\n" for line in table), encoding="utf-8")
    io.write_keyvalue(out / "summary.txt", summary)
    return EXIT_OK


# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lesionuot", description="Lesion correspondence by unbalanced transport.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, method_default=None):
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config value")
        if method_default is not None:
            p.add_argument("--method", default=method_default)

    p = sub.add_parser("match", help="match one case directory")
    p.add_argument("case")
    common(p, "uot")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("synth", help="generate a synthetic suite")
    p.add_argument("spec", nargs="?", help="generator spec file")
    p.add_argument("--n-cases", type=int)
    p.add_argument("--seed", type=int, help="base seed (overrides the suite spec file)")
    p.add_argument("--out", required=True, help="suite directory")

    p = sub.add_parser("eval", help="score a predicted graph against a reference")
    p.add_argument("predicted")
    p.add_argument("reference")
    p.add_argument("--out", required=True, help="report file")

    p = sub.add_parser("bench", help="run methods over a suite")
    p.add_argument("suite")
    common(p, ",".join(METHODS))
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True, help="output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "match":
            return cmd_match(args.case, args.config, args.method, args.out, args.set)
        if args.command == "synth":
            return cmd_synth(args.spec, args.n_cases, args.out, args.seed)
        if args.command == "eval":
            return cmd_eval(args.predicted, args.reference, args.out)
        return cmd_bench(args.suite, args.config, args.method, args.out, args.jobs, args.set)
    except (ConfigError, GenerationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (LesionUOTError, ValueError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
