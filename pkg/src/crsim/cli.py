"""Command-line interface.

Exit status is 0 whenever a command ran to completion, whatever the test
decided; 2 signals bad input and 3 a numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
import warnings
from typing import List, Optional

from .inference import INTENSITIES, PROBABILITIES, ConstrainedFitError
from .io import (ConfigError, RunConfig, StudyConfig, load_config, load_study_config,
                 parse_cohorts, write_cohorts, write_json)
from .model import CensoringSpec, Exponential, ModelParams
from .scan import MonotonicityError, min_epsilon, parse_grid
from .simulate import DATA, RngStream, draw_cohort
from .study import (CENSORING_SETTINGS, SCENARIO_INTENSITIES, StudyAborted, builtin_scenarios,
                    run_study, thresholds, write_results_csv)
from .testkit import TestConfig, run_similarity_test

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("crsim")


class InputError(ValueError):
    pass


def _run_args(p: argparse.ArgumentParser, grid: bool) -> None:
    p.add_argument("data", help="cohort CSV with header group,time,state")
    p.add_argument("--config", help="key = value run configuration file")
    p.add_argument("--measure", choices=[PROBABILITIES, INTENSITIES])
    p.add_argument("--censoring", help="adm:<T> or exp, for both groups")
    p.add_argument("--censoring1", help="censoring of group 1 (overrides --censoring)")
    p.add_argument("--censoring2", help="censoring of group 2 (overrides --censoring)")
    if grid:
        p.add_argument("--grid", help="thresholds as lo:hi:step or a comma list")
        p.add_argument("--refine", action="store_true", help="bisect the first rejection")
        p.add_argument("--strict", action="store_true",
                       help="fail when rejections are not monotone along the grid")
    else:
        p.add_argument("--epsilon", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--bootstrap", type=int, metavar="B")
    p.add_argument("--tau", type=float)
    p.add_argument("-k", type=int, help="number of causes (default: largest state in the file)")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--out", help="write the JSON report here")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crsim", description="Similarity tests for two competing-risks models.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    _run_args(sub.add_parser("test", help="test similarity at one threshold"), grid=False)
    _run_args(sub.add_parser("scan", help="smallest rejecting threshold on a grid"), grid=True)

    p = sub.add_parser("simulate", help="write a synthetic cohort CSV")
    p.add_argument("--scenario", help=f"one of {', '.join(SCENARIO_INTENSITIES)}")
    p.add_argument("--intensities1", help="comma-separated intensities of group 1")
    p.add_argument("--intensities2", help="comma-separated intensities of group 2")
    p.add_argument("--censoring", default="adm:90", help="adm:<T> or exp:<rate>")
    p.add_argument("--n1", type=int, default=200)
    p.add_argument("--n2", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1, help="accepted for symmetry; unused")
    p.add_argument("--out", help="output CSV (default: stdout)")

    p = sub.add_parser("study", help="Monte Carlo rejection rates of built-in scenarios")
    p.add_argument("--config", help="key = value study configuration file")
    p.add_argument("--scenario", dest="scenarios", help="comma-separated names or 'all'")
    p.add_argument("--censoring", dest="censorings",
                   help="comma-separated settings (adm, exp:0.002, ...) or 'all'")
    p.add_argument("--sizes", help="comma-separated n1xn2 pairs, e.g. 200x200,250x450")
    p.add_argument("--measure", dest="measures", help="prob, int or prob,int")
    p.add_argument("--n-sim", type=int)
    p.add_argument("--profile", choices=["desk", "full"],
                   help="desk: 300 runs, B=300; full: 1000 runs, B=500")
    p.add_argument("--alpha", type=float)
    p.add_argument("--bootstrap", type=int, metavar="B")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, help="worker processes")
    p.add_argument("--out", help="results CSV (default: stdout)")

    p = sub.add_parser("thresholds", help="thresholds of the margin scenario")
    p.add_argument("--tau", type=float, default=90.0)
    p.add_argument("--out", help="also write them as JSON")
    return parser


def _load_run_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    c1 = args.censoring1 or args.censoring
    c2 = args.censoring2 or args.censoring
    return cfg.updated(measure=args.measure, epsilon=getattr(args, "epsilon", None),
                       grid=getattr(args, "grid", None), alpha=args.alpha,
                       bootstrap=args.bootstrap, tau=args.tau, censoring1=c1, censoring2=c2,
                       k=args.k, seed=args.seed, threads=args.threads, out=args.out)


def _emit_json(obj: dict, out: Optional[str], summary: str) -> None:
    """Summary on stdout and JSON to ``out``; without ``out`` JSON goes to stdout."""
    if out:
        write_json(obj, out)
        print(summary)
    else:
        print(summary, file=sys.stderr)
        json.dump(obj, sys.stdout, indent=2)
        sys.stdout.write("\n")


def cmd_test(args) -> int:
    cfg = _load_run_config(args)
    if cfg.epsilon is None:
        raise InputError("test needs --epsilon (or epsilon in the config file)")
    c1, c2 = parse_cohorts(args.data, k=cfg.k)
    cens1, cens2 = cfg.censorings()
    tcfg = TestConfig(epsilon=cfg.epsilon, alpha=cfg.alpha, B=cfg.bootstrap, tau=cfg.tau,
                      measure=cfg.measure, seed=cfg.seed, workers=cfg.threads)
    report = run_similarity_test(c1, c2, cens1, cens2, tcfg)
    _emit_json(report.to_dict(), cfg.out, report.summary())
    return EXIT_OK


def cmd_scan(args) -> int:
    cfg = _load_run_config(args)
    if cfg.epsilon is not None:
        raise InputError("scan takes --grid, not a single epsilon")
    c1, c2 = parse_cohorts(args.data, k=cfg.k)
    cens1, cens2 = cfg.censorings()
    grid = parse_grid(cfg.grid) if cfg.grid else None
    result = min_epsilon(c1, c2, cens1, cens2, alpha=cfg.alpha, B=cfg.bootstrap, tau=cfg.tau,
                         grid=grid, seed=cfg.seed, measure=cfg.measure, refine=args.refine,
                         workers=cfg.threads, strict=args.strict)
    _emit_json(result.to_dict(), cfg.out, result.table())
    return EXIT_OK


def _parse_rates(text: str) -> ModelParams:
    try:
        return ModelParams([float(x) for x in text.split(",")])
    except ValueError as exc:
        raise InputError(f"bad intensities {text!r}: {exc}") from None


def cmd_simulate(args) -> int:
    if args.scenario and (args.intensities1 or args.intensities2):
        raise InputError("give either --scenario or --intensities1/--intensities2")
    if args.scenario:
        match = {k.lower(): v for k, v in SCENARIO_INTENSITIES.items()}.get(args.scenario.lower())
        if match is None:
            raise InputError(f"unknown scenario {args.scenario!r}")
        g1, g2 = ModelParams(match[0]), ModelParams(match[1])
    elif args.intensities1 and args.intensities2:
        g1, g2 = _parse_rates(args.intensities1), _parse_rates(args.intensities2)
        if g1.k != g2.k:
            raise InputError("both groups need the same number of causes")
    else:
        raise InputError("simulate needs --scenario or both --intensities1 and --intensities2")
    cens = CensoringSpec.parse(args.censoring)
    if isinstance(cens, Exponential) and cens.rate is None:
        raise InputError("simulation needs an explicit censoring rate, e.g. exp:0.005")
    if args.n1 < 1 or args.n2 < 1:
        raise InputError("sample sizes must be positive")
    c1 = draw_cohort(g1, cens, args.n1, RngStream(args.seed, 0, 1, DATA), label=1)
    c2 = draw_cohort(g2, cens, args.n2, RngStream(args.seed, 0, 2, DATA), label=2)
    write_cohorts(args.out or sys.stdout, c1, c2)
    return EXIT_OK


def _select_censorings(text: str) -> List[str]:
    if text.strip().lower() == "all":
        return list(CENSORING_SETTINGS)
    labels = []
    for item in text.split(","):
        item = item.strip()
        if item in CENSORING_SETTINGS:
            labels.append(item)
            continue
        spec = CensoringSpec.parse(item if item.lower() != "adm" else "adm:90")
        found = [lab for lab, c in CENSORING_SETTINGS.items() if c == spec]
        if not found:
            raise InputError(f"no built-in censoring setting {item!r}; "
                             f"choose from {', '.join(CENSORING_SETTINGS)}")
        labels.append(found[0])
    return labels


def cmd_study(args) -> int:
    cfg = load_study_config(args.config) if args.config else StudyConfig()
    if args.profile == "desk":
        cfg = cfg.updated(n_sim=300, bootstrap=300)
    elif args.profile == "full":
        cfg = cfg.updated(n_sim=1000, bootstrap=500)
    cfg = cfg.updated(scenarios=args.scenarios, censorings=args.censorings, sizes=args.sizes,
                      measures=args.measures, n_sim=args.n_sim, alpha=args.alpha,
                      bootstrap=args.bootstrap, seed=args.seed, threads=args.threads,
                      out=args.out)
    names = (list(SCENARIO_INTENSITIES) if cfg.scenarios.strip().lower() == "all"
             else [s.strip() for s in cfg.scenarios.split(",")])
    lookup = {k.lower(): k for k in SCENARIO_INTENSITIES}
    unknown = [n for n in names if n.lower() not in lookup]
    if unknown:
        raise InputError(f"unknown scenarios {unknown}")
    names = [lookup[n.lower()] for n in names]
    labels = _select_censorings(cfg.censorings)
    scenarios = [s for s in builtin_scenarios()
                 if s.name in names and s.censoring_label in labels]
    sizes, measures = cfg.size_pairs(), cfg.measure_list()
    TestConfig(epsilon=1.0, alpha=cfg.alpha, B=cfg.bootstrap)  # validates alpha and B

    def progress(r):
        print(f"{r.scenario:>6} {r.censoring:>10} ({r.n1},{r.n2}) {r.measure:>4}: "
              f"{r.rejections}/{r.n_sim} = {r.rejection_rate:.3f}  [{r.wall_time:.1f} s]",
              file=sys.stderr)

    results = run_study(scenarios, sizes, measures, n_sim=cfg.n_sim, B=cfg.bootstrap,
                        alpha=cfg.alpha, seed=cfg.seed, workers=cfg.threads, progress=progress)
    write_results_csv(results, cfg.out or sys.stdout)
    return EXIT_OK


def cmd_thresholds(args) -> int:
    start = time.perf_counter()
    table = thresholds(args.tau)
    print(f"{'censoring':>11} {'eps_int':>8} {'eps_inf':>9}")
    for label, (e_int, e_inf) in table.items():
        print(f"{label:>11} {e_int:>8.4f} {e_inf:>9.5f}")
    log.info("computed in %.3f s", time.perf_counter() - start)
    if args.out:
        write_json({"schema_version": 1, "tau": args.tau,
                    "thresholds": {k: {"eps_int": v[0], "eps_inf": v[1]}
                                   for k, v in table.items()}}, args.out)
    return EXIT_OK


COMMANDS = {"test": cmd_test, "scan": cmd_scan, "simulate": cmd_simulate,
            "study": cmd_study, "thresholds": cmd_thresholds}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with status 2
        return int(exc.code or 0)
    warnings.filterwarnings("ignore", "Values in x were outside bounds", RuntimeWarning)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConstrainedFitError, StudyAborted, MonotonicityError, FloatingPointError) as exc:
        print(f"crsim: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, ConfigError, ValueError, KeyError, OSError) as exc:
        print(f"crsim: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
