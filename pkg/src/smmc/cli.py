"""Command-line entry point: ``smmc run|sweep|ccdf|oracle``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

import yaml

from . import harness
from .benchmarks import BENCHMARKS, get_benchmark


def _parse_set(items) -> dict:
    """``key=value`` overrides; values are parsed as YAML scalars."""
    out = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise harness.ConfigError(f"override {item!r} is not of the form key=value")
        out[key.strip()] = yaml.safe_load(value)
    return out


def _load(args) -> harness.RunConfig:
    cfg = harness.RunConfig.from_file(args.config)
    overrides = _parse_set(args.set)
    for name in ("method", "problem", "seed", "L", "out_dir", "ref_pf", "threshold", "workers"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    return cfg.with_overrides(**overrides) if overrides else cfg


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="YAML file of (dotted) configuration keys")
    p.add_argument("--method", choices=harness.METHODS)
    p.add_argument("--problem", choices=sorted(BENCHMARKS))
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--threshold", type=float, help="failure threshold y*")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a configuration key, e.g. smmc.alpha=0.1 (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="smmc", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="L repetitions of one method; writes report.json and runs.csv")
    _add_common(run)
    run.add_argument("-L", "--L", type=int, dest="L", help="number of repetitions")
    run.add_argument("--out-dir", dest="out_dir")
    run.add_argument("--ref-pf", dest="ref_pf", type=float,
                     help="reference failure probability for the RMSE")
    run.add_argument("--workers", type=int, help="parallel repetitions (default 1: sequential)")

    sw = sub.add_parser("sweep", help="repeat the experiment at several evaluation budgets")
    _add_common(sw)
    sw.add_argument("--budgets", required=True, help="comma-separated, e.g. 2e4,1e5,3e5")
    sw.add_argument("-L", "--L", type=int, dest="L")
    sw.add_argument("--out-dir", dest="out_dir")
    sw.add_argument("--ref-pf", dest="ref_pf", type=float)
    sw.add_argument("--workers", type=int)

    cc = sub.add_parser("ccdf", help="one run; export the per-bin PDF/CCDF as CSV")
    _add_common(cc)
    cc.add_argument("--out", required=True, help="output CSV path")
    cc.add_argument("--quantile", type=float, action="append", metavar="P",
                    help="also print the P-quantile read off the CCDF (repeatable)")

    orc = sub.add_parser("oracle", help="print the reference failure probability")
    orc.add_argument("--problem", required=True, choices=sorted(BENCHMARKS))
    orc.add_argument("--threshold", type=float)
    return parser


def cmd_run(args) -> int:
    cfg = _load(args)
    report = harness.run_experiment(cfg)
    summary = {k: v for k, v in report.to_dict().items() if k not in ("estimates", "evals")}
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def cmd_sweep(args) -> int:
    cfg = _load(args)
    rows = harness.sweep(cfg, harness.parse_budgets(args.budgets))
    print(json.dumps(rows, indent=2, sort_keys=True))
    return 0


def cmd_ccdf(args) -> int:
    cfg = _load(args)
    res = harness.distribution_run(cfg)
    path = harness.export_ccdf(res.distribution, args.out)
    print(f"wrote {path} ({res.evals} evaluations, P_F estimate {res.estimate:.6g})")
    for p in args.quantile or []:
        print(f"quantile {p!r}: {harness.extreme_quantile(res.distribution, p):.6g}")
    return 0


def cmd_oracle(args) -> int:
    bench = get_benchmark(args.problem)
    t = bench.threshold if args.threshold is None else args.threshold
    ref = bench.ref_pf(t)
    if ref is None:
        print(f"no analytic reference for {args.problem}", file=sys.stderr)
        return 2
    print(f"{args.problem} threshold={t!r} P_F={ref:.10e}")
    return 0


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "ccdf": cmd_ccdf, "oracle": cmd_oracle}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (harness.ConfigError, ValueError, KeyError, OSError, RuntimeError) as exc:
        print(f"smmc {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
