"""Command-line entry point: ``stickymc run|bench|targets``."""

import argparse
import logging
import sys

from .bench import PRESETS, preset, run_experiment
from .config import PAPER_RUNS, parse_config
from .errors import StickyError
from .targets import TARGET_NAMES


def _common(p):
    p.add_argument("--seed", type=int, help="master seed (default: from config, else 0)")
    p.add_argument("--runs", type=int, help="number of replications")
    p.add_argument("--out", help="output directory")
    p.add_argument("--workers", type=int, help="parallel worker processes")
    p.add_argument("--paper-scale", action="store_true",
                   help=f"use {PAPER_RUNS} replications as in the original study")


def build_parser():
    parser = argparse.ArgumentParser(prog="stickymc", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment described by a TOML file")
    p_run.add_argument("config")
    _common(p_run)
    p_bench = sub.add_parser("bench", help="run a built-in preset")
    p_bench.add_argument("preset", choices=sorted(PRESETS))
    _common(p_bench)
    sub.add_parser("targets", help="list available targets")
    return parser


def _apply(cfg, args):
    runs = PAPER_RUNS if args.paper_scale else args.runs
    out = args.out
    if out is None and args.command == "bench":
        out = f"results/{cfg.name}"
    return cfg.with_overrides(seed=args.seed, runs=runs, out=out, workers=args.workers)


def _report(result):
    for row in result.rows:
        mse = "" if row.mse is None else f" mse={row.mse:.4g}"
        print(f"{row.algorithm:<18} mean={row.mean:.6g} sd={row.sd_mean:.4g}{mse} "
              f"acf1={row.acf1:.4f} m_T={row.m_T:.1f} acc={row.acc_T:.3f}")
    print(f"outputs written to {result.out_dir}")
    if result.failures:
        for label, eps, run, msg in result.failures:
            print(f"run {run} of {label}{'' if eps is None else f' eps={eps}'} failed: {msg}",
                  file=sys.stderr)
        return 1
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "targets":
            for name, desc in TARGET_NAMES.items():
                print(f"{name:<14} {desc}")
            return 0
        cfg = parse_config(args.config) if args.command == "run" else preset(args.preset)
        return _report(run_experiment(_apply(cfg, args)))
    except (StickyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
