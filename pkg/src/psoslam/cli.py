"""Command-line entry point: ``run`` one Monte Carlo batch or ``compare`` variants on shared seeds."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .filter import VARIANTS
from .harness import ExperimentConfig, compare, load_config, run_monte_carlo

SUMMARY_KEYS = ("mean_pos_rmse", "std_pos_rmse", "mean_heading_rmse", "divergence_rate",
                "mean_2sigma_coverage", "mean_final_r_range", "mean_final_r_bearing", "wall_time_s")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="experiment JSON file")
    p.add_argument("--particles", type=int)
    p.add_argument("--runs", type=int)
    p.add_argument("--seed", type=int, dest="base_seed")
    p.add_argument("--out", dest="output_dir")
    p.add_argument("--workers", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="psoslam", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a Monte Carlo batch for one variant")
    _add_common(run)
    run.add_argument("--variant", choices=VARIANTS)

    cmp_ = sub.add_parser("compare", help="run several variants on the same seeds")
    _add_common(cmp_)
    cmp_.add_argument("--variants", required=True, help="comma-separated, first one is the reference")
    return parser


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    return cfg.with_overrides(variant=getattr(args, "variant", None), particles=args.particles,
                              runs=args.runs, base_seed=args.base_seed, output_dir=args.output_dir,
                              workers=args.workers)


def format_summary(summary: dict) -> str:
    return "\n".join(f"{k}: {summary[k]:.6g}" for k in SUMMARY_KEYS if k in summary)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print(f"error: bad config: {exc}", file=sys.stderr)
        return 2

    if args.command == "run":
        summary = run_monte_carlo(cfg)
        print(f"variant: {summary['variant']}  particles: {summary['particles']}  runs: {summary['runs']}"
              f"  failed: {summary['failed_runs']}")
        print(format_summary(summary))
        return 0 if summary["failed_runs"] == 0 else 1

    variants = [v.strip() for v in args.variants.split(",") if v.strip()]
    bad = [v for v in variants if v not in VARIANTS]
    if len(variants) < 2 or bad:
        print(f"error: need two or more of {VARIANTS}, got {args.variants!r}", file=sys.stderr)
        return 2
    result = compare(cfg, variants)
    for v, s in result["variants"].items():
        print(f"[{v}]")
        print(format_summary(s))
    print(json.dumps(result["paired"], indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
