"""Run the bundled experiment configs and print a one-line digest per regime.

    python3 scripts/run_regimes.py                      # every config, as written
    python3 scripts/run_regimes.py --runs 10 wrong_r    # one regime, fewer runs

The impoverishment regime runs as a baseline-vs-pso comparison; the others run their stated variant,
and the wrong-R regime also runs pso with the wrong R held fixed for reference.
"""

import argparse
import json
from pathlib import Path

from psoslam.harness import compare, load_config, run_monte_carlo

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def digest(name: str, s: dict) -> str:
    return (f"{name:<28} rmse {s['mean_pos_rmse']:.3f} +- {s['std_pos_rmse']:.3f}  "
            f"divergence {s['divergence_rate']:.2f}  2sigma {s['mean_2sigma_coverage']:.2f}  "
            f"R ({s['mean_final_r_range']:.3g}, {s['mean_final_r_bearing']:.3g})  {s['wall_time_s']:.0f}s")


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("regimes", nargs="*", help="config names without .json (default: all)")
    ap.add_argument("--runs", type=int)
    ap.add_argument("--workers", type=int)
    args = ap.parse_args(argv)

    names = args.regimes or sorted(p.stem for p in CONFIGS.glob("*.json"))
    for name in names:
        cfg = load_config(CONFIGS / f"{name}.json").with_overrides(runs=args.runs, workers=args.workers)
        if name == "impoverishment":
            res = compare(cfg, ["baseline", "pso"])
            for v, s in res["variants"].items():
                print(digest(f"{name}/{v}", s))
            print(json.dumps(res["paired"]))
            continue
        print(digest(f"{name}/{cfg.filter.variant}", run_monte_carlo(cfg)))
        if name == "wrong_r":
            out = None if cfg.output_dir is None else cfg.output_dir + "_fixed"
            print(digest(f"{name}/pso (fixed R)", run_monte_carlo(cfg.with_overrides(variant="pso", output_dir=out))))


if __name__ == "__main__":
    main()
