"""Command-line experiment runner.

    uavd2d sweep-height --seeds 0..29 --out results
    uavd2d solve --seeds 7 --set num_d2d=4 --set k_tilde=1e-5
    uavd2d --experiment validate-outage --mc-samples 1000000
"""

from __future__ import annotations

import argparse
import sys

from .experiments import EXPERIMENTS, ExperimentSpec, parse_seeds, run


def _pair(text: str) -> tuple[str, str]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    key, value = text.split("=", 1)
    return key.strip(), value.strip()


def build_parser() -> argparse.ArgumentParser:
    ids = "\n".join(f"  {k:16s} {v}" for k, v in EXPERIMENTS.items())
    p = argparse.ArgumentParser(
        prog="uavd2d", formatter_class=argparse.RawDescriptionHelpFormatter,
        description="UAV-relayed D2D underlay experiments.",
        epilog="experiments:\n" + ids)
    p.add_argument("experiment_id", nargs="?", metavar="EXPERIMENT",
                   help="experiment id (same as --experiment)")
    p.add_argument("--experiment", dest="experiment_flag", metavar="ID")
    p.add_argument("--config", metavar="PATH", help="key=value config file")
    p.add_argument("--set", dest="overrides", action="append", type=_pair, default=[],
                   metavar="KEY=VALUE", help="override one config key (repeatable)")
    p.add_argument("--seeds", default="0", help="seed list: 'a..b', 'a,b,c' or one seed")
    p.add_argument("--seed", dest="seeds", help=argparse.SUPPRESS)
    p.add_argument("--out", default="results", metavar="DIR")
    p.add_argument("--mc-samples", type=int, default=10 ** 6, metavar="N")
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    exp = args.experiment_flag or args.experiment_id
    if args.experiment_flag and args.experiment_id and args.experiment_flag != args.experiment_id:
        parser.error("positional experiment and --experiment disagree")
    if not exp:
        parser.error("no experiment given")
    try:
        spec = ExperimentSpec(exp, tuple(args.overrides), parse_seeds(args.seeds), args.out,
                              args.mc_samples, args.config)
        spec.config()  # validate before any work
        summary, failures = run(spec)
    except (ValueError, KeyError, OSError) as exc:
        print(f"uavd2d: error: {exc}", file=sys.stderr)
        return 2
    print(summary)
    if failures:
        print(f"uavd2d: {failures} seed(s) failed; partial results kept", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
