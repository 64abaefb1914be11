"""slotbench command line: one stage per invocation.

    slotbench <stage> --config <path> [--seed N] [--k K] [--data-fraction F]
              [--pck-threshold T] [--force]

The artifact root comes from $SLOTBENCH_ROOT (default ./artifacts). Overrides
are folded into the config before hashing, so an overridden run is its own
cached artifact.
"""
import argparse
import sys

from .config import STAGES, apply_overrides, load_config
from .runner import run_stage
from .stages import STAGE_FNS


def make_parser():
    parser = argparse.ArgumentParser(prog="slotbench")
    sub = parser.add_subparsers(dest="stage", required=True)
    for stage in STAGES:
        p = sub.add_parser(stage)
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--k", type=int, default=None)
        p.add_argument("--data-fraction", type=float, default=None)
        p.add_argument("--pck-threshold", type=float, default=None)
        p.add_argument("--force", action="store_true")
    return parser


def main(argv=None):
    args = make_parser().parse_args(argv)
    cfg = load_config(args.config)
    if cfg["stage"] != args.stage:
        print(f"error: {args.config} is a {cfg['stage']} config, not {args.stage}",
              file=sys.stderr)
        return 2
    cfg = apply_overrides(
        cfg,
        seed=args.seed,
        k=args.k,
        data_fraction=args.data_fraction,
        pck_threshold=args.pck_threshold,
    )
    try:
        run_stage(cfg, STAGE_FNS[args.stage], force=args.force)
    except (FileNotFoundError, ValueError, RuntimeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
