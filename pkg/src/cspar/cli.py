"""Command line front end: one subcommand per pipeline stage.

Exit codes: 0 on success, 2 for configuration problems, 3 for missing
or inconsistent data artifacts.
"""

from __future__ import annotations

import argparse
import sys

from . import pipeline
from .blockio import ContainerError
from .pipeline import ConfigError, DataError

_STAGES = {
    "simulate": pipeline.cmd_simulate,
    "compress": pipeline.cmd_compress,
    "reconstruct": pipeline.cmd_reconstruct,
    "image": pipeline.cmd_image,
    "metrics": pipeline.cmd_metrics,
    "sweep-linearity": pipeline.cmd_sweep_linearity,
    "rip-check": pipeline.cmd_rip_check,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cspar",
        description="Compressive photoacoustic receiver: simulate, compress, "
                    "reconstruct, image, and characterize.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in _STAGES.items():
        p = sub.add_parser(name, help=fn.__doc__.splitlines()[0].rstrip("."))
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", default=None,
                       help="override the configured output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override every stage seed with one value")
        p.add_argument("--jobs", type=int, default=1,
                       help="worker processes for per-position stages")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.jobs < 1:
            raise ConfigError(f"--jobs must be >= 1, got {args.jobs}")
        cfg = pipeline.load_config(args.config)
        if args.out is not None:
            cfg["out_dir"] = args.out
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError(f"--seed must be >= 0, got {args.seed}")
            cfg = pipeline.apply_seed_override(cfg, args.seed)
        _STAGES[args.command](cfg, jobs=args.jobs)
    except ConfigError as exc:
        print(f"cspar: config error: {exc}", file=sys.stderr)
        return 2
    except (DataError, ContainerError) as exc:
        print(f"cspar: data error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
