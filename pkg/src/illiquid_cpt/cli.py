"""Command line front end: ``check``, ``optimize``, ``compare-randomized`` and ``plot-data``."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError
from .experiment import ExperimentError, emit_plot_data, run_experiment
from .optimizer import OptimizationError


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="illiquid-cpt", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "check": "run the well-posedness and integrability diagnostics only",
        "optimize": "diagnostics followed by the strategy search",
        "compare-randomized": "optimize with and without randomized strategies on the same scenarios",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, help="experiment INI file")
        p.add_argument("--seed", type=_seed, help="override run.seed")
        p.add_argument("--out", help="override run.output_dir")
        p.add_argument("--allow-ill-posed", action="store_true",
                       help="run even if delta1 <= delta2 or the certificate fails")
    p = sub.add_parser("plot-data", help="write plot series and figures from an existing report directory")
    p.add_argument("--out", required=True, help="report directory written by optimize/compare-randomized")
    p.add_argument("--dest", help="directory for the series (defaults to --out)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "plot-data":
            for path in emit_plot_data(args.out, args.dest):
                print(path)
            return 0
        manifest = run_experiment(args.config, args.command, seed=args.seed, out=args.out,
                                  allow_ill_posed=args.allow_ill_posed)
    except (ConfigError, ExperimentError, OptimizationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {manifest.output_dir}")
    for name, digest in sorted(manifest.files.items()):
        print(f"  {name}  {digest[:12]}")
    return 0
