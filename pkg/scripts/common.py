"""
Pieces shared by the subcommand scripts: the argument parser class, common
flags and config resolution (defaults < --config file < flags).
"""
import sys
from pathlib import Path

_root = Path(__file__).resolve().parent.parent
if str(_root) not in sys.path:
    sys.path.insert(0, str(_root))

import argparse

from config import GENERATOR_NAME
from core.processes import spec_from_config
from utils.run_config import RunConfig, format_config, load_config, merge


class LabArgumentParser(argparse.ArgumentParser):
    """Usage errors exit with code 1 instead of argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def new_parser(prog, description):
    parser = LabArgumentParser(prog=prog, description=description)
    parser.add_argument("--config", type=str, default=None, metavar="PATH",
                        help="key = value config file; flags override its values")
    parser.add_argument("--workers", type=int, default=None, metavar="N",
                        help="parallel seeds (default: RECURRENCE_WORKERS or CPU count)")
    return parser


def add_seeds(parser):
    parser.add_argument("--seeds", type=str, default=None, metavar="N|S1,S2,...",
                        help="seed count (seeds 0..N-1) or explicit comma list")


def resolve_config(args, subcommand) -> RunConfig:
    base = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    overrides = {k: v for k, v in vars(args).items() if k != "config"}
    overrides["subcommand"] = subcommand
    return merge(base, overrides)


def process_spec(cfg: RunConfig):
    return spec_from_config(cfg.process, cfg.schedule)


def print_config(cfg: RunConfig):
    print("# effective configuration")
    print(f"# generator: {GENERATOR_NAME}")
    print(format_config(cfg))

