"""
Main entrypoint for the recurrence-predictor lab.

Usage:
  python run.py predict    --data PATH            forward prediction from a data file
  python run.py evaluate   --process NAME ...     Cesaro errors along generated paths -> CSV
  python run.py certify    --schedule L3,L4,...   divergence certificates on an odometer schedule
  python run.py adversary  --scheme NAME ...      odometer schedule built against a scheme
  python run.py martingale --generator NAME ...   martingale-difference lab run

Every subcommand accepts --config PATH (key = value file) and --workers N.
Exit codes: 0 success, 1 input/config error, 2 capability/budget error, 3 I/O error.
"""

import importlib
import logging
import os
import sys
from pathlib import Path

PROJECT_ROOT = Path(__file__).resolve().parent
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from dotenv import load_dotenv

SUBCOMMANDS = {
    "predict": "scripts.predict",
    "evaluate": "scripts.evaluate",
    "certify": "scripts.certify",
    "adversary": "scripts.adversary",
    "martingale": "scripts.martingale",
}


def usage(stream=sys.stderr):
    print("Usage: python run.py " + " | ".join(SUBCOMMANDS) + " [options]", file=stream)
    print("  python run.py <subcommand> --help  for subcommand options", file=stream)


def configure_logging():
    from config import LOG_LEVEL_ENV

    level = os.getenv(LOG_LEVEL_ENV, "INFO").strip().upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def run(argv=None) -> int:
    """Dispatch one subcommand and return its exit code."""
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv or argv[0] in ("-h", "--help"):
        usage(sys.stdout if argv else sys.stderr)
        return 0 if argv else 1
    mode = argv[0].strip().lower()
    if mode not in SUBCOMMANDS:
        print(f"Unknown subcommand: {mode}.", file=sys.stderr)
        usage()
        return 1

    from core.errors import LabError
    from scripts.common import print_config, resolve_config

    module = importlib.import_module(SUBCOMMANDS[mode])
    try:
        args = module.get_parser().parse_args(argv[1:])
    except SystemExit as e:
        return int(e.code or 0)
    try:
        cfg = resolve_config(args, mode)
        code = module.run(cfg)
    except LabError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    if code == 0:
        print_config(cfg)
    return code


def main():
    load_dotenv()
    configure_logging()
    sys.exit(run())


if __name__ == "__main__":
    main()
