"""
Cesaro-error evaluation of the predictor on a named process, written as CSV.

Run from project root: python run.py evaluate --process markov --p 1 --T 200000 --seeds 5 --out r.csv
"""
import sys
from pathlib import Path

_root = Path(__file__).resolve().parent.parent
if str(_root) not in sys.path:
    sys.path.insert(0, str(_root))

from config import PROCESS_PRESETS
from core.harness import evaluate, write_report
from scripts.common import add_seeds, new_parser, process_spec

DEFAULT_OUT = "cesaro_report.csv"


def get_parser():
    parser = new_parser("run.py evaluate", "Run the predictor along generated paths and report Cesaro errors.")
    parser.add_argument("--process", type=str, default=None, choices=sorted(PROCESS_PRESETS),
                        help="named process (default: markov)")
    parser.add_argument("--schedule", type=str, default=None, metavar="L3,L4,...",
                        help="odometer schedule, used with --process odometer")
    parser.add_argument("--p", type=float, default=None, help="error exponent, at least 1")
    parser.add_argument("--T", type=int, default=None, metavar="T", help="horizon")
    parser.add_argument("--enumeration-cap", type=int, default=None, metavar="BITS",
                        help="largest l_K the odometer oracle enumerates")
    parser.add_argument("--out", type=str, default=None, metavar="PATH",
                        help=f"CSV destination (default: {DEFAULT_OUT})")
    add_seeds(parser)
    return parser


def run(cfg):
    report = evaluate(
        process_spec(cfg),
        p=cfg.p,
        T=cfg.T,
        seeds=cfg.seeds,
        workers=cfg.workers,
        enumeration_cap=cfg.enumeration_cap,
    )
    print(f"t = {int(report.grid[-1])}")
    print(f"err_vs_oracle = {report.err_vs_oracle[-1]!r}")
    print(f"err_vs_realized = {report.err_vs_realized[-1]!r}")
    if report.reference_limit is not None:
        print(f"reference_limit = {report.reference_limit!r}")
    path = write_report(report, cfg.out or DEFAULT_OUT)
    print(f"Report written to {path} ({len(report.curves)} seeds, {report.grid.size} grid points).")
    return 0
