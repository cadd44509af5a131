"""
Divergence certificates for an odometer schedule.

Run from project root: python run.py certify --schedule 5,9,15 --k 3,5
"""
import sys
from pathlib import Path

_root = Path(__file__).resolve().parent.parent
if str(_root) not in sys.path:
    sys.path.insert(0, str(_root))

from core.odometer import OdometerSchedule, divergence_certificate
from core.schemes import SCHEMES, get_scheme
from scripts.common import add_seeds, new_parser


def format_certificate(cert) -> str:
    status = "PASS" if cert.passed else "FAIL"
    exact_status = "PASS" if cert.exact_passed else "FAIL"
    return (
        f"k={cert.k} a={cert.a} [{status}] reference={cert.reference} "
        f"i0={cert.i0} m={cert.special_time} N={cert.horizon} attempts={cert.attempts}\n"
        f"  window_mean={cert.window_mean!r} closed_form={cert.closed_form_mean!r} "
        f"full_past={cert.full_past_value!r}\n"
        f"  cesaro={cert.cesaro_value!r} special_term={cert.special_term!r} "
        f"bound={cert.bound!r} slack={cert.slack!r}\n"
        f"  exact_bound={cert.exact_bound!r} [{exact_status}]"
    )


def get_parser():
    parser = new_parser("run.py certify", "Certify window vs full-past divergence on an odometer schedule.")
    parser.add_argument("--schedule", type=str, default=None, metavar="L3,L4,...")
    parser.add_argument("--k", type=str, default=None, metavar="K1,K2,...",
                        help="stages to certify (comma list)")
    parser.add_argument("--slack", type=float, default=None)
    parser.add_argument("--enumeration-cap", type=int, default=None, metavar="BITS")
    parser.add_argument("--reference", type=str, default=None, choices=["full_past"] + sorted(SCHEMES),
                        help="compare window means with the full past (default) or a black-box scheme")
    add_seeds(parser)
    return parser


def certificates(cfg, scheme=None):
    schedule = OdometerSchedule(tuple(cfg.schedule))
    seed = cfg.seeds[0] if cfg.seeds else 0
    return [
        divergence_certificate(schedule, k, seed, slack=cfg.slack, scheme=scheme, cap=cfg.enumeration_cap)
        for k in cfg.k
    ]


def run(cfg):
    scheme = None if cfg.reference == "full_past" else get_scheme(cfg.reference)
    print(f"schedule = {','.join(str(l) for l in cfg.schedule)}")
    for cert in certificates(cfg, scheme):
        print(format_certificate(cert))
    return 0
