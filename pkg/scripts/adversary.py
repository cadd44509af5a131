"""
Build an odometer schedule against a named prediction scheme and certify
every stage small enough to enumerate.

Run from project root: python run.py adversary --scheme sample_mean --k-max 5
"""
import sys
from pathlib import Path

_root = Path(__file__).resolve().parent.parent
if str(_root) not in sys.path:
    sys.path.insert(0, str(_root))

from core.errors import EnumerationRangeError
from core.odometer import AdversaryParams, build_adversarial_schedule, divergence_certificate
from core.schemes import SCHEMES, get_scheme
from scripts.certify import format_certificate
from scripts.common import add_seeds, new_parser


def get_parser():
    parser = new_parser("run.py adversary", "Construct an odometer process on which a scheme fails.")
    parser.add_argument("--scheme", type=str, default=None, choices=sorted(SCHEMES))
    parser.add_argument("--k-max", type=int, default=None, metavar="K")
    parser.add_argument("--n-seeds", type=int, default=None, metavar="N",
                        help="simulated paths per stage for the threshold estimate")
    parser.add_argument("--horizon", type=int, default=None, metavar="M",
                        help="path length for the threshold estimate")
    parser.add_argument("--slack", type=float, default=None)
    parser.add_argument("--enumeration-cap", type=int, default=None, metavar="BITS")
    add_seeds(parser)
    return parser


def run(cfg):
    scheme = get_scheme(cfg.scheme)
    seed = cfg.seeds[0] if cfg.seeds else 0
    params = AdversaryParams(k_max=cfg.k_max, n_seeds=cfg.n_seeds, horizon=cfg.horizon, seed=seed,
                             workers=cfg.workers)
    schedule = build_adversarial_schedule(scheme, params)
    print(f"scheme = {scheme.name}")
    print(f"schedule = {schedule}")
    print(f"thresholds = {','.join(str(n) for n in schedule.thresholds)}")
    for k in schedule.ks:
        try:
            cert = divergence_certificate(schedule, k, seed, slack=cfg.slack, scheme=scheme,
                                          cap=cfg.enumeration_cap)
        except EnumerationRangeError as e:
            print(f"k={k}: not certified ({e})")
            continue
        print(format_certificate(cert))
    return 0
