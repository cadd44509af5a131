"""
Martingale-difference lab run: running averages, sup-average estimate and
its stabilization over n.

Run from project root: python run.py martingale --generator coin --n-max 1000000 --out traj.csv
"""
import sys
from pathlib import Path

_root = Path(__file__).resolve().parent.parent
if str(_root) not in sys.path:
    sys.path.insert(0, str(_root))

import numpy as np

from core.martingale_lab import (
    GENERATORS,
    MIN_N,
    martingale_spec,
    simulate_running_averages,
    sup_stabilization,
    write_trajectories,
)
from scripts.common import add_seeds, new_parser


def get_parser():
    parser = new_parser("run.py martingale", "Simulate averaged martingale differences.")
    parser.add_argument("--generator", type=str, default=None, choices=list(GENERATORS))
    parser.add_argument("--n-max", type=int, default=None, metavar="N")
    parser.add_argument("--p", type=float, default=None, help="exponent of the sup-average estimate")
    parser.add_argument("--moment", type=float, default=None,
                        help="order of the moment the differences keep finite (pareto tail follows it)")
    parser.add_argument("--shape", type=float, default=None, help="explicit pareto shape")
    parser.add_argument("--out", type=str, default=None, metavar="PATH",
                        help="optional CSV of running-average trajectories")
    add_seeds(parser)
    return parser


def stabilization_points(n_max):
    """Decades from MIN_N up to n_max, ending at n_max."""
    points = [n for n in (10 ** np.arange(2, 13)).tolist() if MIN_N <= n < n_max]
    return points + [n_max]


def run(cfg):
    spec = martingale_spec(cfg.generator, p=cfg.moment, shape=cfg.shape or None)
    run_ = simulate_running_averages(spec, cfg.n_max, cfg.seeds, cfg.workers)
    finals = [abs(float(t.averages[-1])) for t in run_.trajectories]
    print(f"generator = {spec.name}")
    if spec.name == "pareto":
        print(f"pareto shape = {spec.pareto_shape!r}")
    print(f"max |final average| = {max(finals)!r}")
    stab = sup_stabilization(spec, stabilization_points(cfg.n_max), cfg.seeds, p=cfg.p, workers=cfg.workers)
    for est in stab.estimates:
        print(f"n={est.n_max} sup-average^{est.p:g} = {est.estimate!r} (stderr {est.stderr!r})")
    if stab.growth_flag:
        print("warning: sup-average estimate still growing")
    if cfg.out:
        path = write_trajectories(run_, cfg.out)
        print(f"Trajectories written to {path}.")
    return 0
