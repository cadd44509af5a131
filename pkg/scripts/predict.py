"""
One-shot forward prediction from a data file (one real per line, X_0 first).

Run from project root: python run.py predict --data PATH
"""
import sys
from pathlib import Path

_root = Path(__file__).resolve().parent.parent
if str(_root) not in sys.path:
    sys.path.insert(0, str(_root))

import numpy as np

from core.errors import InputError, ReportIOError
from core.predictor import forward_predict
from scripts.common import new_parser


def read_series(path) -> np.ndarray:
    try:
        values = np.loadtxt(path, dtype=np.float64, ndmin=1)
    except OSError as e:
        raise ReportIOError(path, e.strerror or str(e)) from e
    except ValueError as e:
        raise InputError(f"{path}: expected one real number per line ({e})") from e
    if values.size == 0:
        raise InputError(f"{path}: no values")
    return values


def get_parser():
    parser = new_parser("run.py predict", "Predict the next value of a series with the pattern-recurrence estimator.")
    parser.add_argument("--data", type=str, default=None, metavar="PATH",
                        help="text file, one real per line, X_0 first")
    return parser


def run(cfg):
    if not cfg.data:
        raise InputError("predict needs --data PATH")
    values = read_series(cfg.data)
    prediction = forward_predict(values)
    trace = prediction.trace
    print(f"prediction = {prediction.value!r}")
    print(f"kappa = {trace.kappa}")
    print(f"taus = {list(trace.taus)}")
    print(f"lambdas = {list(trace.lambdas)}")
    if prediction.fallback_used:
        print("no recurrence found; fallback value 0 used")
    if trace.capped:
        print("search stopped at the level cap")
    return 0
