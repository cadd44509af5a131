"""
Recurrence-predictor lab configuration: caps, defaults and shared settings.
"""

import os

# Quantizer lattice: levels above MAX_LEVEL and indices at or above MAX_INDEX
# are rejected so every represented value stays an exact dyadic rational.
MAX_LEVEL = 30
MAX_INDEX = 2**53

# Odometer enumeration oracle works over 2**L prefixes.
ENUMERATION_CAP = 24
# r_k_infinite never reads further back than this.
DEPTH_CAP = 10**7

DEFAULT_SLACK = 0.1
# Retry budget for E-hit search is 2**(a_k + E_HIT_RETRY_EXTRA).
E_HIT_RETRY_EXTRA = 6

GENERATOR_NAME = "numpy.random.default_rng (PCG64)"

OUTPUT_DIR_ENV = "RECURRENCE_OUTPUT_DIR"
LOG_LEVEL_ENV = "RECURRENCE_LOG_LEVEL"
WORKERS_ENV = "RECURRENCE_WORKERS"


def default_workers():
    value = os.getenv(WORKERS_ENV, "").strip()
    if value:
        return max(1, int(value))
    return os.cpu_count() or 1


# Named processes the CLI can build without a config file.
PROCESS_PRESETS = {
    "markov": {
        "kind": "markov",
        "values": [0.0, 1.0],
        "matrix": [[0.7, 0.3], [0.2, 0.8]],
    },
    "iid": {
        "kind": "iid",
        "values": [0.0, 1.0],
        "probs": [0.5, 0.5],
    },
    "constant": {
        "kind": "iid",
        "values": [1.0],
        "probs": [1.0],
    },
    "function_of_markov": {
        "kind": "function_of_markov",
        "chain": {
            "kind": "markov",
            "values": [0.0, 1.0, 2.0],
            "matrix": [[0.1, 0.6, 0.3], [0.4, 0.1, 0.5], [0.5, 0.3, 0.2]],
        },
        "state": 0,
    },
    "ar1": {
        "kind": "ar1",
        "a": 0.5,
        "sigma": 1.0,
    },
    "odometer": {
        "kind": "odometer",
        "schedule": [5, 9, 15],
    },
}

# Martingale lab defaults.
PARETO_SHAPE = 2.5
LLOGL_MAX_EXPONENT = 40
LLOGL_LEVEL_CYCLE = 4

# CSV report schema.
report_dtype = {
    "t": "int64",
    "p": "float64",
    "seed": "str",
    "err_vs_oracle": "float64",
    "err_vs_realized": "float64",
    "reference_limit": "float64",
}

trajectory_dtype = {
    "n": "int64",
    "seed": "str",
    "running_average": "float64",
}

FLOAT_FORMAT = "%.17g"
