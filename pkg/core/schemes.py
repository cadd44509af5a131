"""
Black-box prediction schemes h_m: finite history -> real.

Each scheme is callable on a history; `series(values)` returns an array h
with h[m] = h_m(values[:m]) for m = 1..len(values) (h[0] is NaN). Schemes
without a vectorized series fall back to calling the scheme on every prefix.
"""

import numpy as np

from core.errors import InputError


class ZeroScheme:
    name = "zero"

    def __call__(self, history):
        return 0.0

    def series(self, values):
        out = np.zeros(len(values) + 1)
        out[0] = np.nan
        return out


class SampleMeanScheme:
    name = "sample_mean"

    def __call__(self, history):
        return float(np.mean(history)) if len(history) else 0.0

    def series(self, values):
        x = np.asarray(values, dtype=np.float64)
        out = np.full(x.size + 1, np.nan)
        out[1:] = np.cumsum(x) / np.arange(1, x.size + 1)
        return out


class LastValueScheme:
    name = "last_value"

    def __call__(self, history):
        return float(history[-1]) if len(history) else 0.0

    def series(self, values):
        x = np.asarray(values, dtype=np.float64)
        out = np.full(x.size + 1, np.nan)
        out[1:] = x
        return out


class LinearGrowthScheme:
    """h_m = m; unbounded on bounded processes."""

    name = "linear_growth"

    def __call__(self, history):
        return float(len(history))

    def series(self, values):
        out = np.arange(len(values) + 1, dtype=np.float64)
        out[0] = np.nan
        return out


class PatternRecurrenceScheme:
    name = "pattern_recurrence"

    def __call__(self, history):
        from core.predictor import forward_predict

        return forward_predict(history).value

    def series(self, values):
        from core.predictor import OnlinePredictor

        return OnlinePredictor(values).predict_all()


SCHEMES = {
    cls.name: cls
    for cls in (ZeroScheme, SampleMeanScheme, LastValueScheme, LinearGrowthScheme, PatternRecurrenceScheme)
}


def get_scheme(name):
    try:
        return SCHEMES[name]()
    except KeyError:
        raise InputError(f"unknown scheme {name!r}; choose from {sorted(SCHEMES)}") from None


def scheme_series(scheme, values) -> np.ndarray:
    if hasattr(scheme, "series"):
        return np.asarray(scheme.series(values), dtype=np.float64)
    x = np.asarray(values, dtype=np.float64)
    out = np.full(x.size + 1, np.nan)
    for m in range(1, x.size + 1):
        out[m] = float(scheme(x[:m]))
    return out
