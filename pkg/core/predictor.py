"""
Pattern-recurrence estimator.

For a window X_{-t}, ..., X_{-1} (the last array element is X_{-1}):
  lambda_0 = 1
  tau_k    = smallest offset at which the level-k quantization of the
             last lambda_{k-1} samples occurred before
  lambda_k = lambda_{k-1} + tau_k
kappa_t is the last k with lambda_k <= t, and the estimate is the mean of
X_{-tau_1}, ..., X_{-tau_kappa}. Applied to X_0, ..., X_{t-1} the same
procedure predicts X_t.
"""

import logging
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from config import DEPTH_CAP, MAX_LEVEL
from core.errors import DepthError, InputError
from core.quantizer import quantize_array

logger = logging.getLogger(__name__)

# Upper bound on the candidate-by-position block built while filtering.
_BLOCK_CELLS = 1 << 22


@dataclass(frozen=True)
class RecurrenceTrace:
    taus: Tuple[int, ...]
    lambdas: Tuple[int, ...]
    kappa: int
    picked_values: Tuple[float, ...]
    capped: bool = False


@dataclass(frozen=True)
class Prediction:
    value: float
    trace: RecurrenceTrace
    fallback_used: bool


def _filter_offsets(q, t, lam, offsets):
    """Keep the offsets o at which q[t-lam-o : t-o] equals q[t-lam : t].

    Positions are checked from the right edge backward in growing blocks, so
    the candidate set usually collapses after the first few comparisons.
    """
    j0 = 0
    block = 8
    while offsets.size and j0 < lam:
        width = min(block, lam - j0, max(1, _BLOCK_CELLS // offsets.size))
        ref_pos = (t - 1 - j0) - np.arange(width)
        idx = ref_pos[None, :] - offsets[:, None]
        keep = np.all(q[idx] == q[ref_pos][None, :], axis=1)
        offsets = offsets[keep]
        j0 += width
        block *= 2
    return offsets


def _scan_offsets(q: np.ndarray, t: int, lam: int, start: int) -> Optional[int]:
    """Smallest offset >= start at which the last lam entries of q[:t] recur.

    Offsets are tried from the most recent backward in growing blocks, so a
    short recurrence is found without touching the rest of the history.
    """
    hi = t - lam
    lo = max(start, 1)
    block = 64
    while lo <= hi:
        stop = min(hi, lo + block - 1)
        found = _filter_offsets(q, t, lam, np.arange(lo, stop + 1))
        if found.size:
            return int(found[0])
        lo = stop + 1
        block *= 2
    return None


class _WindowIndex:
    """End positions of every window of fixed lengths in one quantized series.

    Any recurrence of a pattern of length lam also repeats its last w <= lam
    entries, so the positions listed under that suffix are the only
    candidates left to verify. Windows are keyed by hash; a collision only
    adds a candidate that fails verification.
    """

    WIDTHS = (1, 2, 4, 8, 16, 32, 64)

    def __init__(self, q: np.ndarray):
        self.q = q
        self._ends = {}

    def _table(self, w: int):
        if w not in self._ends:
            table = {}
            raw = self.q.tobytes()
            size = self.q.itemsize
            for e in range(w, self.q.size + 1):
                table.setdefault(hash(raw[(e - w) * size : e * size]), []).append(e)
            self._ends[w] = table
        return self._ends[w]

    def first_offset(self, t: int, lam: int, start: int) -> Optional[int]:
        w = max(width for width in self.WIDTHS if width <= lam)
        q = self.q
        ends = self._table(w).get(hash(q[t - w : t].tobytes()), ())
        # Candidate end e means offset t - e; it needs e - lam >= 0.
        hi = bisect_right(ends, t - max(start, 1))
        lo_limit = bisect_left(ends, lam)
        chunk = 16
        while hi > lo_limit:
            lo = max(lo_limit, hi - chunk)
            offsets = t - np.asarray(ends[lo:hi][::-1], dtype=np.int64)
            found = _filter_offsets(q, t, lam, offsets)
            if found.size:
                return int(found[0])
            hi = lo
            chunk *= 4
        return None


def _search(first_offset: Callable[[int, int, int], Optional[int]], values: np.ndarray, t: int,
            max_level: int = MAX_LEVEL) -> RecurrenceTrace:
    """Run the recursion on values[:t]; first_offset(k, lam, start) finds tau_k.

    A level-k match also matches at level k-1 on the shorter pattern, so the
    search at level k starts from tau_{k-1}.
    """
    taus = []
    lambdas = [1]
    picked = []
    lam = 1
    start = 1
    capped = False
    for k in range(1, max_level + 2):
        if t - lam < 1:
            break
        if k > max_level:
            capped = True
            break
        tau = first_offset(k, lam, start)
        if tau is None:
            break
        taus.append(tau)
        lam += tau
        lambdas.append(lam)
        picked.append(float(values[t - tau]))
        start = tau
    return RecurrenceTrace(
        taus=tuple(taus),
        lambdas=tuple(lambdas),
        kappa=len(taus),
        picked_values=tuple(picked),
        capped=capped,
    )


def _as_window(window) -> np.ndarray:
    arr = np.asarray(window, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise InputError("window must be a nonempty one-dimensional sequence")
    return arr


def compute_recurrence_trace(window: Sequence[float]) -> RecurrenceTrace:
    values = _as_window(window)
    t = values.size

    def first_offset(k, lam, start):
        return _scan_offsets(quantize_array(values, k), t, lam, start)

    return _search(first_offset, values, t)


def _prediction(trace: RecurrenceTrace) -> Prediction:
    if trace.kappa == 0:
        return Prediction(value=0.0, trace=trace, fallback_used=True)
    return Prediction(
        value=float(np.mean(trace.picked_values)),
        trace=trace,
        fallback_used=False,
    )


def backward_estimate(window: Sequence[float]) -> Prediction:
    return _prediction(compute_recurrence_trace(window))


def forward_predict(history: Sequence[float]) -> Prediction:
    """Prediction of X_t from X_0, ..., X_{t-1}.

    The shift re-indexing is the identity on a finite array, so this is the
    backward estimate of the history read as X_{-t}, ..., X_{-1}.
    """
    return backward_estimate(history)


class OnlinePredictor:
    """Forward predictions along one series with per-level quantizations cached.

    Quantization is pointwise and the window index only hands back windows
    ending before t, so indexing the whole series once never uses future
    samples.
    """

    def __init__(self, values: Sequence[float], max_level: int = MAX_LEVEL):
        self.values = _as_window(values)
        self.max_level = max_level
        self._indexes = {}

    def _index(self, k) -> _WindowIndex:
        if k not in self._indexes:
            self._indexes[k] = _WindowIndex(quantize_array(self.values, k))
        return self._indexes[k]

    def predict(self, t: int) -> Prediction:
        """forward_predict(values[:t])."""
        if not 1 <= t <= self.values.size:
            raise InputError(f"history length {t} outside 1..{self.values.size}")
        def first_offset(k, lam, start):
            return self._index(k).first_offset(t, lam, start)

        return _prediction(_search(first_offset, self.values, t, self.max_level))

    def predict_all(self) -> np.ndarray:
        """Array whose entry i is the prediction of X_i from X_0^{i-1}; entry 0 is NaN."""
        out = np.full(self.values.size + 1, np.nan)
        for t in range(1, self.values.size + 1):
            out[t] = self.predict(t).value
        return out


class PastAccessor:
    """Cached X_{-1}, X_{-2}, ... drawn on demand from `draw(m)` (m >= 1)."""

    def __init__(self, draw: Callable[[int], float], depth_cap: int = DEPTH_CAP):
        self._draw = draw
        self.depth_cap = depth_cap
        self._past = []

    def ensure(self, depth: int):
        if depth > self.depth_cap:
            raise DepthError(f"past depth {depth} exceeds cap {self.depth_cap}")
        while len(self._past) < depth:
            self._past.append(float(self._draw(len(self._past) + 1)))

    def reversed_past(self, depth: int) -> np.ndarray:
        """Array r with r[m-1] = X_{-m} for m = 1..depth."""
        self.ensure(depth)
        return np.asarray(self._past[:depth], dtype=np.float64)

    def __call__(self, m: int) -> float:
        self.ensure(m)
        return self._past[m - 1]


def r_k_infinite(path, k: int, depth_cap: Optional[int] = None) -> float:
    """(1/k) * sum_{j<=k} X_{-tau_j} using as much past as the recursion needs."""
    if k < 1:
        raise InputError(f"k must be positive, got {k}")
    if k > MAX_LEVEL:
        raise InputError(f"k above level cap {MAX_LEVEL}")
    accessor = path if isinstance(path, PastAccessor) else PastAccessor(path)
    if depth_cap is not None:
        accessor.depth_cap = depth_cap
    lam = 1
    picked = []
    for level in range(1, k + 1):
        depth = max(2 * lam, 64)
        tau = None
        while tau is None:
            depth = min(depth, accessor.depth_cap)
            # Oldest sample first, so the window ends at X_{-1}.
            window = accessor.reversed_past(depth)[::-1].copy()
            q = quantize_array(window, level)
            tau = _scan_offsets(q, depth, lam, 1)
            if tau is None:
                if depth >= accessor.depth_cap:
                    raise DepthError(
                        f"no recurrence at level {level} within depth cap {accessor.depth_cap}"
                    )
                depth *= 2
        picked.append(accessor(tau))
        lam += tau
        logger.debug("r_k_infinite level %d: tau=%d lambda=%d", level, tau, lam)
    return float(np.mean(picked))
