"""
Adding-machine counterexample machinery.

A point omega of {0,1}^N (bit 1 is the least significant) is stored as a
lazily sampled bit source; T^n omega is omega + n with carry. A schedule
l_3 < l_4 < ... < l_K defines, for k = 2**a_k + b_k,

  C_k: bits 1..l_k-1 are 1, bit l_k is 0
  D_k: bits 1..l_k-a_k-1 are 1, bit l_k-a_k is 0, bits l_k-a_k+1..l_k-1 are 1
  E_k: bit l_k-a_k is 0, bits l_k-a_k+1..l_k-1 are 1

and f = sum_k 10**-k 1{D_k} + sum_k 2**l_k / 3**a_k 1{C_k}. Truncating the
sums at K makes f a function of the first L = l_K bits, so every statement
about the process is exact on the cycle of 2**L prefixes.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from config import DEFAULT_SLACK, E_HIT_RETRY_EXTRA, ENUMERATION_CAP
from core.errors import (
    BudgetError,
    ConsistencyError,
    EnumerationRangeError,
    InputError,
    SearchError,
    SpecError,
)
from core.schemes import scheme_series
from utils.parallel import map_seeds

logger = logging.getLogger(__name__)

FIRST_K = 3
# Prefixes up to this many bits are handled as int64 arrays.
_INT64_BITS = 62
# Bits are drawn in fixed-size words so the sampled omega does not depend
# on the order in which prefixes are requested.
_WORD_BITS = 32


def ak_bk(k: int) -> Tuple[int, int]:
    """(a, b) with k = 2**a + b and 1 <= b <= 2**a."""
    if k < FIRST_K:
        raise InputError(f"k must be at least {FIRST_K}, got {k}")
    a = (k - 1).bit_length() - 1
    return a, k - (1 << a)


@dataclass(frozen=True)
class OdometerSchedule:
    ls: Tuple[int, ...]
    thresholds: Tuple[int, ...] = field(default=(), compare=False)

    @classmethod
    def parse(cls, text: str) -> "OdometerSchedule":
        try:
            ls = tuple(int(part) for part in str(text).split(",") if part.strip())
        except ValueError:
            raise InputError(f"schedule must be a comma-separated integer list, got {text!r}") from None
        return cls(ls)

    def __str__(self):
        return ",".join(str(l) for l in self.ls)

    @property
    def K(self) -> int:
        return FIRST_K + len(self.ls) - 1

    @property
    def ks(self) -> range:
        return range(FIRST_K, self.K + 1)

    @property
    def L(self) -> int:
        return self.ls[-1] if self.ls else 0

    def l(self, k: int) -> int:
        self.check_k(k)
        return self.ls[k - FIRST_K]

    def a(self, k: int) -> int:
        return ak_bk(k)[0]

    def b(self, k: int) -> int:
        return ak_bk(k)[1]

    def check_k(self, k: int):
        if k not in self.ks:
            raise InputError(f"k={k} outside schedule range {FIRST_K}..{self.K}")

    def truncated(self, k: int) -> "OdometerSchedule":
        self.check_k(k)
        return OdometerSchedule(self.ls[: k - FIRST_K + 1])


@dataclass(frozen=True)
class Violation:
    kind: str
    k: int
    other_k: Optional[int]
    detail: str

    def __str__(self):
        where = f"({self.k},{self.other_k})" if self.other_k is not None else f"({self.k})"
        return f"{self.kind} violation at {where}: {self.detail}"


def validate_schedule(schedule: OdometerSchedule) -> List[Violation]:
    violations = []
    if not schedule.ls:
        return [Violation("empty", FIRST_K, None, "schedule has no entries")]
    for k in schedule.ks:
        l, a = schedule.l(k), schedule.a(k)
        if l - a < 1:
            violations.append(Violation("positivity", k, None, f"l_k - a_k = {l} - {a} < 1"))
    for k in schedule.ks:
        for k2 in schedule.ks:
            if k2 <= k:
                continue
            l, l2, a2 = schedule.l(k), schedule.l(k2), schedule.a(k2)
            if not l < l2 - 2 * a2:
                violations.append(
                    Violation("separation", k, k2, f"l_{k} = {l} >= l_{k2} - 2*a_{k2} = {l2 - 2 * a2}")
                )
    return violations


def _require_valid(schedule: OdometerSchedule):
    violations = validate_schedule(schedule)
    if violations:
        raise SpecError("invalid schedule: " + "; ".join(str(v) for v in violations))


class _BitSource:
    """The bits of one omega, sampled on first read and never changed."""

    def __init__(self, rng, preset: Sequence[int] = ()):
        self._rng = rng
        self._value = 0
        self._length = 0
        for bit in preset:
            if bit not in (0, 1):
                raise InputError(f"bits must be 0 or 1, got {bit!r}")
            self._value |= int(bit) << self._length
            self._length += 1

    @property
    def length(self) -> int:
        return self._length

    def prefix(self, i: int) -> int:
        while self._length < i:
            word = int(self._rng.integers(0, 1 << _WORD_BITS, dtype=np.uint64))
            self._value |= word << self._length
            self._length += _WORD_BITS
        return self._value & ((1 << i) - 1)


@dataclass(frozen=True)
class OdometerState:
    """T^offset omega for the omega held by `source`."""

    source: _BitSource
    offset: int = 0
    extended_to: int = 0

    @classmethod
    def from_seed(cls, seed) -> "OdometerState":
        return cls(_BitSource(np.random.default_rng(seed)))

    @classmethod
    def from_bits(cls, bits: Sequence[int], seed=0) -> "OdometerState":
        bits = list(bits)
        return cls(_BitSource(np.random.default_rng(seed), bits), extended_to=len(bits))

    def prefix(self, i: int) -> int:
        """Integer whose binary digits are the first i bits of this point."""
        if i <= 0:
            return 0
        return (self.source.prefix(i) + self.offset) & ((1 << i) - 1)

    def bit(self, i: int) -> int:
        return (self.prefix(i) >> (i - 1)) & 1

    def bits(self, n: int) -> Tuple[int, ...]:
        p = self.prefix(n)
        return tuple((p >> j) & 1 for j in range(n))


def apply_T(state: OdometerState, n: int) -> OdometerState:
    """T^n: add n with carry, extending the sampled prefix as far as carries go."""
    if n < 0:
        raise InputError(f"T is applied a nonnegative number of times, got {n}")
    if n == 0:
        return state
    offset = state.offset + n
    i = max(state.extended_to, offset.bit_length())
    # Past position i the sum equals omega's own bits once no carry leaves
    # the first i bits.
    while state.source.prefix(i) + offset >= (1 << i):
        i += 1
    return replace(state, offset=offset, extended_to=i)


def _mask(n_bits: int) -> int:
    return (1 << n_bits) - 1


def _c_pattern(l: int) -> Tuple[int, int]:
    return _mask(l), _mask(l - 1)


def _d_pattern(l: int, a: int) -> Tuple[int, int]:
    return _mask(l - 1), _mask(l - 1) ^ (1 << (l - a - 1))


def _e_pattern(l: int, a: int) -> Tuple[int, int]:
    mask = _mask(l - 1) ^ _mask(l - a - 1)
    return mask, mask ^ (1 << (l - a - 1))


def _pattern(set_id: str, l: int, a: int) -> Tuple[int, int]:
    key = set_id.split("_")[0].upper()
    if key == "C":
        return _c_pattern(l)
    if key == "D":
        return _d_pattern(l, a)
    if key == "E":
        return _e_pattern(l, a)
    raise InputError(f"unknown set {set_id!r}; use C, D or E")


def membership(state: OdometerState, set_id: str, k: int, schedule: OdometerSchedule) -> bool:
    l, a = schedule.l(k), schedule.a(k)
    mask, target = _pattern(set_id, l, a)
    return (state.prefix(l) & mask) == target


def f_value(prefix: int, schedule: OdometerSchedule) -> float:
    """f at the point whose first L bits are `prefix` (at most one C and one D fire)."""
    total = 0.0
    for k in schedule.ks:
        l, a = schedule.l(k), schedule.a(k)
        mask, target = _d_pattern(l, a)
        if prefix & mask == target:
            total += 10.0 ** (-k)
        mask, target = _c_pattern(l)
        if prefix & mask == target:
            total += 2.0**l / 3.0**a
    return total


def f_values(prefixes, schedule: OdometerSchedule) -> np.ndarray:
    """Vectorized f over an array of prefix integers."""
    if schedule.L > _INT64_BITS:
        flat = [f_value(int(p), schedule) for p in np.ravel(prefixes)]
        return np.asarray(flat, dtype=np.float64).reshape(np.shape(prefixes))
    P = np.asarray(prefixes, dtype=np.int64)
    out = np.zeros(P.shape, dtype=np.float64)
    for k in schedule.ks:
        l, a = schedule.l(k), schedule.a(k)
        mask, target = _d_pattern(l, a)
        out += np.where((P & mask) == target, 10.0 ** (-k), 0.0)
        mask, target = _c_pattern(l)
        out += np.where((P & mask) == target, 2.0**l / 3.0**a, 0.0)
    return out


def eval_f(state: OdometerState, schedule: OdometerSchedule) -> float:
    return f_value(state.prefix(schedule.L), schedule)


def _orbit_prefixes(omega: int, n: int, L: int):
    if L <= _INT64_BITS:
        return (np.int64(omega) + np.arange(n, dtype=np.int64)) & np.int64(_mask(L))
    return np.asarray([(omega + j) & _mask(L) for j in range(n)], dtype=object)


@dataclass(frozen=True)
class OdometerPath:
    schedule: OdometerSchedule
    seed: object
    values: np.ndarray
    omega: int


def orbit_values(omega: int, n: int, schedule: OdometerSchedule) -> np.ndarray:
    """X_j = f(T^j omega) for j = 0..n-1, omega given by its first L bits."""
    return f_values(_orbit_prefixes(omega, n, schedule.L), schedule)


def sample_odometer_path(schedule: OdometerSchedule, n: int, seed) -> OdometerPath:
    _require_valid(schedule)
    if n < 1:
        raise InputError(f"path length must be positive, got {n}")
    omega = OdometerState.from_seed(seed).prefix(schedule.L)
    return OdometerPath(schedule=schedule, seed=seed, values=orbit_values(omega, n, schedule), omega=omega)


def truncated_mean_v(schedule: OdometerSchedule) -> float:
    """E(v) over k = 3..K: each C_k term contributes 3**-a_k."""
    return math.fsum(3.0 ** (-schedule.a(k)) for k in schedule.ks)


def truncated_mean_u(schedule: OdometerSchedule) -> float:
    """E(u) over k = 3..K; D_k fixes l_k - 1 bits."""
    return math.fsum(10.0 ** (-k) * 2.0 ** (-(schedule.l(k) - 1)) for k in schedule.ks)


def _check_cap(schedule: OdometerSchedule, cap: int):
    if schedule.L > cap:
        raise EnumerationRangeError(f"enumeration over 2**{schedule.L} prefixes exceeds cap 2**{cap}")


def window_conditional_means(schedule: OdometerSchedule, observed: Sequence[float],
                             cap: int = ENUMERATION_CAP) -> np.ndarray:
    """E(X_i | X_0^{i-1}) for i = 0..len(observed) by enumerating all prefixes.

    Survivors are the prefixes whose orbit reproduces the observation so far;
    the law of omega restricted to them stays uniform.
    """
    _require_valid(schedule)
    _check_cap(schedule, cap)
    mask = np.int64(_mask(schedule.L))
    survivors = np.arange(1 << schedule.L, dtype=np.int64)
    out = np.empty(len(observed) + 1)
    for i, x in enumerate(observed):
        values = f_values((survivors + i) & mask, schedule)
        out[i] = values.mean()
        survivors = survivors[values == float(x)]
        if survivors.size == 0:
            raise ConsistencyError(f"no prefix reproduces the observation up to time {i}")
    n = len(observed)
    out[n] = f_values((survivors + n) & mask, schedule).mean()
    return out


def brute_force_conditional_mean(schedule: OdometerSchedule, observed: Sequence[float],
                                 m: Optional[int] = None, cap: int = ENUMERATION_CAP) -> float:
    """E(X_m | X_0^{m-1}) for the observed window of length m."""
    if m is not None and m != len(observed):
        raise InputError(f"horizon {m} does not match window length {len(observed)}")
    return float(window_conditional_means(schedule, observed, cap)[-1])


def cycle_filter_mean(schedule: OdometerSchedule, observed: Sequence[float], cap: int = 12) -> float:
    """The same conditional mean from forward filtering on the 2**L-state cycle."""
    from scipy import sparse

    from core.processes import hidden_chain_filter

    _require_valid(schedule)
    _check_cap(schedule, cap)
    size = 1 << schedule.L
    states = np.arange(size)
    cycle = sparse.csr_matrix((np.ones(size), (states, (states + 1) % size)), shape=(size, size))
    emit = f_values(states, schedule)
    initial = np.full(size, 1.0 / size)
    return float(hidden_chain_filter(cycle, initial, emit, observed)[-1])


def special_time_mean(schedule: OdometerSchedule, k: int) -> float:
    """Closed-form window conditional mean at the special time after a D_k hit.

    The window fixes bits 1..l_k-1 (all ones at that time) and leaves the
    higher bits uniform, so C_j fires with probability 2**-(l_j - l_k + 1)
    and D_j (j > k) with probability 2**-(l_j - l_k).
    """
    l_k = schedule.l(k)
    v_part = math.fsum(2.0 ** (l_k - 1) / 3.0 ** schedule.a(j) for j in schedule.ks if j >= k)
    u_part = math.fsum(10.0 ** (-j) * 2.0 ** (-(schedule.l(j) - l_k)) for j in schedule.ks if j > k)
    return v_part + u_part


def locate_d_hit(state: OdometerState, k: int, schedule: OdometerSchedule) -> int:
    """The i_0 < 2**(l_k - a_k - 1) with T^{i_0} omega in D_k, for omega in E_k."""
    if not membership(state, "E", k, schedule):
        raise InputError(f"point is not in E_{k}")
    l, a = schedule.l(k), schedule.a(k)
    low_bits = l - a - 1
    return _mask(low_bits) - state.prefix(low_bits)


def divergence_bound(a: int) -> float:
    return (4.0 / 3.0) ** a / 6.0


@dataclass(frozen=True)
class DivergenceCertificate:
    k: int
    a: int
    seed: object
    attempts: int
    i0: int
    special_time: int
    horizon: int
    window_mean: float
    closed_form_mean: float
    full_past_value: float
    reference: str
    special_term: float
    cesaro_value: float
    bound: float
    slack: float
    passed: bool
    # Special-time term rebuilt from the closed-form mean; the Cesaro sum never falls below it.
    exact_bound: float = 0.0
    exact_passed: bool = False


def divergence_certificate(schedule: OdometerSchedule, k: int, seed, slack: float = DEFAULT_SLACK,
                           scheme=None, retry_budget: Optional[int] = None,
                           cap: int = ENUMERATION_CAP) -> DivergenceCertificate:
    """Per-realization witness that window and reference predictions differ.

    Draws omega until it lands in E_k, takes N = 2**(l_k - a_k) and computes
    (1/N) sum_{n=1..N} |E(X_n | X_0^{n-1}) - r_n| with the window means from
    the enumeration oracle. The reference r_n is X_n itself (the full past
    determines it on the finite cycle) or, with a scheme, h_n(X_0^{n-1}) on
    the schedule truncated at k.
    """
    schedule.check_k(k)
    _require_valid(schedule)
    if scheme is not None:
        schedule = schedule.truncated(k)
    _check_cap(schedule, cap)
    l, a = schedule.l(k), schedule.a(k)
    budget = retry_budget if retry_budget is not None else 1 << (a + E_HIT_RETRY_EXTRA)

    state = None
    attempt = 0
    for attempt in range(1, budget + 1):
        candidate = OdometerState.from_seed([int(seed), attempt])
        if membership(candidate, "E", k, schedule):
            state = candidate
            break
    if state is None:
        raise SearchError(f"no point in E_{k} after {budget} draws")

    i0 = locate_d_hit(state, k, schedule)
    half = 1 << (l - a - 1)
    special = i0 + half
    N = 2 * half
    omega = state.prefix(schedule.L)
    values = orbit_values(omega, N + 1, schedule)
    window = window_conditional_means(schedule, values[:N], cap)

    if scheme is None:
        reference = values
        reference_name = "full_past"
    else:
        reference = scheme_series(scheme, values[:N])
        reference_name = getattr(scheme, "name", type(scheme).__name__)
    diffs = np.abs(window[1 : N + 1] - reference[1 : N + 1])
    cesaro = math.fsum(diffs) / N
    bound = divergence_bound(a)
    closed_form = special_time_mean(schedule, k)
    exact_bound = abs(closed_form - float(reference[special])) / N
    cert = DivergenceCertificate(
        k=k,
        a=a,
        seed=seed,
        attempts=attempt,
        i0=i0,
        special_time=special,
        horizon=N,
        window_mean=float(window[special]),
        closed_form_mean=closed_form,
        full_past_value=float(values[special]),
        reference=reference_name,
        special_term=float(diffs[special - 1]) / N,
        cesaro_value=cesaro,
        bound=bound,
        slack=slack,
        passed=cesaro >= bound * (1.0 - slack),
        exact_bound=exact_bound,
        # Enumerated and closed-form means agree to rounding of the larger one.
        exact_passed=cesaro + 1e-12 * closed_form / N >= exact_bound,
    )
    logger.info(
        "certificate k=%d a=%d: i0=%d m=%d N=%d value=%.6g bound=%.6g exact=%.6g passed=%s",
        k, a, i0, special, N, cesaro, bound, exact_bound, cert.passed,
    )
    return cert


@dataclass(frozen=True)
class AdversaryParams:
    k_max: int = 5
    n_seeds: int = 200
    horizon: int = 4096
    l_cap: int = 4096
    seed: int = 0
    workers: Optional[int] = None


def _last_violations(scheme, schedule: Optional[OdometerSchedule], k: int,
                     params: AdversaryParams) -> np.ndarray:
    m = np.arange(1, params.horizon + 1)

    def last_violation(s):
        if schedule is None:
            values = np.zeros(params.horizon)
        else:
            omega = OdometerState.from_seed([params.seed, k, s]).prefix(schedule.L)
            values = orbit_values(omega, params.horizon, schedule)
        h = scheme_series(scheme, values)[1:]
        bad = np.flatnonzero(np.abs(h) > m / 10.0)
        return int(m[bad[-1]]) if bad.size else 0

    return np.asarray(map_seeds(last_violation, range(params.n_seeds), params.workers), dtype=np.int64)


def estimate_threshold(scheme, schedule: Optional[OdometerSchedule], k: int,
                       params: AdversaryParams) -> int:
    """Smallest N such that |h_m| <= m/10 for all m >= N on a fraction >= 1 - 2**-k of paths.

    Paths are those of the bounded process built from `schedule` (the stages
    before k); the fraction is a Monte Carlo estimate over n_seeds paths
    observed up to the horizon.
    """
    lasts = np.sort(_last_violations(scheme, schedule, k, params))
    rank = math.ceil((1.0 - 2.0 ** (-k)) * params.n_seeds) - 1
    threshold = int(lasts[min(rank, lasts.size - 1)]) + 1
    if threshold > params.horizon // 2:
        raise BudgetError(
            f"stage {k}: |h_m| <= m/10 not settled within horizon {params.horizon} (estimate {threshold})"
        )
    return threshold


def build_adversarial_schedule(scheme, params: AdversaryParams = AdversaryParams()) -> OdometerSchedule:
    """Choose l_3 < l_4 < ... against `scheme`, one stage at a time.

    Stage k estimates N_k on the process built from l_3..l_{k-1}, then takes
    the smallest l_k with 2**(l_k - a_k) > 10 N_k, l_k - a_k > 10 l_{k-1}
    and l_{k-1} < l_k - 2 a_k.
    """
    if params.k_max < FIRST_K:
        raise InputError(f"k_max must be at least {FIRST_K}")
    ls: List[int] = []
    thresholds: List[int] = []
    for k in range(FIRST_K, params.k_max + 1):
        a = ak_bk(k)[0]
        current = OdometerSchedule(tuple(ls)) if ls else None
        n_k = estimate_threshold(scheme, current, k, params)
        prev = ls[-1] if ls else 0
        gap = max((10 * n_k).bit_length(), 10 * prev + 1, 1)
        l_k = max(a + gap, prev + 2 * a + 1)
        if l_k > params.l_cap:
            raise BudgetError(f"stage {k}: l_k = {l_k} exceeds cap {params.l_cap}")
        ls.append(l_k)
        thresholds.append(n_k)
        logger.info("adversary stage k=%d: N_k=%d l_k=%d", k, n_k, l_k)
    schedule = OdometerSchedule(tuple(ls), thresholds=tuple(thresholds))
    _require_valid(schedule)
    return schedule
