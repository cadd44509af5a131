"""
Stationary ergodic process generators and their exact conditional-mean oracles.

Specs are pydantic models tagged by `kind`; parse_spec() is the validating
entry point and turns validation failures into SpecError.
"""

import logging
from dataclasses import dataclass
from typing import Annotated, List, Literal, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator
from scipy import sparse
from scipy.signal import lfilter

from config import ENUMERATION_CAP, PROCESS_PRESETS
from core.errors import (
    CapabilityError,
    ConsistencyError,
    DomainError,
    InputError,
    SpecError,
    StructureError,
)

logger = logging.getLogger(__name__)

PROB_TOL = 1e-12


def _check_probability_vector(probs, what):
    arr = np.asarray(probs, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{what} must be a nonempty vector")
    if np.any(arr < 0):
        raise ValueError(f"{what} has negative entries")
    if abs(arr.sum() - 1.0) > PROB_TOL:
        raise ValueError(f"{what} sums to {arr.sum()!r}, not 1")
    return arr


def _is_primitive(matrix: np.ndarray) -> bool:
    """Irreducible and aperiodic: some power of the support is all positive.

    Wielandt: for an n-state chain the power (n-1)**2 + 1 suffices.
    """
    n = matrix.shape[0]
    support = (matrix > 0).astype(np.int64)
    target = (n - 1) ** 2 + 1
    result = np.eye(n, dtype=np.int64)
    base = support
    while target:
        if target & 1:
            result = np.minimum(result @ base, 1)
        base = np.minimum(base @ base, 1)
        target >>= 1
    return bool(np.all(result > 0))


def stationary_distribution(matrix) -> np.ndarray:
    P = np.asarray(matrix, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] == 0:
        raise StructureError("transition matrix must be square and nonempty")
    if not _is_primitive(P):
        raise StructureError("transition matrix is reducible or periodic")
    n = P.shape[0]
    system = np.vstack([P.T - np.eye(n), np.ones((1, n))])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    pi, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def time_reversed_matrix(matrix) -> np.ndarray:
    """P~(i, j) = pi_j P(j, i) / pi_i, the law of the chain run backward."""
    P = np.asarray(matrix, dtype=np.float64)
    pi = stationary_distribution(P)
    return (P.T * pi[None, :]) / pi[:, None]


class IidSpec(BaseModel):
    kind: Literal["iid"] = "iid"
    values: List[float]
    probs: List[float]

    @model_validator(mode="after")
    def _check(self):
        if len(self.values) != len(self.probs):
            raise ValueError("values and probs differ in length")
        _check_probability_vector(self.probs, "probs")
        return self

    @property
    def mean(self) -> float:
        return float(np.dot(self.values, self.probs))


class MarkovSpec(BaseModel):
    kind: Literal["markov"] = "markov"
    values: List[float]
    matrix: List[List[float]]

    @model_validator(mode="after")
    def _check(self):
        n = len(self.values)
        if len(self.matrix) != n or any(len(row) != n for row in self.matrix):
            raise ValueError("matrix must be square with one row per state value")
        if len(set(self.values)) != n:
            raise ValueError("state values must be distinct")
        for i, row in enumerate(self.matrix):
            _check_probability_vector(row, f"row {i}")
        stationary_distribution(self.matrix)
        return self

    @property
    def P(self) -> np.ndarray:
        return np.asarray(self.matrix, dtype=np.float64)

    @property
    def stationary(self) -> np.ndarray:
        return stationary_distribution(self.matrix)

    def state_index(self, value: float) -> int:
        try:
            return self.values.index(float(value))
        except ValueError:
            raise DomainError(f"value {value!r} not in state alphabet {self.values}") from None


class FunctionOfMarkovSpec(BaseModel):
    kind: Literal["function_of_markov"] = "function_of_markov"
    chain: MarkovSpec
    state: int = Field(0, description="index of the distinguished hidden state s")

    @field_validator("state")
    @classmethod
    def _state_nonnegative(cls, v):
        if v < 0:
            raise ValueError("state index must be nonnegative")
        return v

    @model_validator(mode="after")
    def _check(self):
        if self.state >= len(self.chain.values):
            raise ValueError(f"state index {self.state} outside the hidden chain")
        return self

    @property
    def emission(self) -> np.ndarray:
        out = np.zeros(len(self.chain.values))
        out[self.state] = 1.0
        return out


class Ar1Spec(BaseModel):
    kind: Literal["ar1"] = "ar1"
    a: float
    sigma: float = 1.0

    @model_validator(mode="after")
    def _check(self):
        if not abs(self.a) < 1:
            raise ValueError("ar1 coefficient must satisfy |a| < 1")
        if not self.sigma > 0:
            raise ValueError("ar1 noise standard deviation must be positive")
        return self


class OdometerSpec(BaseModel):
    kind: Literal["odometer"] = "odometer"
    schedule: List[int]

    @model_validator(mode="after")
    def _check(self):
        from core.odometer import OdometerSchedule, validate_schedule

        violations = validate_schedule(OdometerSchedule(tuple(self.schedule)))
        if violations:
            raise ValueError("; ".join(str(v) for v in violations))
        return self

    def to_schedule(self):
        from core.odometer import OdometerSchedule

        return OdometerSchedule(tuple(self.schedule))


ProcessSpec = Annotated[
    Union[IidSpec, MarkovSpec, FunctionOfMarkovSpec, Ar1Spec, OdometerSpec],
    Field(discriminator="kind"),
]


class _SpecEnvelope(BaseModel):
    spec: ProcessSpec


def parse_spec(data) -> BaseModel:
    if isinstance(data, BaseModel):
        return data
    try:
        return _SpecEnvelope(spec=data).spec
    except ValidationError as e:
        for err in e.errors():
            cause = err.get("ctx", {}).get("error")
            if isinstance(cause, StructureError):
                raise StructureError(str(cause)) from e
        raise SpecError(f"invalid process spec: {e}") from e


def spec_from_config(process: str, schedule=None) -> BaseModel:
    """Spec for a named preset; an odometer preset takes `schedule` when given."""
    if process not in PROCESS_PRESETS:
        raise InputError(f"unknown process {process!r}; choose from {sorted(PROCESS_PRESETS)}")
    data = dict(PROCESS_PRESETS[process])
    if data["kind"] == "odometer" and schedule is not None:
        data["schedule"] = list(schedule)
    return parse_spec(data)


@dataclass(frozen=True)
class ProcessPath:
    spec: BaseModel
    seed: int
    values: np.ndarray
    hidden: Optional[np.ndarray] = None
    omega: Optional[int] = None

    def __len__(self):
        return int(self.values.size)


def _sample_chain(P: np.ndarray, pi: np.ndarray, n: int, rng) -> np.ndarray:
    cumulative = np.cumsum(P, axis=1)
    cumulative[:, -1] = 1.0
    u = rng.random(n)
    states = np.empty(n, dtype=np.int64)
    states[0] = min(int(np.searchsorted(np.cumsum(pi), u[0], side="right")), P.shape[0] - 1)
    rows = [row.tolist() for row in cumulative]
    s = int(states[0])
    for i in range(1, n):
        row = rows[s]
        x = u[i]
        j = 0
        while x >= row[j]:
            j += 1
        s = j
        states[i] = s
    return states


def sample_path(spec, n: int, seed: int) -> ProcessPath:
    spec = parse_spec(spec)
    if n < 1:
        raise InputError(f"path length must be positive, got {n}")
    rng = np.random.default_rng(seed)
    if isinstance(spec, IidSpec):
        idx = rng.choice(len(spec.values), size=n, p=np.asarray(spec.probs))
        values = np.asarray(spec.values, dtype=np.float64)[idx]
        return ProcessPath(spec=spec, seed=seed, values=values)
    if isinstance(spec, MarkovSpec):
        states = _sample_chain(spec.P, spec.stationary, n, rng)
        values = np.asarray(spec.values, dtype=np.float64)[states]
        return ProcessPath(spec=spec, seed=seed, values=values, hidden=states)
    if isinstance(spec, FunctionOfMarkovSpec):
        states = _sample_chain(spec.chain.P, spec.chain.stationary, n, rng)
        values = (states == spec.state).astype(np.float64)
        return ProcessPath(spec=spec, seed=seed, values=values, hidden=states)
    if isinstance(spec, Ar1Spec):
        x0 = rng.normal(0.0, spec.sigma / np.sqrt(1.0 - spec.a**2))
        noise = rng.normal(0.0, spec.sigma, size=n - 1)
        values = np.empty(n)
        values[0] = x0
        if n > 1:
            values[1:], _ = lfilter([1.0], [1.0, -spec.a], noise, zi=[spec.a * x0])
        return ProcessPath(spec=spec, seed=seed, values=values)
    if isinstance(spec, OdometerSpec):
        from core.odometer import sample_odometer_path

        path = sample_odometer_path(spec.to_schedule(), n, seed)
        return ProcessPath(spec=spec, seed=seed, values=path.values, omega=path.omega)
    raise SpecError(f"unsupported spec kind {getattr(spec, 'kind', spec)!r}")


def backward_accessor(spec, seed: int):
    """Callable m -> X_{-m} drawing a stationary past lazily (iid, markov, ar1)."""
    spec = parse_spec(spec)
    rng = np.random.default_rng(seed)
    past = []

    if isinstance(spec, IidSpec):
        values = np.asarray(spec.values, dtype=np.float64)
        probs = np.asarray(spec.probs)

        def step(_prev):
            return float(values[rng.choice(values.size, p=probs)])

    elif isinstance(spec, MarkovSpec):
        reverse = time_reversed_matrix(spec.P)
        pi = spec.stationary
        states = []

        def step(_prev):
            row = pi if not states else reverse[states[-1]]
            s = int(rng.choice(row.size, p=row / row.sum()))
            states.append(s)
            return float(spec.values[s])

    elif isinstance(spec, Ar1Spec):
        # A stationary Gaussian AR(1) is time reversible.
        stationary_sd = spec.sigma / np.sqrt(1.0 - spec.a**2)

        def step(prev):
            if prev is None:
                return float(rng.normal(0.0, stationary_sd))
            return float(spec.a * prev + rng.normal(0.0, spec.sigma))

    else:
        raise CapabilityError(f"no backward generator for {spec.kind} specs")

    def draw(m: int) -> float:
        while len(past) < m:
            past.append(step(past[-1] if past else None))
        return past[m - 1]

    return draw


def _check_alphabet(spec: MarkovSpec, history) -> np.ndarray:
    return np.asarray([spec.state_index(x) for x in history], dtype=np.int64)


def markov_conditional_mean(spec, history: Sequence[float]) -> float:
    spec = parse_spec(spec)
    if isinstance(spec, IidSpec):
        for x in history:
            if float(x) not in spec.values:
                raise DomainError(f"value {x!r} not in alphabet {spec.values}")
        return spec.mean
    if not isinstance(spec, MarkovSpec):
        raise CapabilityError(f"markov_conditional_mean does not handle {spec.kind} specs")
    if len(history) == 0:
        return float(np.dot(spec.stationary, spec.values))
    states = _check_alphabet(spec, history)
    return float(spec.P[states[-1]] @ np.asarray(spec.values))


def hidden_chain_filter(transition, initial, emit_values, observations) -> np.ndarray:
    """Predictive means E(X_i | X_0^{i-1}) for i = 0..len(observations).

    The hidden chain has the given transition (dense array or scipy sparse
    matrix) and initial law; X_i = emit_values[M_i] deterministically.
    Entry 0 is the prior mean. A zero-probability observation raises
    ConsistencyError instead of being renormalized away.
    """
    emit = np.asarray(emit_values, dtype=np.float64)
    alpha = np.asarray(initial, dtype=np.float64).copy()
    PT = transition.T.tocsr() if sparse.issparse(transition) else np.asarray(transition).T
    out = np.empty(len(observations) + 1)
    for i, x in enumerate(observations):
        out[i] = float(alpha @ emit)
        alpha = np.where(emit == float(x), alpha, 0.0)
        total = alpha.sum()
        if total <= 0.0:
            raise ConsistencyError(f"observation {x!r} at position {i} has probability zero")
        alpha = PT @ (alpha / total)
    out[len(observations)] = float(alpha @ emit)
    return out


def hmm_filter_conditional_mean(spec, history: Sequence[float]) -> float:
    spec = parse_spec(spec)
    if not isinstance(spec, FunctionOfMarkovSpec):
        raise CapabilityError("hmm filtering needs a function_of_markov spec")
    chain = spec.chain
    return float(hidden_chain_filter(chain.P, chain.stationary, spec.emission, history)[-1])


def brute_force_hidden_mean(spec, history: Sequence[float]) -> float:
    """E(X_n | X_0^{n-1}) by summing over every hidden path of length n + 1."""
    spec = parse_spec(spec)
    if not isinstance(spec, FunctionOfMarkovSpec):
        raise CapabilityError("hidden-path enumeration needs a function_of_markov spec")
    P = spec.chain.P
    pi = spec.chain.stationary
    emit = spec.emission
    next_means = P @ emit
    if len(history) == 0:
        return float(pi @ emit)
    # Hidden paths that contradict an observation have probability zero, so
    # only states emitting the observed value are enumerated at each step.
    allowed = [np.flatnonzero(emit == float(x)) for x in history]
    if any(choices.size == 0 for choices in allowed):
        raise ConsistencyError("history has probability zero")
    grids = np.meshgrid(*allowed, indexing="ij")
    paths = np.stack([g.ravel() for g in grids], axis=1)
    prob = pi[paths[:, 0]]
    for i in range(1, paths.shape[1]):
        prob = prob * P[paths[:, i - 1], paths[:, i]]
    evidence = float(np.sum(prob))
    weighted = float(np.dot(prob, next_means[paths[:, -1]]))
    if evidence <= 0.0:
        raise ConsistencyError("history has probability zero")
    return weighted / evidence


def ar1_conditional_mean(spec, history: Sequence[float]) -> float:
    spec = parse_spec(spec)
    if not isinstance(spec, Ar1Spec):
        raise CapabilityError("ar1_conditional_mean needs an ar1 spec")
    if len(history) == 0:
        return 0.0
    return spec.a * float(history[-1])


def conditional_mean_series(spec, values: Sequence[float], enumeration_cap: int = ENUMERATION_CAP) -> np.ndarray:
    """Array whose entry i is E(X_i | X_0^{i-1}) for i = 1..n-1 (entry 0 is NaN)."""
    spec = parse_spec(spec)
    x = np.asarray(values, dtype=np.float64)
    out = np.full(x.size, np.nan)
    if x.size < 2:
        return out
    if isinstance(spec, IidSpec):
        out[1:] = spec.mean
    elif isinstance(spec, MarkovSpec):
        states = _check_alphabet(spec, x[:-1])
        row_means = spec.P @ np.asarray(spec.values)
        out[1:] = row_means[states]
    elif isinstance(spec, FunctionOfMarkovSpec):
        chain = spec.chain
        out[1:] = hidden_chain_filter(chain.P, chain.stationary, spec.emission, x[:-1])[1:]
    elif isinstance(spec, Ar1Spec):
        out[1:] = spec.a * x[:-1]
    elif isinstance(spec, OdometerSpec):
        from core.odometer import window_conditional_means

        out[1:] = window_conditional_means(spec.to_schedule(), x[:-1], enumeration_cap)[1:]
    else:
        raise CapabilityError(f"no conditional-mean oracle for {spec.kind} specs")
    return out
