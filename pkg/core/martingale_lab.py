"""
Martingale-difference lab: running averages of explicitly centered
differences Z_n and Monte Carlo estimates of E(sup_n |(1/n) sum Z_i|^p).
"""

import logging
import math
from dataclasses import dataclass
from typing import Literal, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ValidationError, model_validator

from config import (
    FLOAT_FORMAT,
    LLOGL_LEVEL_CYCLE,
    LLOGL_MAX_EXPONENT,
    PARETO_SHAPE,
    trajectory_dtype,
)
from core.errors import InputError, ReportIOError, SpecError
from core.harness import cesaro_grid, resolve_output_path
from core.quantizer import quantize_array
from utils.parallel import map_seeds

logger = logging.getLogger(__name__)

MIN_N = 100
GROWTH_TOLERANCE = 0.05
LP_GENERATORS = ("coin", "pareto", "zero", "volatility_switch")
GENERATORS = LP_GENERATORS + ("quantized_llogl",)


class MartingaleSpec(BaseModel):
    """Either an L^p-bounded difference generator or the quantized L log L variant."""

    variant: Literal["lp_bounded", "quantized_llogl"] = "lp_bounded"
    generator: Literal["coin", "pareto", "zero", "volatility_switch"] = "coin"
    p: float = 2.0
    # Lomax shape of the pareto generator; None picks one from p.
    shape: Optional[float] = None
    max_exponent: int = LLOGL_MAX_EXPONENT
    level_cycle: int = LLOGL_LEVEL_CYCLE

    @model_validator(mode="after")
    def _check(self):
        if self.variant == "lp_bounded":
            if not 1.0 < self.p < math.inf:
                raise ValueError("lp_bounded needs 1 < p < inf")
            if self.generator == "pareto" and not self.p < self.pareto_shape:
                raise ValueError(
                    f"pareto differences have no moment of order {self.p} >= shape {self.pareto_shape}"
                )
        if self.pareto_shape <= 1.0:
            raise ValueError("pareto shape must exceed 1 for centered differences")
        if not 1 <= self.max_exponent <= 50:
            raise ValueError("max_exponent must be in 1..50")
        if self.level_cycle < 1:
            raise ValueError("level_cycle must be positive")
        return self

    @property
    def pareto_shape(self) -> float:
        """Explicit shape, else one with a finite p-th moment and, for p < 2, infinite variance."""
        if self.shape is not None:
            return self.shape
        if self.p < 2.0:
            return (self.p + 2.0) / 2.0
        return max(PARETO_SHAPE, self.p + 0.5)

    @property
    def name(self) -> str:
        return self.generator if self.variant == "lp_bounded" else self.variant

    @property
    def bound(self) -> Optional[float]:
        """Almost-sure bound on |Z_n|, when there is one."""
        if self.variant != "lp_bounded":
            return None
        return {"coin": 1.0, "zero": 0.0, "volatility_switch": 1.5}.get(self.generator)


def martingale_spec(generator: str, **fields) -> MartingaleSpec:
    if generator not in GENERATORS:
        raise InputError(f"unknown generator {generator!r}; choose from {list(GENERATORS)}")
    try:
        if generator == "quantized_llogl":
            return MartingaleSpec(variant="quantized_llogl", **fields)
        return MartingaleSpec(variant="lp_bounded", generator=generator, **fields)
    except ValidationError as e:
        raise SpecError(f"invalid martingale spec: {e}") from e


def llogl_exponent_law(max_exponent: int = LLOGL_MAX_EXPONENT) -> Tuple[np.ndarray, np.ndarray]:
    """Support 1..max_exponent and P(J = j) proportional to 2**-j j**-3."""
    j = np.arange(1, max_exponent + 1)
    weights = 2.0 ** (-j) * j.astype(np.float64) ** (-3)
    return j, weights / weights.sum()


def llogl_levels(n: int, level_cycle: int = LLOGL_LEVEL_CYCLE) -> np.ndarray:
    """Quantizer level used at times 1..n."""
    return np.arange(1, n + 1) % level_cycle


def llogl_conditional_mean(levels, max_exponent: int = LLOGL_MAX_EXPONENT) -> np.ndarray:
    """E(G_k(2**J + U)) = E(2**J) + (2**k - 1) / 2**(k+1) for each level k."""
    j, probs = llogl_exponent_law(max_exponent)
    base = float(np.dot(probs, 2.0**j))
    k = np.asarray(levels, dtype=np.float64)
    return base + (2.0**k - 1.0) / 2.0 ** (k + 1.0)


def sample_llogl(spec: MartingaleSpec, n: int, rng):
    """(X, Y, levels) with X_i = 2**J_i + U_i and Y_i = G_{k_i}(X_i)."""
    j, probs = llogl_exponent_law(spec.max_exponent)
    x = 2.0 ** rng.choice(j, size=n, p=probs) + rng.random(n)
    levels = llogl_levels(n, spec.level_cycle)
    y = np.empty(n)
    for k in np.unique(levels):
        mask = levels == k
        y[mask] = np.ldexp(quantize_array(x[mask], int(k)).astype(np.float64), -int(k))
    return x, y, levels


def sample_differences(spec: MartingaleSpec, n: int, rng) -> np.ndarray:
    """Z_1, ..., Z_n with E(Z_i | Z_1, ..., Z_{i-1}) = 0."""
    if spec.variant == "quantized_llogl":
        _, y, levels = sample_llogl(spec, n, rng)
        return y - llogl_conditional_mean(levels, spec.max_exponent)
    if spec.generator == "zero":
        return np.zeros(n)
    signs = 2.0 * rng.integers(0, 2, size=n) - 1.0
    if spec.generator == "coin":
        return signs
    if spec.generator == "pareto":
        return signs * rng.pareto(spec.pareto_shape, size=n)
    # volatility_switch: scale is predictable from the sign of Z_{n-1}.
    scale = np.ones(n)
    scale[1:] += 0.5 * (signs[:-1] > 0)
    return scale * signs


def innovation_draws(spec: MartingaleSpec, previous: float, size: int, rng) -> np.ndarray:
    """Independent draws of the next difference given the previous one."""
    if spec.variant == "quantized_llogl":
        return sample_differences(spec, size, rng)
    if spec.generator == "volatility_switch":
        scale = 1.5 if previous > 0 else 1.0
        return scale * (2.0 * rng.integers(0, 2, size=size) - 1.0)
    return sample_differences(spec, size, rng)


@dataclass(frozen=True)
class Trajectory:
    seed: str
    averages: np.ndarray
    sup_abs: float
    # sup over 1..n of |average| at every grid point
    running_sup: np.ndarray


@dataclass(frozen=True)
class MartingaleRun:
    spec: MartingaleSpec
    n_max: int
    grid: np.ndarray
    trajectories: Tuple[Trajectory, ...]


def _check_n(n_max: int):
    if n_max < MIN_N:
        raise InputError(f"n_max must be at least {MIN_N}, got {n_max}")


def _spec(spec) -> MartingaleSpec:
    if isinstance(spec, MartingaleSpec):
        return spec
    if isinstance(spec, str):
        return martingale_spec(spec)
    try:
        return MartingaleSpec(**spec)
    except ValidationError as e:
        raise SpecError(f"invalid martingale spec: {e}") from e


def simulate_running_averages(spec, n_max: int, seeds: Sequence, workers=None) -> MartingaleRun:
    spec = _spec(spec)
    _check_n(n_max)
    grid = cesaro_grid(n_max)

    def one_seed(seed):
        z = sample_differences(spec, n_max, np.random.default_rng(seed))
        averages = np.cumsum(z) / np.arange(1, n_max + 1)
        running_sup = np.maximum.accumulate(np.abs(averages))
        return Trajectory(
            seed=str(seed),
            averages=averages[grid - 1],
            sup_abs=float(running_sup[-1]),
            running_sup=running_sup[grid - 1],
        )

    trajectories = map_seeds(one_seed, list(seeds), workers)
    logger.info("martingale %s n_max=%d over %d seeds", spec.name, n_max, len(trajectories))
    return MartingaleRun(spec=spec, n_max=n_max, grid=grid, trajectories=tuple(trajectories))


@dataclass(frozen=True)
class SupEstimate:
    n_max: int
    p: float
    estimate: float
    stderr: float
    n_seeds: int


def _sup_estimate(sups: np.ndarray, n_max: int, p: float) -> SupEstimate:
    values = sups**p
    stderr = float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else float("nan")
    return SupEstimate(n_max=n_max, p=p, estimate=float(values.mean()), stderr=stderr, n_seeds=values.size)


def estimate_sup_average(spec, n_max: int, seeds: Sequence, p: float = 1.0, workers=None) -> SupEstimate:
    """Mean over seeds of sup_{n <= n_max} |(1/n) sum_{i<=n} Z_i|**p, with its standard error."""
    if p <= 0:
        raise InputError(f"p must be positive, got {p}")
    run = simulate_running_averages(spec, n_max, seeds, workers)
    sups = np.asarray([t.sup_abs for t in run.trajectories])
    return _sup_estimate(sups, n_max, p)


@dataclass(frozen=True)
class Stabilization:
    estimates: Tuple[SupEstimate, ...]
    relative_changes: Tuple[float, ...]
    growth_flag: bool


def sup_stabilization(spec, n_values: Sequence[int], seeds: Sequence, p: float = 1.0,
                      workers=None) -> Stabilization:
    """Sup-average estimate at each n in n_values, read off one set of trajectories.

    growth_flag is set when the last relative change exceeds 5%, the
    pattern a non-integrable sup would show.
    """
    n_values = sorted(int(n) for n in n_values)
    if not n_values:
        raise InputError("n_values must not be empty")
    spec = _spec(spec)
    _check_n(n_values[0])
    n_max = n_values[-1]

    def one_seed(seed):
        z = sample_differences(spec, n_max, np.random.default_rng(seed))
        sup = np.maximum.accumulate(np.abs(np.cumsum(z) / np.arange(1, n_max + 1)))
        return sup[np.asarray(n_values) - 1]

    sups = np.stack(map_seeds(one_seed, list(seeds), workers))
    estimates = tuple(_sup_estimate(sups[:, i], n, p) for i, n in enumerate(n_values))
    changes = []
    for prev, cur in zip(estimates, estimates[1:]):
        base = abs(prev.estimate)
        changes.append(abs(cur.estimate - prev.estimate) / base if base > 0 else 0.0)
    growth = bool(changes) and changes[-1] > GROWTH_TOLERANCE
    if growth:
        logger.warning("sup-average estimate for %s still growing: %.3g", spec.name, changes[-1])
    return Stabilization(estimates=estimates, relative_changes=tuple(changes), growth_flag=growth)


def write_trajectories(run: MartingaleRun, destination):
    path = resolve_output_path(destination)
    frames = [
        pd.DataFrame({"n": run.grid, "seed": t.seed, "running_average": t.averages})
        for t in run.trajectories
    ]
    if frames:
        df = pd.concat(frames, ignore_index=True)[list(trajectory_dtype)]
    else:
        df = pd.DataFrame({col: pd.Series(dtype=dt) for col, dt in trajectory_dtype.items()})
    try:
        df.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    except OSError as e:
        raise ReportIOError(path, e.strerror or str(e)) from e
    logger.info("trajectories written to %s", path)
    return path
