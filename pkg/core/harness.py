"""
Cesaro-average evaluation of the forward predictor against exact oracles and
realized values, plus the CSV report format shared with the martingale lab.
"""

import logging
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.special import gamma

from config import ENUMERATION_CAP, FLOAT_FORMAT, OUTPUT_DIR_ENV, report_dtype
from core.errors import CapabilityError, EnumerationRangeError, InputError, ReportIOError
from core.predictor import OnlinePredictor
from core.processes import (
    Ar1Spec,
    IidSpec,
    MarkovSpec,
    OdometerSpec,
    conditional_mean_series,
    parse_spec,
    sample_path,
)
from utils.parallel import map_seeds

logger = logging.getLogger(__name__)

AGG_SEED = "agg"
MIN_HORIZON = 10


@dataclass(frozen=True)
class SeedCurve:
    seed: str
    err_vs_oracle: np.ndarray
    err_vs_realized: np.ndarray


@dataclass(frozen=True)
class CesaroReport:
    spec: object
    p: float
    grid: np.ndarray
    curves: Tuple[SeedCurve, ...]
    reference_limit: Optional[float] = None

    @property
    def seeds(self) -> Tuple[str, ...]:
        return tuple(c.seed for c in self.curves)

    def _aggregate(self, attr):
        if not self.curves:
            return np.full(self.grid.size, np.nan)
        stacked = np.stack([getattr(c, attr) for c in self.curves])
        # fsum makes the reduction independent of seed order.
        return np.asarray([math.fsum(col) / len(self.curves) for col in stacked.T])

    @property
    def err_vs_oracle(self) -> np.ndarray:
        return self._aggregate("err_vs_oracle")

    @property
    def err_vs_realized(self) -> np.ndarray:
        return self._aggregate("err_vs_realized")

    def curve(self, seed) -> SeedCurve:
        for c in self.curves:
            if c.seed == str(seed):
                return c
        raise KeyError(seed)


def cesaro_grid(T: int) -> np.ndarray:
    """Powers of two up to T, then T itself."""
    if T < 1:
        return np.zeros(0, dtype=np.int64)
    points = [1 << j for j in range(T.bit_length()) if (1 << j) <= T]
    if points[-1] != T:
        points.append(T)
    return np.asarray(points, dtype=np.int64)


def running_average(errors: np.ndarray) -> np.ndarray:
    """(1/t) * sum_{i<=t} errors[i-1] for t = 1..len(errors)."""
    return np.cumsum(errors) / np.arange(1, errors.size + 1)


def error_series(spec, values: np.ndarray, p: float, enumeration_cap: int = ENUMERATION_CAP):
    """Per-step errors |R_i - E(X_i|X_0^{i-1})|^p and |R_i - X_i|^p for i = 1..len(values)-1."""
    predictions = OnlinePredictor(values).predict_all()[1 : values.size]
    oracle = conditional_mean_series(spec, values, enumeration_cap)[1:]
    realized = values[1:]
    return np.abs(predictions - oracle) ** p, np.abs(predictions - realized) ** p


def _check_oracle(spec, cap):
    if isinstance(spec, OdometerSpec):
        schedule = spec.to_schedule()
        if schedule.L > cap:
            raise EnumerationRangeError(
                f"odometer schedule {schedule} has l_K = {schedule.L} above enumeration cap {cap}"
            )


def evaluate(spec, p: float, T: int, seeds: Sequence, workers=None,
             reference_limit: Optional[float] = None,
             enumeration_cap: int = ENUMERATION_CAP) -> CesaroReport:
    """Run the predictor for i = 1..T on each seed's path and average the errors.

    When `reference_limit` is None the closed-form limit is attached if one
    exists for the process.
    """
    spec = parse_spec(spec)
    if p < 1:
        raise InputError(f"error exponent must be at least 1, got {p}")
    if T < MIN_HORIZON:
        raise InputError(f"horizon must be at least {MIN_HORIZON}, got {T}")
    seeds = list(seeds)
    if not seeds:
        raise InputError("at least one seed is required")
    _check_oracle(spec, enumeration_cap)
    grid = cesaro_grid(T)

    def one_seed(seed):
        path = sample_path(spec, T + 1, seed)
        oracle_err, realized_err = error_series(spec, path.values, p, enumeration_cap)
        return SeedCurve(
            seed=str(seed),
            err_vs_oracle=running_average(oracle_err)[grid - 1],
            err_vs_realized=running_average(realized_err)[grid - 1],
        )

    curves = map_seeds(one_seed, seeds, workers)
    if reference_limit is None:
        try:
            reference_limit = limit_reference(spec, p)
        except CapabilityError:
            reference_limit = None
    report = CesaroReport(spec=spec, p=float(p), grid=grid, curves=tuple(curves),
                          reference_limit=reference_limit)
    logger.info(
        "evaluate %s p=%g T=%d: err_vs_oracle=%.6g err_vs_realized=%.6g",
        spec.kind, p, T, report.err_vs_oracle[-1], report.err_vs_realized[-1],
    )
    return report


def limit_reference(spec, p: float) -> float:
    """lim (1/t) sum |E(X_i|X_0^{i-1}) - X_i|^p for specs with a closed form."""
    spec = parse_spec(spec)
    if isinstance(spec, MarkovSpec):
        v = np.asarray(spec.values, dtype=np.float64)
        row_means = spec.P @ v
        spread = np.abs(row_means[:, None] - v[None, :]) ** p
        return float(spec.stationary @ np.sum(spec.P * spread, axis=1))
    if isinstance(spec, IidSpec):
        v = np.asarray(spec.values, dtype=np.float64)
        return float(np.dot(spec.probs, np.abs(v - spec.mean) ** p))
    if isinstance(spec, Ar1Spec):
        return float(spec.sigma**p * 2 ** (p / 2) * gamma((p + 1) / 2) / math.sqrt(math.pi))
    raise CapabilityError(f"no closed-form limit for {spec.kind} specs")


def _report_frame(report: CesaroReport) -> pd.DataFrame:
    limit = np.nan if report.reference_limit is None else report.reference_limit
    frames = []
    rows = [(c.seed, c.err_vs_oracle, c.err_vs_realized) for c in report.curves]
    if report.grid.size:
        rows.append((AGG_SEED, report.err_vs_oracle, report.err_vs_realized))
    for seed, oracle, realized in rows:
        frames.append(pd.DataFrame({
            "t": report.grid,
            "p": report.p,
            "seed": seed,
            "err_vs_oracle": oracle,
            "err_vs_realized": realized,
            "reference_limit": limit,
        }))
    if not frames:
        return pd.DataFrame({col: pd.Series(dtype=dt) for col, dt in report_dtype.items()})
    return pd.concat(frames, ignore_index=True)[list(report_dtype)]


def resolve_output_path(destination) -> Path:
    path = Path(destination)
    if not path.is_absolute():
        base = os.getenv(OUTPUT_DIR_ENV)
        if base:
            path = Path(base) / path
    return path


def write_report(report: CesaroReport, destination) -> Path:
    path = resolve_output_path(destination)
    try:
        _report_frame(report).to_csv(path, index=False, float_format=FLOAT_FORMAT)
    except OSError as e:
        raise ReportIOError(path, e.strerror or str(e)) from e
    logger.info("report written to %s", path)
    return path


def read_report(path) -> CesaroReport:
    """Parse a report CSV back; spec is not stored and comes back as None."""
    try:
        df = pd.read_csv(path, dtype=report_dtype, float_precision="round_trip")
    except (OSError, ValueError, pd.errors.ParserError) as e:
        raise ReportIOError(path, str(e)) from e
    if list(df.columns) != list(report_dtype):
        raise ReportIOError(path, f"unexpected header {list(df.columns)}")
    seed_rows = df[df["seed"] != AGG_SEED]
    if df.empty:
        return CesaroReport(spec=None, p=float("nan"), grid=np.zeros(0, dtype=np.int64), curves=())
    seeds = list(dict.fromkeys(seed_rows["seed"]))
    grid = df[df["seed"] == df["seed"].iloc[0]]["t"].to_numpy(dtype=np.int64)
    curves = []
    for seed in seeds:
        rows = seed_rows[seed_rows["seed"] == seed]
        curves.append(SeedCurve(
            seed=seed,
            err_vs_oracle=rows["err_vs_oracle"].to_numpy(dtype=np.float64),
            err_vs_realized=rows["err_vs_realized"].to_numpy(dtype=np.float64),
        ))
    limit = float(df["reference_limit"].iloc[0])
    return CesaroReport(
        spec=None,
        p=float(df["p"].iloc[0]),
        grid=grid,
        curves=tuple(curves),
        reference_limit=None if math.isnan(limit) else limit,
    )
