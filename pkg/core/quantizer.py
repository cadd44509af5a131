"""
Level-k quantizer over the dyadic lattice.

A value x is represented at level k by the integer index i with
x ~ i * 2**-k, rounding toward zero: positive cells are closed on the left
([i2^-k, (i+1)2^-k)), negative cells closed on the right
((-(i+1)2^-k, -i2^-k]). Patterns compare by index, never by float value.
"""

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from config import MAX_INDEX, MAX_LEVEL
from core.errors import InputError, QuantizerRangeError


@dataclass(frozen=True)
class QuantizedValue:
    level: int
    index: int

    @property
    def value(self) -> float:
        return dequantize(self)


@dataclass(frozen=True)
class QuantizedPattern:
    level: int
    indices: Tuple[int, ...]

    def __len__(self):
        return len(self.indices)


def _check_level(k):
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)):
        raise InputError(f"level must be an integer, got {k!r}")
    if k < 0:
        raise InputError(f"level must be nonnegative, got {k}")
    if k > MAX_LEVEL:
        raise QuantizerRangeError(f"level {k} above cap {MAX_LEVEL}")


def quantize(x: float, k: int) -> QuantizedValue:
    _check_level(k)
    x = float(x)
    if not math.isfinite(x):
        raise InputError(f"cannot quantize non-finite value {x!r}")
    # ldexp scales by a power of two, so floor sees the exact product.
    magnitude = math.floor(math.ldexp(abs(x), k))
    if magnitude >= MAX_INDEX:
        raise QuantizerRangeError(f"|{x}| * 2**{k} exceeds index cap 2**53")
    index = -magnitude if x < 0 else magnitude
    return QuantizedValue(level=int(k), index=int(index))


def dequantize(q: QuantizedValue) -> float:
    return math.ldexp(float(q.index), -q.level)


def quantize_array(xs, k: int) -> np.ndarray:
    """Vectorized quantize: int64 indices of every element at level k."""
    _check_level(k)
    arr = np.asarray(xs, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise InputError("cannot quantize non-finite values")
    magnitude = np.floor(np.ldexp(np.abs(arr), k))
    if magnitude.size and magnitude.max() >= MAX_INDEX:
        raise QuantizerRangeError(f"values scaled by 2**{k} exceed index cap 2**53")
    magnitude = magnitude.astype(np.int64)
    return np.where(arr < 0, -magnitude, magnitude)


def quantize_segment(xs: Sequence[float], k: int) -> QuantizedPattern:
    if len(xs) == 0:
        raise InputError("cannot quantize an empty segment")
    indices = quantize_array(xs, k)
    return QuantizedPattern(level=int(k), indices=tuple(int(i) for i in indices))


def coarsen(index: int, from_level: int, to_level: int) -> int:
    """Index at to_level of any x whose index at from_level is `index`.

    Rounding toward zero nests: G_j(G_k(x)) = G_j(x) for j <= k.
    """
    if to_level > from_level:
        raise InputError("can only coarsen to a lower level")
    shift = from_level - to_level
    magnitude = abs(index) >> shift
    return -magnitude if index < 0 else magnitude
