"""Coordinate distributions: absolute moments, C(M, omega), sampling.

Five distributions are supported. ``Uniform01`` and ``Exponential`` live on
[0, inf); ``UniformSym`` (on [-1/2, 1/2]), ``Logistic`` and ``Gaussian`` are
symmetric about zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Iterator

import numpy as np
from scipy import integrate, special

from ._rng import RngStream, uniforms
from .errors import ArgumentError, NumericError

PARTITION_GUARD = 24
LOGISTIC_RTOL = 1e-10


class MeasureKind(str, Enum):
    UNIFORM01 = "uniform01"
    UNIFORM_SYM = "uniform_sym"
    EXPONENTIAL = "exponential"
    LOGISTIC = "logistic"
    GAUSSIAN = "gaussian"


# integer codes used by the compiled path sampler
KIND_CODE = {
    MeasureKind.UNIFORM01: 0,
    MeasureKind.UNIFORM_SYM: 1,
    MeasureKind.EXPONENTIAL: 2,
    MeasureKind.LOGISTIC: 3,
    MeasureKind.GAUSSIAN: 4,
}


@dataclass(frozen=True)
class MeasureSpec:
    kind: MeasureKind
    scale: float | None = None  # lambda, Exponential/Logistic
    variance: float | None = None  # sigma^2, Gaussian

    def __post_init__(self):
        kind = MeasureKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind in (MeasureKind.EXPONENTIAL, MeasureKind.LOGISTIC):
            if self.scale is None or not (self.scale > 0 and math.isfinite(self.scale)):
                raise ArgumentError(f"{kind.value} needs a positive scale, got {self.scale!r}")
            if self.variance is not None:
                raise ArgumentError(f"{kind.value} takes no variance")
        elif kind is MeasureKind.GAUSSIAN:
            if self.variance is None or not (self.variance > 0 and math.isfinite(self.variance)):
                raise ArgumentError(f"gaussian needs a positive variance, got {self.variance!r}")
            if self.scale is not None:
                raise ArgumentError("gaussian takes no scale")
        elif self.scale is not None or self.variance is not None:
            raise ArgumentError(f"{kind.value} takes no parameters")

    @property
    def sigma(self) -> float:
        return math.sqrt(self.variance)

    @property
    def param(self) -> float:
        """The single shape parameter handed to the path sampler."""
        if self.kind is MeasureKind.GAUSSIAN:
            return self.sigma
        return self.scale if self.scale is not None else 1.0

    @property
    def nonnegative(self) -> bool:
        return self.kind in (MeasureKind.UNIFORM01, MeasureKind.EXPONENTIAL)

    @property
    def symmetric(self) -> bool:
        return not self.nonnegative

    @property
    def sup_abs(self) -> float:
        """Essential supremum of |x|; ``inf`` for unbounded support."""
        if self.kind is MeasureKind.UNIFORM01:
            return 1.0
        if self.kind is MeasureKind.UNIFORM_SYM:
            return 0.5
        return math.inf

    def label(self) -> str:
        if self.scale is not None:
            return f"{self.kind.value}(scale={self.scale!r})"
        if self.variance is not None:
            return f"{self.kind.value}(variance={self.variance!r})"
        return self.kind.value


def uniform01() -> MeasureSpec:
    return MeasureSpec(MeasureKind.UNIFORM01)


def uniform_sym() -> MeasureSpec:
    return MeasureSpec(MeasureKind.UNIFORM_SYM)


def exponential(scale: float = 1.0) -> MeasureSpec:
    return MeasureSpec(MeasureKind.EXPONENTIAL, scale=scale)


def logistic(scale: float = 1.0) -> MeasureSpec:
    return MeasureSpec(MeasureKind.LOGISTIC, scale=scale)


def gaussian(variance: float = 1.0) -> MeasureSpec:
    return MeasureSpec(MeasureKind.GAUSSIAN, variance=variance)


class BoundKind(str, Enum):
    EXACT = "Exact"
    INTERVAL = "Interval"
    UPPER_BOUND = "UpperBound"


@dataclass(frozen=True)
class BoundValue:
    kind: BoundKind
    value: float | None = None
    lo: float | None = None
    hi: float | None = None

    def __post_init__(self):
        if self.kind is BoundKind.INTERVAL:
            if not (0 <= self.lo < self.hi < math.inf):
                raise ArgumentError(f"bad interval ({self.lo}, {self.hi})")
        elif not (self.value is not None and 0 <= self.value < math.inf):
            raise ArgumentError(f"bad bound value {self.value!r}")

    @property
    def upper(self) -> float:
        """Largest value compatible with this bound."""
        return self.hi if self.kind is BoundKind.INTERVAL else self.value

    def contains(self, x: float, rtol: float = 0.0) -> bool:
        if self.kind is BoundKind.EXACT:
            return abs(x - self.value) <= rtol * abs(self.value)
        if self.kind is BoundKind.INTERVAL:
            return self.lo < x < self.hi
        return x <= self.value * (1 + rtol)


def double_factorial(k: int) -> int:
    """k!! = k (k-2) (k-4) ...; 0!! = 1 (empty product)."""
    if k < 0:
        raise ArgumentError(f"double factorial needs k >= 0, got {k}")
    return math.prod(range(k, 0, -2))


def _check_order(r) -> int:
    if isinstance(r, bool) or int(r) != r or r < 1:
        raise ArgumentError(f"moment order must be a positive integer, got {r!r}")
    return int(r)


@lru_cache(maxsize=None)
def _logistic_unit_moment(r: int) -> float:
    """2 * int_0^inf t^r e^-t / (1 + e^-t)^2 dt, the lambda = 1 moment."""

    def f(t):
        e = math.exp(-t)
        return t**r * e / (1.0 + e) ** 2

    # integrand <= t^r e^-t, so the neglected tail is at most Gamma(r+1, T)
    scale = math.factorial(r)
    T = 40.0
    while special.gammaincc(r + 1, T) > 1e-3 * LOGISTIC_RTOL:
        T *= 1.5
    tail = special.gammaincc(r + 1, T) * scale
    val, err = integrate.quad(f, 0.0, T, epsabs=0.0, epsrel=1e-13, limit=400, points=[float(r)])
    if not math.isfinite(val) or err + tail > LOGISTIC_RTOL * val:
        raise NumericError(f"logistic moment r={r} did not converge", achieved=(err + tail) / val)
    return 2.0 * val


def moment_abs(measure: MeasureSpec, r: int) -> float:
    """m_r = E|x|^r."""
    r = _check_order(r)
    kind = measure.kind
    if kind is MeasureKind.UNIFORM01:
        return 1.0 / (r + 1)
    if kind is MeasureKind.UNIFORM_SYM:
        return 2.0**-r / (r + 1)
    if kind is MeasureKind.EXPONENTIAL:
        return measure.scale**r * float(math.factorial(r))
    if kind is MeasureKind.LOGISTIC:
        m = measure.scale**r * _logistic_unit_moment(r)
        ref = measure.scale**r * float(math.factorial(r))
        if not (ref / 2 < m < 2 * ref):
            raise NumericError(f"logistic moment r={r} left its analytic bracket", achieved=m)
        return m
    s = measure.sigma
    if r % 2 == 0:
        return s**r * float(double_factorial(r - 1))
    return s**r * math.sqrt(2.0 / math.pi) * float(double_factorial(r - 1))


def mean(measure: MeasureSpec) -> float:
    if measure.kind is MeasureKind.UNIFORM01:
        return 0.5
    if measure.kind is MeasureKind.EXPONENTIAL:
        return measure.scale
    return 0.0


def variance(measure: MeasureSpec) -> float:
    kind = measure.kind
    if kind in (MeasureKind.UNIFORM01, MeasureKind.UNIFORM_SYM):
        return 1.0 / 12.0
    if kind is MeasureKind.EXPONENTIAL:
        return measure.scale**2
    if kind is MeasureKind.LOGISTIC:
        return measure.scale**2 * math.pi**2 / 3.0
    return measure.variance


def integer_partitions(n: int, largest: int | None = None) -> Iterator[tuple[int, ...]]:
    """Partitions of n with parts in non-increasing order, lexicographically descending."""
    if largest is None:
        largest = n
    if n == 0:
        yield ()
        return
    for first in range(min(n, largest), 0, -1):
        for rest in integer_partitions(n - first, first):
            yield (first,) + rest


def _check_M(M) -> int:
    if isinstance(M, bool) or int(M) != M or M < 1:
        raise ArgumentError(f"M must be a positive integer, got {M!r}")
    return int(M)


def c_constant_enum(measure: MeasureSpec, M: int) -> float:
    """C(M, omega) by brute force over all integer partitions of M."""
    M = _check_M(M)
    if M > PARTITION_GUARD:
        raise ArgumentError(f"partition enumeration limited to M <= {PARTITION_GUARD}, got {M}")
    m = {r: moment_abs(measure, r) for r in range(1, M + 1)}
    return max(math.prod(m[r] for r in parts) for parts in integer_partitions(M))


def c_constant_closed(measure: MeasureSpec, M: int) -> BoundValue:
    """Closed form (or bracket) for C(M, omega).

    Factorials are exact integers and are converted to float only at the end,
    so large M loses nothing but the final rounding.
    """
    M = _check_M(M)
    kind = measure.kind
    if kind is MeasureKind.UNIFORM01:
        return BoundValue(BoundKind.EXACT, value=1.0 / (M + 1))
    if kind is MeasureKind.UNIFORM_SYM:
        return BoundValue(BoundKind.EXACT, value=1.0 / (2.0**M * (M + 1)))
    if kind is MeasureKind.EXPONENTIAL:
        return BoundValue(BoundKind.EXACT, value=measure.scale**M * float(math.factorial(M)))
    if kind is MeasureKind.LOGISTIC:
        base = measure.scale**M * float(math.factorial(M))
        return BoundValue(BoundKind.INTERVAL, lo=base / 2, hi=2 * base)
    return BoundValue(BoundKind.UPPER_BOUND,
                      value=measure.sigma**M * float(double_factorial(M - 1)))


def c_constant(measure: MeasureSpec, M: int) -> float:
    """Best certified value for C(M, omega): enumeration where feasible, else the closed form's upper end."""
    if M <= PARTITION_GUARD:
        return c_constant_enum(measure, M)
    return c_constant_closed(measure, M).upper


def from_uniform(measure: MeasureSpec, u: np.ndarray, first_index: int = 0,
                 partner: np.ndarray | None = None) -> np.ndarray:
    """Map uniforms on (0, 1) to draws of ``measure`` by inverse CDF.

    Gaussian coordinates use Box-Muller on aligned counter pairs: coordinate
    j reads the uniforms at counters 2*(j//2) and 2*(j//2)+1 and takes the
    cosine branch for even j, the sine branch for odd j. ``partner`` holds
    the second uniform of each pair in that case.
    """
    kind = measure.kind
    if kind is MeasureKind.UNIFORM01:
        return u.copy()
    if kind is MeasureKind.UNIFORM_SYM:
        return u - 0.5
    if kind is MeasureKind.EXPONENTIAL:
        return -measure.scale * np.log1p(-u)
    if kind is MeasureKind.LOGISTIC:
        return measure.scale * (np.log(u) - np.log1p(-u))
    radius = measure.sigma * np.sqrt(-2.0 * np.log(u))
    angle = 2.0 * np.pi * partner
    odd = (np.arange(first_index, first_index + len(u)) % 2).astype(bool)
    return np.where(odd, radius * np.sin(angle), radius * np.cos(angle))


def sample(measure: MeasureSpec, stream: RngStream, n: int) -> np.ndarray:
    """n i.i.d. draws, consuming counters ``stream.position .. +n-1``."""
    if n < 1:
        raise ArgumentError(f"sample size must be >= 1, got {n}")
    start = stream.position
    if measure.kind is not MeasureKind.GAUSSIAN:
        return from_uniform(measure, stream.take(n))
    idx = np.arange(start, start + n)
    even = idx - idx % 2
    lo = int(even[0])
    u = uniforms(stream.key, lo, int(even[-1]) + 2 - lo)
    stream.position += n
    return from_uniform(measure, u[even - lo], first_index=start, partner=u[even - lo + 1])
