"""Kernel families and the RKHS squared distance.

All ``eval``/``sq_distance`` methods broadcast over numpy arrays. Series
kernels (Korobov, Hermite) are truncated at a cap fixed at construction so
that the neglected weight mass is below ``tail_tol``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .coefficients import zeta
from .errors import ArgumentError, NumericError

CLAMP = 1e-12
HERMITE_ENVELOPE = (200, 20.0)  # (max degree, max |x|) kept inside double range
V_EXPONENT = 11.0 / 6.0


# ---------------------------------------------------------------- weights


@dataclass(frozen=True)
class PolynomialDecay:
    """weight(h) = max(1, |h|)^(-2 alpha)."""

    alpha: float

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ArgumentError(f"alpha must be positive, got {self.alpha!r}")

    def __call__(self, h):
        h = np.maximum(1.0, np.abs(np.asarray(h, dtype=np.float64)))
        return h ** (-2.0 * self.alpha)

    def moment(self, p: float) -> float:
        """sum_{h >= 1} h^p weight(h)."""
        s = 2.0 * self.alpha - p
        if s <= 1:
            raise ArgumentError(f"sum of h^{p} weight(h) diverges for alpha={self.alpha}")
        return zeta(s)

    def tail(self, H: int) -> float:
        """Upper bound on sum_{h > H} weight(h)."""
        s = 2.0 * self.alpha
        if s <= 1:
            return math.inf
        return H ** (1.0 - s) / (s - 1.0)

    def label(self) -> str:
        return f"polynomial(alpha={self.alpha!r})"


@dataclass(frozen=True)
class GeometricDecay:
    """weight(h) = q^|h|."""

    q: float

    def __post_init__(self):
        if not (0 < self.q < 1):
            raise ArgumentError(f"q must lie in (0, 1), got {self.q!r}")

    def __call__(self, h):
        return self.q ** np.abs(np.asarray(h, dtype=np.float64))

    def moment(self, p: float) -> float:
        total = 0.0
        h = 1
        while True:
            term = h**p * self.q**h
            total += term
            # terms decrease geometrically once h > p / log(1/q)
            if h > p / -math.log(self.q) + 1 and term < 1e-17 * total:
                return total
            h += 1

    def tail(self, H: int) -> float:
        return self.q ** (H + 1) / (1.0 - self.q)

    def label(self) -> str:
        return f"geometric(q={self.q!r})"


WeightFunction = PolynomialDecay | GeometricDecay


def _cap_for(weight: WeightFunction, tail_tol: float, factor: float, limit: int) -> int:
    """Smallest H with factor * tail(H) <= tail_tol, or ``limit + 1`` if none."""
    H = 1
    while factor * weight.tail(H) > tail_tol:
        H = H + max(1, H // 8)
        if H > limit:
            return limit + 1
    while H > 1 and factor * weight.tail(H - 1) <= tail_tol:
        H -= 1
    return H


def korobov_Cr(weight: WeightFunction) -> float:
    """C_r = sqrt(sum_{h >= 1} h^2 weight(h))."""
    return math.sqrt(weight.moment(2.0))


def hermite_V(weight: WeightFunction) -> float:
    """V = sum_{l >= 1} weight(l) l^(11/6)."""
    return weight.moment(V_EXPONENT)


# ---------------------------------------------------------------- kernels


class Domain(str, Enum):
    REAL = "R"
    NONNEG = "R+"
    PERIODIC = "[0,1] periodic"


class Kernel:
    domain: Domain = Domain.REAL

    def eval(self, x, y):
        raise NotImplementedError

    def _check(self, *pts):
        arrs = [np.asarray(p, dtype=np.float64) for p in pts]
        for a in arrs:
            if not np.all(np.isfinite(a)):
                raise ArgumentError("kernel arguments must be finite")
            if self.domain is Domain.NONNEG and np.any(a < 0):
                raise ArgumentError(f"{type(self).__name__} is defined on [0, inf) only")
        return arrs

    def sq_distance_generic(self, x, y):
        """K(x,x) + K(y,y) - 2K(x,y) from three kernel evaluations."""
        d = self.eval(x, x) + self.eval(y, y) - 2.0 * self.eval(x, y)
        return _clamp(d)

    def sq_distance(self, x, y):
        return self.sq_distance_generic(x, y)

    def series_meta(self) -> dict:
        return {}


def _clamp(d):
    d = np.asarray(d, dtype=np.float64)
    if np.any(d < -CLAMP * np.maximum(1.0, np.abs(d))):
        raise NumericError(f"negative squared distance {d.min()!r}", achieved=float(d.min()))
    out = np.maximum(d, 0.0)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class FractionalWiener(Kernel):
    beta: float
    domain: Domain = field(default=Domain.REAL, init=False)

    def __post_init__(self):
        if not (0 < self.beta < 1):
            raise ArgumentError(f"beta must lie in (0, 1), got {self.beta!r}")

    def eval(self, x, y):
        x, y = self._check(x, y)
        e = 2.0 * self.beta
        out = 0.5 * (np.abs(x) ** e + np.abs(y) ** e - np.abs(x - y) ** e)
        return out if out.ndim else float(out)

    def sq_distance(self, x, y):
        # the |x|, |y| terms cancel identically
        x, y = self._check(x, y)
        out = np.abs(x - y) ** (2.0 * self.beta)
        return out if out.ndim else float(out)

    def label(self) -> str:
        return f"fractional_wiener(beta={self.beta!r})"


def _check_r(r) -> int:
    if isinstance(r, bool) or int(r) != r or r < 2:
        raise ArgumentError(f"r must be an integer >= 2, got {r!r}")
    return int(r)


def _gauss_legendre(n: int):
    nodes, weights = np.polynomial.legendre.leggauss(n)
    return (nodes + 1.0) / 2.0, weights / 2.0


@dataclass(frozen=True)
class RFoldedWiener(Kernel):
    """Covariance of r-fold integrated Brownian motion on [0, inf)."""

    r: int
    domain: Domain = field(default=Domain.NONNEG, init=False)

    def __post_init__(self):
        object.__setattr__(self, "r", _check_r(self.r))

    @property
    def norm(self) -> float:
        return float(math.factorial(self.r - 1)) ** 2

    def _integral(self, x, y):
        # integrand has degree 2r-2, so r Gauss-Legendre nodes are exact
        t, w = _gauss_legendre(self.r)
        m = np.minimum(x, y)[..., None]
        s = m * t
        vals = ((x[..., None] - s) * (y[..., None] - s)) ** (self.r - 1)
        return m[..., 0] * (vals @ w)

    def eval(self, x, y):
        x, y = self._check(x, y)
        out = self._integral(x, y) / self.norm
        return out if out.ndim else float(out)

    def _sq_nonneg(self, x, y):
        # for 0 <= lo <= hi the squared distance is
        # (hi-lo)^(2r-1)/(2r-1) + int_0^lo [(hi-t)^(r-1) - (lo-t)^(r-1)]^2 dt,
        # with the bracket expanded as (hi-lo) sum_j (hi-t)^j (lo-t)^(r-2-j)
        r = self.r
        hi = np.maximum(x, y)
        lo = np.minimum(x, y)
        d = hi - lo
        first = d ** (2 * r - 1) / (2 * r - 1)
        t, w = _gauss_legendre(r)
        s = lo[..., None] * t
        a = hi[..., None] - s
        b = lo[..., None] - s
        poly = sum(a**j * b ** (r - 2 - j) for j in range(r - 1))
        second = lo * ((d[..., None] * poly) ** 2 @ w)
        return (first + second) / self.norm

    def sq_distance(self, x, y):
        x, y = self._check(x, y)
        out = self._sq_nonneg(x, y)
        return out if out.ndim else float(out)

    def label(self) -> str:
        return f"rfolded_wiener(r={self.r})"


@dataclass(frozen=True)
class TwoSidedRFolded(Kernel):
    """r-folded Wiener kernel mirrored to R; zero across the origin."""

    r: int
    domain: Domain = field(default=Domain.REAL, init=False)

    def __post_init__(self):
        object.__setattr__(self, "r", _check_r(self.r))

    @property
    def _one_sided(self) -> RFoldedWiener:
        return RFoldedWiener(self.r)

    def eval(self, x, y):
        x, y = self._check(x, y)
        out = np.where(x * y < 0, 0.0, self._one_sided._integral(np.abs(x), np.abs(y))
                       / self._one_sided.norm)
        return out if out.ndim else float(out)

    def sq_distance(self, x, y):
        x, y = self._check(x, y)
        one = self._one_sided
        same = one._sq_nonneg(np.abs(x), np.abs(y))
        e = 2 * self.r - 1
        opposite = (np.abs(x) ** e + np.abs(y) ** e) / (e * one.norm)
        out = np.where(x * y < 0, opposite, same)
        return out if out.ndim else float(out)

    def label(self) -> str:
        return f"two_sided(r={self.r})"


class _SeriesKernel(Kernel):
    weight: WeightFunction
    series_cap: int | None
    tail_tol: float

    def _resolve_cap(self, factor: float, limit: int) -> int:
        if not (self.tail_tol > 0):
            raise ArgumentError(f"tail_tol must be positive, got {self.tail_tol!r}")
        if self.series_cap is not None:
            cap = int(self.series_cap)
            if cap < 1:
                raise ArgumentError(f"series_cap must be positive, got {self.series_cap!r}")
            if factor * self.weight.tail(cap) > self.tail_tol:
                raise ArgumentError(
                    f"series_cap={cap} leaves tail {factor * self.weight.tail(cap):.3g} "
                    f"> tail_tol={self.tail_tol:.3g}")
            return cap
        cap = _cap_for(self.weight, self.tail_tol, factor, limit)
        if cap > limit:
            raise ArgumentError(f"tail_tol={self.tail_tol:.3g} needs more than {limit} terms")
        return cap

    @property
    def tail_mass(self) -> float:
        """Upper bound on the neglected weight sum past the cap."""
        return self.weight.tail(self.cap)

    def series_meta(self) -> dict:
        return {"cap": self.cap, "tail_tol": self.tail_tol, "weight": self.weight.label()}


@dataclass(frozen=True)
class Korobov(_SeriesKernel):
    """sum_h weight(h) exp(2 pi i h (x - y)), evaluated in cosine form.

    Functions are 1-periodic, so any real arguments are accepted.
    """

    weight: WeightFunction
    series_cap: int | None = None
    tail_tol: float = 1e-14
    domain: Domain = field(default=Domain.PERIODIC, init=False)
    cap: int = field(init=False, default=0)

    def __post_init__(self):
        # kernel tail is 2 * sum_{h > H} weight(h)
        object.__setattr__(self, "cap", self._resolve_cap(2.0, 10**6))

    def _h(self):
        h = np.arange(1, self.cap + 1, dtype=np.float64)
        return h, self.weight(h)

    def eval(self, x, y):
        x, y = self._check(x, y)
        h, w = self._h()
        d = (x - y)[..., None]
        out = float(self.weight(0)) + 2.0 * (np.cos(2.0 * np.pi * h * d) @ w)
        return out if out.ndim else float(out)

    def sq_distance(self, x, y):
        x, y = self._check(x, y)
        h, w = self._h()
        d = (x - y)[..., None]
        out = 8.0 * (np.sin(np.pi * h * d) ** 2 @ w)
        return out if out.ndim else float(out)

    def label(self) -> str:
        return f"korobov({self.weight.label()}, cap={self.cap})"


def hermite_poly(l: int, x):
    """Normalized probabilists' Hermite polynomial H_l(x)."""
    if isinstance(l, bool) or int(l) != l or l < 0:
        raise ArgumentError(f"degree must be a nonnegative integer, got {l!r}")
    return hermite_table(int(l), x)[..., -1] if np.ndim(x) else float(hermite_table(int(l), x)[-1])


def hermite_table(L: int, x):
    """Array [..., l] = H_l(x) for l = 0..L via the normalized three-term recurrence."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty(x.shape + (L + 1,))
    out[..., 0] = 1.0
    if L >= 1:
        out[..., 1] = x
    for l in range(1, L):
        out[..., l + 1] = (x * out[..., l] - math.sqrt(l) * out[..., l - 1]) / math.sqrt(l + 1)
    if not np.all(np.isfinite(out)):
        raise NumericError(f"Hermite recurrence overflowed (L={L}, max |x|={np.abs(x).max():.3g})")
    return out


@dataclass(frozen=True)
class Hermite(_SeriesKernel):
    """sum_l weight(l) H_l(x) H_l(y).

    The cap L makes ``sum_{l > L} weight(l) <= tail_tol``; by Cramer's bound
    the pointwise truncation error is then at most
    ``sqrt(2 pi) exp((x^2 + y^2)/4) * tail_tol``.
    """

    weight: WeightFunction
    series_cap: int | None = None
    tail_tol: float = 1e-14
    domain: Domain = field(default=Domain.REAL, init=False)
    cap: int = field(init=False, default=0)

    def __post_init__(self):
        object.__setattr__(self, "cap", self._resolve_cap(1.0, HERMITE_ENVELOPE[0]))

    def _w(self):
        return self.weight(np.arange(0, self.cap + 1, dtype=np.float64))

    def eval(self, x, y):
        x, y = self._check(x, y)
        w = self._w()
        out = (hermite_table(self.cap, x) * hermite_table(self.cap, y)) @ w
        return out if out.ndim else float(out)

    def sq_distance(self, x, y):
        x, y = self._check(x, y)
        w = self._w()
        diff = hermite_table(self.cap, x) - hermite_table(self.cap, y)
        out = diff**2 @ w
        return out if out.ndim else float(out)

    def label(self) -> str:
        return f"hermite({self.weight.label()}, cap={self.cap})"
