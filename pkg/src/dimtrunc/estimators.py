"""Seeded Monte Carlo estimates of the true truncation errors.

Y_inf is replaced by a surrogate at depth K_ref. The deterministic part of the
neglected tail is added back (``shift = E[x] * sum_{j > K_ref} xi_j``) so the
remaining discrepancy B = sum_{j > K_ref} (x_j - E[x]) xi_j is zero-mean with
E B^2 = Var(x) sum_{j > K_ref} xi_j^2. Every estimate carries an analytic bound
on the effect of B (and of kernel series truncation) on its value.

Sample i always reads the counter-based substream ``(seed, stream, i)``, and
samples are processed in fixed-size blocks, so results are bit-identical for
any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba as nb
import numpy as np

from . import bounds as bd
from . import measures as ms
from ._rng import sample_keys, stream_base, uniform_at
from .bounds import HolderClass, Mode
from .coefficients import CoefficientSequence, FiniteList, PowerLaw
from .errors import ArgumentError, ConfigurationError, NumericError
from .kernels import (FractionalWiener, Hermite, Korobov, RFoldedWiener, TwoSidedRFolded,
                      hermite_V, korobov_Cr)
from .measures import MeasureSpec

BLOCK = 2048
BIAS_RATIO = 0.1
DEFAULT_K_REF = 100_000
X_STREAM, Z_STREAM = 0, 1


@dataclass(frozen=True)
class McConfig:
    n: int
    k_ref: int
    seed: int
    k_grid: tuple[int, ...]
    enforce_bias: bool = True

    def __post_init__(self):
        grid = tuple(int(k) for k in self.k_grid)
        object.__setattr__(self, "k_grid", grid)
        if self.n < 100:
            raise ArgumentError(f"sample count must be >= 100, got {self.n}")
        if self.k_ref < 1:
            raise ArgumentError(f"K_ref must be positive, got {self.k_ref}")
        if not 0 <= self.seed < 2**64:
            raise ArgumentError("seed must be a 64-bit unsigned value")
        if not grid:
            raise ArgumentError("k_grid is empty")
        if any(b <= a for a, b in zip(grid, grid[1:])) or grid[0] < 0:
            raise ArgumentError(f"k_grid must be strictly increasing and >= 0: {grid}")
        if grid[-1] > self.k_ref:
            raise ArgumentError(f"k_grid must stay below K_ref={self.k_ref}: {grid}")


def default_k_ref(seq: CoefficientSequence) -> int:
    return len(seq) if isinstance(seq, FiniteList) else DEFAULT_K_REF


@dataclass(frozen=True)
class McEstimate:
    value: float
    std_error: float
    n: int
    k_ref: int
    bias_bound: float
    bias_certified: bool = True
    clamped: bool = False

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise NumericError(f"non-finite estimate {self.value!r}")


# ---------------------------------------------------------------- path sampling


_FAST = {"reassoc", "nsz", "contract"}


# one reduction loop per distribution keeps the inner loop branch-free


@nb.njit(nogil=True, cache=True, fastmath=_FAST)
def _seg_uniform01(key, p, xi, lo, hi):
    acc = 0.0
    ab = 0.0
    for j in range(lo, hi):
        x = uniform_at(key, j) * xi[j]
        acc += x
        ab += abs(x)
    return acc, ab


@nb.njit(nogil=True, cache=True, fastmath=_FAST)
def _seg_uniform_sym(key, p, xi, lo, hi):
    acc = 0.0
    ab = 0.0
    for j in range(lo, hi):
        x = (uniform_at(key, j) - 0.5) * xi[j]
        acc += x
        ab += abs(x)
    return acc, ab


@nb.njit(nogil=True, cache=True, fastmath=_FAST)
def _seg_exponential(key, p, xi, lo, hi):
    acc = 0.0
    ab = 0.0
    for j in range(lo, hi):
        x = -p * math.log1p(-uniform_at(key, j)) * xi[j]
        acc += x
        ab += abs(x)
    return acc, ab


@nb.njit(nogil=True, cache=True, fastmath=_FAST)
def _seg_logistic(key, p, xi, lo, hi):
    acc = 0.0
    ab = 0.0
    for j in range(lo, hi):
        u = uniform_at(key, j)
        x = p * (math.log(u) - math.log1p(-u)) * xi[j]
        acc += x
        ab += abs(x)
    return acc, ab


@nb.njit(inline="always", fastmath=_FAST)
def _box_muller(key, m, p):
    radius = p * math.sqrt(-2.0 * math.log(uniform_at(key, m)))
    angle = 2.0 * math.pi * uniform_at(key, m + 1)
    return radius * math.cos(angle), radius * math.sin(angle)


@nb.njit(nogil=True, cache=True, fastmath=_FAST)
def _seg_gaussian(key, p, xi, lo, hi):
    # Box-Muller on the aligned counter pair (2m, 2m+1): cos for even j, sin for odd j
    acc = 0.0
    ab = 0.0
    j = lo
    if j < hi and j & 1:
        x = _box_muller(key, j - 1, p)[1] * xi[j]
        acc += x
        ab += abs(x)
        j += 1
    while j + 1 < hi:
        c, s = _box_muller(key, j, p)
        x0 = c * xi[j]
        x1 = s * xi[j + 1]
        acc += x0 + x1
        ab += abs(x0) + abs(x1)
        j += 2
    if j < hi:
        x = _box_muller(key, j, p)[0] * xi[j]
        acc += x
        ab += abs(x)
    return acc, ab


@nb.njit(inline="always")
def _segment(key, code, p, xi, lo, hi):
    if code == 0:
        return _seg_uniform01(key, p, xi, lo, hi)
    if code == 1:
        return _seg_uniform_sym(key, p, xi, lo, hi)
    if code == 2:
        return _seg_exponential(key, p, xi, lo, hi)
    if code == 3:
        return _seg_logistic(key, p, xi, lo, hi)
    return _seg_gaussian(key, p, xi, lo, hi)


@nb.njit(nogil=True, cache=True)
def _fill(keys, code, p, xi, edges, tails, y_ref, y_abs):
    G = edges.shape[0] - 2
    seg = np.empty(G + 1)
    for s in range(keys.shape[0]):
        ab = 0.0
        for g in range(G + 1):
            a, b = _segment(keys[s], code, p, xi, edges[g], edges[g + 1])
            seg[g] = a
            ab += b
        acc = 0.0
        for g in range(G, 0, -1):
            acc += seg[g]
            tails[s, g - 1] = acc
        y_ref[s] = acc + seg[0]
        y_abs[s] = ab


@dataclass
class PathSums:
    """Partial sums of N sampled paths.

    ``tails[:, g]`` is Y_{K_ref} - Y_{k_g}, accumulated segment by segment so
    that small tails keep full relative precision.
    """

    k_grid: tuple[int, ...]
    k_ref: int
    y_ref: np.ndarray
    tails: np.ndarray
    y_abs: np.ndarray
    shift: float

    @property
    def n(self) -> int:
        return self.y_ref.shape[0]

    def column(self, k: int) -> int:
        try:
            return self.k_grid.index(k)
        except ValueError:
            raise ArgumentError(f"k={k} is not in the sampled grid {self.k_grid}") from None

    @property
    def y_inf(self) -> np.ndarray:
        """Surrogate for Y_inf: Y_{K_ref} plus the mean of the neglected tail."""
        return self.y_ref + self.shift

    def y_k(self, k: int) -> np.ndarray:
        return self.y_ref - self.tails[:, self.column(k)]

    def delta(self, k: int) -> np.ndarray:
        """Surrogate for Y_inf - Y_k."""
        return self.tails[:, self.column(k)] + self.shift


def _validate_grid(seq, config):
    if config.k_grid[-1] == config.k_ref and not (
            isinstance(seq, FiniteList) and len(seq) <= config.k_ref):
        raise ArgumentError("k_grid may reach K_ref only when the sequence vanishes past K_ref")


def sample_paths(measure: MeasureSpec, seq: CoefficientSequence, config: McConfig,
                 workers: int = 1, stream: int = X_STREAM) -> PathSums:
    _validate_grid(seq, config)
    n, K = config.n, config.k_ref
    xi = np.ascontiguousarray(seq.xi_array(K))
    edges = np.array((0,) + config.k_grid + (K,), dtype=np.int64)
    G = len(config.k_grid)
    tails = np.empty((n, G))
    y_ref = np.empty(n)
    y_abs = np.empty(n)
    code = ms.KIND_CODE[measure.kind]
    p = float(measure.param)
    base = stream_base(config.seed, stream)

    def run(start):
        stop = min(start + BLOCK, n)
        keys = sample_keys(np.uint64(base), start, stop - start)
        _fill(keys, code, p, xi, edges, tails[start:stop], y_ref[start:stop], y_abs[start:stop])

    starts = range(0, n, BLOCK)
    if workers <= 1:
        for s in starts:
            run(s)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, starts))
    shift = ms.mean(measure) * seq.tail_signed_sum(K)
    return PathSums(config.k_grid, K, y_ref, tails, y_abs, shift)


def _paths(measure, seq, config, paths, workers, stream=X_STREAM) -> PathSums:
    if paths is None:
        return sample_paths(measure, seq, config, workers, stream)
    if paths.k_ref != config.k_ref or paths.n != config.n:
        raise ArgumentError("supplied paths do not match the configuration")
    return paths


# ---------------------------------------------------------------- bias accounting


def _tail_var(measure, seq, K) -> float:
    """E B^2 for the centred neglected tail."""
    return ms.variance(measure) * seq.tail_sq_sum(K)


def _central4(measure) -> float:
    """E(X - mu)^4; every measure here is symmetric or nonnegative."""
    mu = ms.mean(measure)
    m3 = ms.moment_abs(measure, 3) if measure.nonnegative else 0.0
    return (ms.moment_abs(measure, 4) - 4 * mu * m3 + 6 * mu * mu * ms.moment_abs(measure, 2)
            - 3 * mu**4)


def _centred_tail_norm(measure, seq, K, q: int) -> float:
    """Upper bound on the L_q norm of B (q >= 2 integer)."""
    if q == 2:
        return math.sqrt(_tail_var(measure, seq, K))
    if q <= 4:
        # exact fourth moment of a sum of independent centred terms
        s2 = ms.variance(measure)
        t2 = seq.tail_sq_sum(K)
        t4 = _tail_pow4(seq, K)
        e4 = t4 * (_central4(measure) - 3 * s2 * s2) + 3 * (s2 * t2) ** 2
        return max(e4, 0.0) ** 0.25
    t = seq.tail_abs_sum(K)
    return ms.c_constant(measure, q) ** (1.0 / q) * t + abs(ms.mean(measure)) * t


def _tail_pow4(seq, K) -> float:
    """sum_{j > K} xi_j^4."""
    if isinstance(seq, FiniteList):
        return math.fsum(v**4 for v in seq.values[K:])
    return PowerLaw(4 * seq.a).tail_abs_sum(K)


# one-sided Hoeffding level for the data-dependent bias certificate
HOEFFDING_DELTA = 1e-6


def conditional_bias_terms(a: np.ndarray, p: float, v: float) -> np.ndarray:
    """Per-path bound on |E_B|a + B|^p - |a|^p| for p <= 1, E B = 0, E B^2 = v.

    |a + b|^p - |a|^p is at most |b|^p, and at most 2^(1-p) p |a|^(p-1) |b|
    when |b| <= |a|/2; Markov's inequality handles |b| > |a|/2.
    """
    cap = v ** (p / 2)
    a = np.abs(np.asarray(a, dtype=np.float64))
    with np.errstate(divide="ignore", over="ignore"):
        near = (2.0 ** (1 - p) * p * math.sqrt(v) * a ** (p - 1)
                + (2.0 / a) ** (2 - p) * v)
    return np.minimum(cap, np.where(a > 0, near, cap))


def _conditional_bias(delta: np.ndarray, p: float, v: float) -> float:
    """Path average of the per-path bounds, lifted to the mean by Hoeffding."""
    if v == 0:
        return 0.0
    g = conditional_bias_terms(delta, p, v)
    cap = v ** (p / 2)
    return float(np.mean(g)) + cap * math.sqrt(math.log(1 / HOEFFDING_DELTA) / (2 * g.shape[0]))


def moment_bias(measure, seq, k: int, K: int, p: float, delta: np.ndarray | None = None) -> float:
    """Bound on |E|Y_inf - Y_k|^p - E|surrogate - Y_k|^p|.

    With the sampled differences ``delta`` and p <= 1 a sharper
    data-dependent bound is used (valid with probability 1 - HOEFFDING_DELTA).
    """
    if p <= 1:
        # |a + b|^p <= |a|^p + |b|^p, then Jensen on E|B|^p
        v = _tail_var(measure, seq, K)
        if delta is not None:
            return _conditional_bias(delta, p, v)
        return v ** (p / 2)
    q = 2 if p <= 2 else (4 if p <= 4 else math.ceil(p))
    b = _centred_tail_norm(measure, seq, K, q)
    if q == 2:
        a = math.sqrt(bd._second_moment_tail(measure, seq, k))
    else:
        a = ms.c_constant(measure, q) ** (1.0 / q) * seq.tail_abs_sum(k)
    return p * (a + b) ** (p - 1) * b


def _sqrt_bias(delta_m: float, m_hat: float) -> float:
    """Effect on sqrt(m) of an error delta_m in m."""
    if delta_m == 0:
        return 0.0
    out = math.sqrt(delta_m)
    if m_hat > 0:
        out = min(out, delta_m / math.sqrt(m_hat))
    return out


def _sup_pair(measure, seq, K) -> float:
    """Bound on |Y_inf|, |surrogate| and |Y_inf - surrogate| for bounded support."""
    return measure.sup_abs * seq.total_abs() + abs(ms.mean(measure)) * seq.tail_abs_sum(K)


def kernel_bias(kernel, measure, seq, K: int, mode=None) -> float | None:
    """Bound on |e(true) - e(surrogate, truncated kernel)|; ``None`` if uncertifiable.

    By the triangle inequality in L2(omega; G) the surrogate error is at most
    the kernel error between Y_inf and its surrogate, which the kernel's own
    modulus bounds in terms of E B^2 (or higher moments of B).
    """
    v = _tail_var(measure, seq, K)
    bounded = math.isfinite(measure.sup_abs)
    if isinstance(kernel, FractionalWiener):
        return v ** (kernel.beta / 2)
    if isinstance(kernel, Korobov):
        series = math.sqrt(8.0 * kernel.tail_mass)
        return 2.0 * math.sqrt(2.0) * math.pi * korobov_Cr(kernel.weight) * math.sqrt(v) + series
    if isinstance(kernel, Hermite):
        if not bounded:
            return None
        S = _sup_pair(measure, seq, K)
        env = math.sqrt(2.0 * math.pi) * math.exp(S * S / 2.0)
        surrogate = bd.CRAMER_C * math.sqrt(env * hermite_V(kernel.weight) * v)
        return surrogate + math.sqrt(4.0 * env * kernel.tail_mass)
    if isinstance(kernel, (RFoldedWiener, TwoSidedRFolded)):
        r = kernel.r
        cr = bd.c_r(r)
        if bounded:
            return cr * _sup_pair(measure, seq, K) ** (r - 1.5) * math.sqrt(v)
        q = 4 * r - 6
        b4 = _centred_tail_norm(measure, seq, K, 4)
        top = (ms.c_constant(measure, q) ** (1.0 / q) * seq.total_abs()
               + _centred_tail_norm(measure, seq, K, q))
        return cr * b4 * top ** (r - 1.5)
    return None


# ---------------------------------------------------------------- estimators


def _mean_se(vals: np.ndarray) -> tuple[float, float]:
    n = vals.shape[0]
    m = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return m, se


def _sqrt_estimate(m: float, se_m: float) -> tuple[float, float]:
    # delta method; zero short-circuits
    if m <= 0:
        return 0.0, 0.0
    v = math.sqrt(m)
    return v, se_m / (2.0 * v)


def estimate_moment(measure: MeasureSpec, seq: CoefficientSequence, k: int, exponent: float,
                    config: McConfig, paths: PathSums | None = None,
                    workers: int = 1) -> McEstimate:
    """Mean of |Y_inf - Y_k|^exponent over paths."""
    if not (exponent > 0 and math.isfinite(exponent)):
        raise ArgumentError(f"exponent must be positive, got {exponent!r}")
    if k not in config.k_grid:
        raise ArgumentError(f"k={k} is not in k_grid {config.k_grid}")
    P = _paths(measure, seq, config, paths, workers)
    d = P.delta(k)
    vals = np.abs(d) ** exponent
    m, se = _mean_se(vals)
    return McEstimate(m, se, P.n, P.k_ref, moment_bias(measure, seq, k, P.k_ref, exponent, d))


def _check_kernel_measure(kernel, measure, seq):
    if isinstance(kernel, RFoldedWiener):
        if not measure.nonnegative:
            raise ArgumentError(f"{kernel.label()} needs a nonnegative measure, "
                                f"got {measure.label()}")
        if not seq.nonnegative:
            raise ArgumentError(f"{kernel.label()} needs xi_j >= 0")


def estimate_err_kernel(kernel, measure: MeasureSpec, seq: CoefficientSequence, k: int,
                        config: McConfig, paths: PathSums | None = None, workers: int = 1,
                        mode=None) -> McEstimate:
    """sqrt(E[K(Y_inf,Y_inf) + K(Y_k,Y_k) - 2K(Y_inf,Y_k)])."""
    _check_kernel_measure(kernel, measure, seq)
    if k not in config.k_grid:
        raise ArgumentError(f"k={k} is not in k_grid {config.k_grid}")
    P = _paths(measure, seq, config, paths, workers)
    vals = kernel.sq_distance(P.y_inf, P.y_k(k))
    m, se_m = _mean_se(vals)
    value, se = _sqrt_estimate(m, se_m)
    bias = kernel_bias(kernel, measure, seq, P.k_ref, mode)
    if isinstance(kernel, FractionalWiener):
        dm = moment_bias(measure, seq, k, P.k_ref, 2 * kernel.beta, P.delta(k))
        bias = min(bias, _sqrt_bias(dm, m))
    certified = bias is not None
    return McEstimate(value, se, P.n, P.k_ref, bias if certified else 0.0, certified)


def estimate_e1(kernel, measure: MeasureSpec, seq: CoefficientSequence, k: int,
                config: McConfig, x_paths: PathSums | None = None,
                z_paths: PathSums | None = None, workers: int = 1) -> McEstimate:
    """Error of approximating E g(Y_inf) by E g(Y_k), averaged over g.

    Path i of the x-stream is paired with path i of an independent z-stream;
    the bracket is symmetrized in (x, z), which leaves its expectation intact.
    """
    _check_kernel_measure(kernel, measure, seq)
    if k not in config.k_grid:
        raise ArgumentError(f"k={k} is not in k_grid {config.k_grid}")
    X = _paths(measure, seq, config, x_paths, workers, X_STREAM)
    Z = _paths(measure, seq, config, z_paths, workers, Z_STREAM)
    ax, bx = X.y_inf, X.y_k(k)
    az, bz = Z.y_inf, Z.y_k(k)
    K = kernel.eval
    vals = K(ax, az) - K(ax, bz) - K(bx, az) + K(bx, bz)
    m, se_m = _mean_se(vals)
    clamped = m < 0
    value, se = _sqrt_estimate(max(m, 0.0), se_m)
    if clamped:
        se = math.sqrt(se_m)
    bias = kernel_bias(kernel, measure, seq, X.k_ref)
    certified = bias is not None
    return McEstimate(value, se, X.n, X.k_ref, bias if certified else 0.0, certified, clamped)


def estimate_exp_abs_sq(measure: MeasureSpec, seq: CoefficientSequence, config: McConfig,
                        paths: PathSums | None = None, workers: int = 1) -> McEstimate:
    """E exp(Y_abs^2) at depth K_ref; increasing in K_ref, so biased low."""
    P = _paths(measure, seq, config, paths, workers)
    sq = P.y_abs**2
    worst = float(sq.max())
    if worst > 700.0:
        raise NumericError(f"exp(Y_abs^2) overflows: max Y_abs = {math.sqrt(worst):.6g}",
                           achieved=worst)
    m, se = _mean_se(np.exp(sq))
    if math.isfinite(measure.sup_abs):
        S = measure.sup_abs * seq.total_abs()
        d = measure.sup_abs * seq.tail_abs_sum(P.k_ref)
        return McEstimate(m, se, P.n, P.k_ref, math.exp(S * S) * math.expm1(2 * S * d + d * d))
    return McEstimate(m, se, P.n, P.k_ref, 0.0, bias_certified=False)


# ---------------------------------------------------------------- sweeps


@dataclass(frozen=True)
class SweepRow:
    k: int
    estimate: McEstimate
    bound: bd.BoundReport
    ratio: float


def _holder_estimate(holder: HolderClass, measure, seq, k, config, P) -> McEstimate:
    mom = estimate_moment(measure, seq, k, 2 * holder.beta, config, paths=P)
    v, se = _sqrt_estimate(mom.value, mom.std_error)
    return McEstimate(holder.C * v, holder.C * se, mom.n, mom.k_ref,
                      holder.C * _sqrt_bias(mom.bias_bound, mom.value))


def _ratio(bound: float, est: float) -> float:
    if est == 0:
        return 1.0 if bound == 0 else math.inf
    return bound / est


def sweep(target, measure: MeasureSpec, seq: CoefficientSequence, config: McConfig,
          mode: Mode | str | None = None, workers: int = 1,
          paths: PathSums | None = None) -> list[SweepRow]:
    """Estimate and bound the error at every k in the grid."""
    if mode is None:
        mode = bd.default_mode(target, measure)
    P = _paths(measure, seq, config, paths, workers)
    exp_moment = None
    if isinstance(target, Hermite) and Mode(mode) is Mode.SPLIT_EXP:
        exp_moment = estimate_exp_abs_sq(measure, seq, config, paths=P)
    rows = []
    for k in config.k_grid:
        if isinstance(target, HolderClass):
            est = _holder_estimate(target, measure, seq, k, config, P)
        else:
            est = estimate_err_kernel(target, measure, seq, k, config, paths=P, mode=mode)
        if (config.enforce_bias and est.bias_certified
                and est.bias_bound > BIAS_RATIO * est.std_error):
            raise ConfigurationError(
                f"k={k}: surrogate bias bound {est.bias_bound:.3g} exceeds "
                f"{BIAS_RATIO} x std error {est.std_error:.3g}; increase K_ref")
        bound = bd.bound_for(target, measure, seq, k, mode, exp_moment)
        rows.append(SweepRow(k, est, bound, _ratio(bound.value, est.value)))
    return rows


def fit_decay_rate(rows) -> tuple[float, float, float]:
    """Least-squares line through (log k, log estimate); returns (slope, intercept, rms residual)."""
    pts = []
    for row in rows:
        if isinstance(row, SweepRow):
            k, v = row.k, row.estimate.value
        else:
            k, v = row
            v = getattr(v, "value", v)
        if k >= 1 and v > 0:
            pts.append((math.log(k), math.log(v)))
    if len(pts) < 3:
        raise ArgumentError(f"need at least 3 rows with k >= 1 and positive estimates, got {len(pts)}")
    x, y = np.array(pts).T
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return float(slope), float(intercept), float(np.sqrt(np.mean(resid**2)))
