from __future__ import annotations

import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dimtrunc import measures as ms
from dimtrunc._rng import RngStream
from dimtrunc.errors import ArgumentError

ALL = [ms.uniform01(), ms.uniform_sym(), ms.exponential(1.5), ms.logistic(0.7), ms.gaussian(2.0)]


def _density_oracle(measure, r):
    """E|x|^r by mpmath quadrature of the density, independent of the library."""
    mp.mp.dps = 30
    k = measure.kind
    if k is ms.MeasureKind.UNIFORM01:
        return float(mp.quad(lambda x: x**r, [0, 1]))
    if k is ms.MeasureKind.UNIFORM_SYM:
        return float(mp.quad(lambda x: abs(x) ** r, [-0.5, 0, 0.5]))
    if k is ms.MeasureKind.EXPONENTIAL:
        lam = mp.mpf(measure.scale)
        return float(mp.quad(lambda x: x**r * mp.exp(-x / lam) / lam, [0, mp.inf]))
    if k is ms.MeasureKind.LOGISTIC:
        lam = mp.mpf(measure.scale)
        dens = lambda x: mp.exp(-x / lam) / (lam * (1 + mp.exp(-x / lam)) ** 2)  # noqa: E731
        return float(2 * mp.quad(lambda x: x**r * dens(x), [0, mp.inf]))
    s2 = mp.mpf(measure.variance)
    return float(2 * mp.quad(lambda x: x**r * mp.exp(-x * x / (2 * s2)) / mp.sqrt(2 * mp.pi * s2),
                             [0, mp.inf]))


# ---------------------------------------------------------------- construction


def test_kinds_and_support():
    assert ms.uniform01().nonnegative and ms.exponential().nonnegative
    for m in (ms.uniform_sym(), ms.logistic(), ms.gaussian()):
        assert m.symmetric and not m.nonnegative
    assert ms.uniform01().sup_abs == 1.0
    assert ms.uniform_sym().sup_abs == 0.5
    assert math.isinf(ms.gaussian().sup_abs)


@pytest.mark.parametrize("bad", [0.0, -1.0, math.inf, math.nan])
def test_invalid_parameters(bad):
    with pytest.raises(ArgumentError):
        ms.exponential(bad)
    with pytest.raises(ArgumentError):
        ms.gaussian(bad)


def test_parameter_required_only_where_meaningful():
    with pytest.raises(ArgumentError):
        ms.MeasureSpec(ms.MeasureKind.UNIFORM01, scale=2.0)
    with pytest.raises(ArgumentError):
        ms.MeasureSpec(ms.MeasureKind.GAUSSIAN, scale=2.0)


# ---------------------------------------------------------------- moments


def test_moment_examples():
    assert ms.moment_abs(ms.uniform01(), 2) == pytest.approx(1 / 3, rel=1e-15)
    assert ms.moment_abs(ms.exponential(2.0), 2) == pytest.approx(8.0, rel=1e-15)
    assert ms.moment_abs(ms.gaussian(1.0), 3) == pytest.approx(2 * math.sqrt(2 / math.pi), rel=1e-14)


@pytest.mark.parametrize("measure", ALL, ids=lambda m: m.kind.value)
@pytest.mark.parametrize("r", range(1, 11))
def test_moment_matches_density_quadrature(measure, r):
    assert ms.moment_abs(measure, r) == pytest.approx(_density_oracle(measure, r), rel=1e-8)


@pytest.mark.parametrize("r", range(1, 25))
def test_logistic_moment_matches_eta_series(r):
    # E|x|^r = 2 lam^r r! eta(r), eta the alternating zeta; eta(1) = log 2
    lam = 1.3
    eta = float(mp.altzeta(r)) if r > 1 else math.log(2)
    assert ms.moment_abs(ms.logistic(lam), r) == pytest.approx(
        2 * lam**r * math.factorial(r) * eta, rel=1e-10)


@pytest.mark.parametrize("r", [0, -1, 1.5, True])
def test_moment_order_validation(r):
    with pytest.raises(ArgumentError):
        ms.moment_abs(ms.uniform01(), r)


def test_moment_monotonicity():
    e = [ms.moment_abs(ms.exponential(1.0), r) for r in range(1, 12)]
    u = [ms.moment_abs(ms.uniform01(), r) for r in range(1, 12)]
    assert all(a < b for a, b in zip(e, e[1:]))
    assert all(a > b for a, b in zip(u, u[1:]))


def test_mean_variance():
    assert ms.mean(ms.uniform_sym()) == 0.0
    assert ms.variance(ms.uniform_sym()) == pytest.approx(1 / 12)
    assert ms.variance(ms.gaussian(4.0)) == 4.0
    assert ms.mean(ms.uniform01()) == 0.5
    assert ms.mean(ms.exponential(3.0)) == 3.0
    assert ms.variance(ms.exponential(3.0)) == 9.0
    assert ms.variance(ms.logistic(2.0)) == pytest.approx(4 * math.pi**2 / 3, rel=1e-15)


@pytest.mark.parametrize("measure", ALL, ids=lambda m: m.kind.value)
def test_variance_is_second_moment_minus_mean_squared(measure):
    v = ms.moment_abs(measure, 2) - ms.mean(measure) ** 2
    assert ms.variance(measure) == pytest.approx(v, rel=1e-12)


# ---------------------------------------------------------------- C(M, omega)


def test_double_factorial():
    assert ms.double_factorial(0) == 1
    assert ms.double_factorial(7) == 105
    assert ms.double_factorial(6) == 48
    with pytest.raises(ArgumentError):
        ms.double_factorial(-1)


def test_partitions_order_and_count():
    parts = list(ms.integer_partitions(5))
    assert parts[0] == (5,) and parts[-1] == (1, 1, 1, 1, 1)
    assert parts == sorted(parts, reverse=True)
    # partition numbers p(n)
    assert [len(list(ms.integer_partitions(n))) for n in range(1, 11)] == [
        1, 2, 3, 5, 7, 11, 15, 22, 30, 42]


def test_c_constant_examples():
    assert ms.c_constant_enum(ms.uniform01(), 4) == pytest.approx(0.2, rel=1e-15)
    assert ms.c_constant_enum(ms.gaussian(1.0), 4) == pytest.approx(3.0, rel=1e-15)
    assert ms.c_constant_closed(ms.uniform_sym(), 2) == ms.BoundValue(ms.BoundKind.EXACT, 1 / 12)
    iv = ms.c_constant_closed(ms.logistic(1.0), 3)
    assert iv.kind is ms.BoundKind.INTERVAL and (iv.lo, iv.hi) == (3.0, 12.0)
    ub = ms.c_constant_closed(ms.gaussian(1.0), 4)
    assert ub.kind is ms.BoundKind.UPPER_BOUND and ub.value == 3.0


def test_c_constant_uniform01_products():
    # partitions of 4 give products 1/5, 1/8, 1/9, 1/12, 1/16
    m = ms.uniform01()
    prods = sorted(math.prod(ms.moment_abs(m, r) for r in p) for p in ms.integer_partitions(4))
    assert prods == pytest.approx(sorted([1 / 5, 1 / 8, 1 / 9, 1 / 12, 1 / 16]))


@pytest.mark.parametrize("measure", ALL, ids=lambda m: m.kind.value)
def test_c_constant_m1_is_first_moment(measure):
    assert ms.c_constant_enum(measure, 1) == ms.moment_abs(measure, 1)


@pytest.mark.parametrize("M", range(1, 9))
def test_c_constant_closed_vs_enum(M):
    for m in (ms.uniform01(), ms.uniform_sym(), ms.exponential(1.7)):
        assert ms.c_constant_enum(m, M) == pytest.approx(ms.c_constant_closed(m, M).value, rel=1e-12)
    assert ms.c_constant_closed(ms.logistic(0.8), M).contains(ms.c_constant_enum(ms.logistic(0.8), M))
    g = ms.gaussian(1.7)
    e, ub = ms.c_constant_enum(g, M), ms.c_constant_closed(g, M)
    assert e <= ub.value * (1 + 1e-12)
    if M % 2 == 0:
        assert e == pytest.approx(ub.value, rel=1e-12)


def test_c_constant_guard():
    with pytest.raises(ArgumentError):
        ms.c_constant_enum(ms.uniform01(), ms.PARTITION_GUARD + 1)
    with pytest.raises(ArgumentError):
        ms.c_constant_enum(ms.uniform01(), 0)
    # above the guard the closed form (upper end) is used
    assert ms.c_constant(ms.uniform01(), 30) == pytest.approx(1 / 31)


@settings(max_examples=40, deadline=None)
@given(M=st.integers(1, 12), lam=st.floats(0.1, 5.0))
def test_c_constant_dominates_every_partition(M, lam):
    m = ms.exponential(lam)
    c = ms.c_constant_enum(m, M)
    for p in ms.integer_partitions(M):
        assert math.prod(ms.moment_abs(m, r) for r in p) <= c * (1 + 1e-12)


def test_bound_value_validation():
    with pytest.raises(ArgumentError):
        ms.BoundValue(ms.BoundKind.INTERVAL, lo=2.0, hi=1.0)
    with pytest.raises(ArgumentError):
        ms.BoundValue(ms.BoundKind.EXACT, value=-1.0)


# ---------------------------------------------------------------- sampling


def test_sample_deterministic():
    a = ms.sample(ms.uniform01(), RngStream(42), 3)
    b = ms.sample(ms.uniform01(), RngStream(42), 3)
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, ms.sample(ms.uniform01(), RngStream(43), 3))


def test_sample_continues_stream():
    s = RngStream(5)
    first = ms.sample(ms.gaussian(), s, 7)
    rest = ms.sample(ms.gaussian(), s, 9)
    whole = ms.sample(ms.gaussian(), RngStream(5), 16)
    assert np.array_equal(np.concatenate([first, rest]), whole)


@pytest.mark.parametrize("measure", ALL, ids=lambda m: m.kind.value)
def test_sample_moments_converge(measure):
    x = ms.sample(measure, RngStream(2024, stream=3), 1_000_000)
    for r in (1, 2):
        v = np.abs(x) ** r
        se = v.std(ddof=1) / math.sqrt(v.size)
        assert abs(v.mean() - ms.moment_abs(measure, r)) <= 5 * se
    se = x.std(ddof=1) / math.sqrt(x.size)
    assert abs(x.mean() - ms.mean(measure)) <= 5 * se


def test_sample_support():
    assert np.all(ms.sample(ms.uniform01(), RngStream(1), 10_000) > 0)
    u = ms.sample(ms.uniform_sym(), RngStream(1), 10_000)
    assert np.all(np.abs(u) < 0.5)
    assert np.all(ms.sample(ms.exponential(), RngStream(1), 10_000) > 0)
