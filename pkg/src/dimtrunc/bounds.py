"""Closed-form truncation-error bounds.

Each public ``*_bound`` returns a :class:`BoundReport` tagged with the formula
that produced it. Where two certified bounds apply, the smaller is reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from . import measures as ms
from .coefficients import CoefficientSequence, PowerLaw, zeta
from .errors import ArgumentError, RefusedPrecondition
from .kernels import (FractionalWiener, Hermite, Korobov, RFoldedWiener, TwoSidedRFolded,
                      hermite_V, korobov_Cr)
from .measures import MeasureSpec

# smallest constant c with min{1, sqrt(pi) (l-1)^(-1/12)} <= c l^(-1/12) for l >= 2
CRAMER_C = 2.0 ** (1.0 / 12.0) * math.sqrt(math.pi)


class FormulaId(str, Enum):
    FR1 = "FR1"
    GEN_BETA = "GEN_BETA"
    ZERO_MEAN = "ZERO_MEAN"
    POWER_M = "POWER_M"
    RFOLD_B = "RFOLD_B"
    RFOLD_U = "RFOLD_U"
    TWOSIDED_B = "TWOSIDED_B"
    TWOSIDED_U = "TWOSIDED_U"
    KOROBOV = "KOROBOV"
    HERMITE_B = "HERMITE_B"
    HERMITE_S = "HERMITE_S"


class Mode(str, Enum):
    BOUNDED = "bounded"
    UNBOUNDED = "unbounded"
    BOUNDED_EXP = "bounded_exp"
    SPLIT_EXP = "split_exp"


@dataclass(frozen=True)
class HolderClass:
    C: float
    beta: float

    def __post_init__(self):
        if not (self.C > 0 and math.isfinite(self.C)):
            raise ArgumentError(f"Hoelder constant must be positive, got {self.C!r}")
        if not (0 < self.beta <= 1):
            raise ArgumentError(f"Hoelder exponent must lie in (0, 1], got {self.beta!r}")

    def label(self) -> str:
        return f"holder(C={self.C!r}, beta={self.beta!r})"


@dataclass(frozen=True)
class BoundReport:
    k: int
    value: float
    formula_id: FormulaId
    assumptions: tuple[str, ...] = ()
    inputs: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not (self.value >= 0 and math.isfinite(self.value)):
            raise ArgumentError(f"bound value must be finite and >= 0, got {self.value!r}")


PUBLISHED_REPRESENTATIVE = "xi_j = j^-a taken as the extremal member of |xi_j| <= j^-a"


def _inputs(measure, seq, k, **extra) -> dict:
    d = {"measure": measure.label(), "sequence": seq.label(), "k": k}
    d.update(extra)
    return d


def _seq_assumptions(seq) -> tuple[str, ...]:
    return (PUBLISHED_REPRESENTATIVE,) if isinstance(seq, PowerLaw) else ()


def _second_moment_tail(measure, seq, k) -> float:
    """E(Y_inf - Y_k)^2 = (mean * sum xi)^2 + Var * sum xi^2."""
    return ((ms.mean(measure) * seq.tail_signed_sum(k)) ** 2
            + ms.variance(measure) * seq.tail_sq_sum(k))


# ---------------------------------------------------------------- Hoelder / moments


def holder_moment_candidates(measure: MeasureSpec, seq: CoefficientSequence, k: int,
                             beta: float) -> dict[FormulaId, float]:
    """All applicable upper bounds on E|Y_inf - Y_k|^(2 beta)."""
    if not (0 < beta <= 1):
        raise ArgumentError(f"beta must lie in (0, 1], got {beta!r}")
    out = {}
    if beta <= 0.5:
        out[FormulaId.FR1] = (ms.moment_abs(measure, 1) * seq.tail_abs_sum(k)) ** (2 * beta)
    tag = FormulaId.ZERO_MEAN if ms.mean(measure) == 0 else FormulaId.GEN_BETA
    out[tag] = _second_moment_tail(measure, seq, k) ** beta
    return out


def holder_moment_bound(measure: MeasureSpec, seq: CoefficientSequence, k: int,
                        beta: float) -> float:
    return min(holder_moment_candidates(measure, seq, k, beta).values())


def _winner(cands: dict[FormulaId, float]) -> FormulaId:
    return min(cands, key=lambda f: (cands[f], f.value))


def holder_error_bound(holder: HolderClass, measure: MeasureSpec, seq: CoefficientSequence,
                       k: int) -> BoundReport:
    cands = holder_moment_candidates(measure, seq, k, holder.beta)
    fid = _winner(cands)
    return BoundReport(k, holder.C * math.sqrt(cands[fid]), fid, _seq_assumptions(seq),
                       _inputs(measure, seq, k, C=holder.C, beta=holder.beta))


def fractional_wiener_bound(kernel: FractionalWiener, measure, seq, k) -> BoundReport:
    """The fractional Wiener error equals sqrt(E|Y_inf - Y_k|^(2 beta)) exactly."""
    rep = holder_error_bound(HolderClass(1.0, kernel.beta), measure, seq, k)
    return BoundReport(k, rep.value, rep.formula_id,
                       rep.assumptions + ("kernel error equals the 2*beta tail moment",),
                       _inputs(measure, seq, k, kernel=kernel.label()))


def gp_space_params(p: float) -> HolderClass:
    """Hoelder class (C=1, beta=1/p*) of G_p, with 1/p + 1/p* = 1."""
    if not p > 1:
        raise ArgumentError(f"p must exceed 1, got {p!r}")
    if math.isinf(p):
        return HolderClass(1.0, 1.0)
    return HolderClass(1.0, 1.0 - 1.0 / p)


def power_moment_bound(measure: MeasureSpec, seq: CoefficientSequence, k: int, M: int) -> float:
    """C(M, omega) (sum_{j > k} |xi_j|)^M bounds E|Y_inf - Y_k|^M."""
    return ms.c_constant(measure, M) * seq.tail_abs_sum(k) ** M


# ---------------------------------------------------------------- r-folded kernels


def c_r(r: int) -> float:
    if isinstance(r, bool) or int(r) != r or r < 2:
        raise ArgumentError(f"r must be an integer >= 2, got {r!r}")
    return math.sqrt(1.0 / (2 * r - 1) + (r - 1) ** 2 / (2 * r - 3)) / math.factorial(r - 1)


def c_r_simple(r: int) -> float:
    """sqrt(2r/3)/(r-1)!, an upper bound on c_r for every r >= 2."""
    c_r(r)
    return math.sqrt(2.0 * r / 3.0) / math.factorial(r - 1)


def sup_abs_sum(measure: MeasureSpec, seq: CoefficientSequence) -> float:
    """ess sup of Y_abs = sum |x_j xi_j|; refuses unbounded support."""
    if not math.isfinite(measure.sup_abs):
        raise RefusedPrecondition(
            f"{measure.label()} has unbounded support: no certified sup of the absolute series",
            precondition="bounded support")
    return measure.sup_abs * seq.total_abs()


def _check_nonneg(measure, seq):
    if not measure.nonnegative:
        raise ArgumentError(f"r-folded kernel lives on [0, inf): {measure.label()} can be negative")
    if not seq.nonnegative:
        raise ArgumentError("r-folded kernel needs xi_j >= 0")


def _unbounded_factor(measure, r) -> float:
    return (ms.c_constant(measure, 4) * ms.c_constant(measure, 4 * r - 6)) ** 0.25


def rfolded_bound(measure: MeasureSpec, seq: CoefficientSequence, k: int, r: int,
                  mode: Mode | str = Mode.BOUNDED) -> BoundReport:
    mode = Mode(mode)
    _check_nonneg(measure, seq)
    cr = c_r(r)
    inputs = _inputs(measure, seq, k, r=r, mode=mode.value)
    if mode is Mode.BOUNDED:
        sup = sup_abs_sum(measure, seq)
        val = cr * sup ** (r - 1.5) * math.sqrt(_second_moment_tail(measure, seq, k))
        return BoundReport(k, val, FormulaId.RFOLD_B,
                           _seq_assumptions(seq) + (f"sup Y_inf = {sup!r}",), inputs)
    if mode is not Mode.UNBOUNDED:
        raise ArgumentError(f"mode {mode.value} does not apply to the r-folded kernel")
    val = (cr * _unbounded_factor(measure, r) * seq.tail_signed_sum(k)
           * seq.total_abs() ** (r - 1.5))
    return BoundReport(k, val, FormulaId.RFOLD_U,
                       _seq_assumptions(seq) + (f"E Y_inf^{4 * r - 6} finite",), inputs)


def twosided_bound(measure: MeasureSpec, seq: CoefficientSequence, k: int, r: int,
                   mode: Mode | str = Mode.BOUNDED) -> BoundReport:
    mode = Mode(mode)
    cr = c_r(r)
    inputs = _inputs(measure, seq, k, r=r, mode=mode.value)
    if mode is Mode.BOUNDED:
        sup = sup_abs_sum(measure, seq)
        val = cr * sup ** (r - 1.5) * math.sqrt(_second_moment_tail(measure, seq, k))
        return BoundReport(k, val, FormulaId.TWOSIDED_B,
                           _seq_assumptions(seq) + (f"sup Y_abs = {sup!r}",), inputs)
    if mode is not Mode.UNBOUNDED:
        raise ArgumentError(f"mode {mode.value} does not apply to the two-sided kernel")
    val = (cr * _unbounded_factor(measure, r) * seq.tail_abs_sum(k)
           * seq.total_abs() ** (r - 1.5))
    return BoundReport(k, val, FormulaId.TWOSIDED_U,
                       _seq_assumptions(seq) + (
                           f"E Y_abs^{4 * r - 6} finite",
                           "tails taken as sums of |xi_j|"), inputs)


# ---------------------------------------------------------------- series kernels


def korobov_bound(measure: MeasureSpec, seq: CoefficientSequence, k: int,
                  weight) -> BoundReport:
    Cr = korobov_Cr(weight)
    val = 2.0 * math.sqrt(2.0) * math.pi * Cr * math.sqrt(holder_moment_bound(measure, seq, k, 1.0))
    return BoundReport(k, val, FormulaId.KOROBOV, _seq_assumptions(seq),
                       _inputs(measure, seq, k, weight=weight.label(), C_r=Cr))


def sup_exp_half_sq(measure: MeasureSpec, seq: CoefficientSequence) -> float:
    """ess sup of exp(Y_abs^2 / 2)."""
    s = sup_abs_sum(measure, seq)
    return math.exp(s * s / 2.0)


def hermite_bound(measure: MeasureSpec, seq: CoefficientSequence, k: int, weight,
                  mode: Mode | str = Mode.BOUNDED_EXP, exp_moment=None) -> BoundReport:
    """Hermite-kernel bound; ``exp_moment`` is an estimate of E exp(Y_abs^2) (split mode)."""
    mode = Mode(mode)
    V = hermite_V(weight)
    base = math.sqrt(2.0 * math.pi) * V
    inputs = _inputs(measure, seq, k, weight=weight.label(), V=V, mode=mode.value)
    cramer = f"Cramer constant c = 2^(1/12) sqrt(pi) = {CRAMER_C!r}"
    if mode is Mode.BOUNDED_EXP:
        sup = sup_exp_half_sq(measure, seq)
        val = CRAMER_C * math.sqrt(base * sup * holder_moment_bound(measure, seq, k, 1.0))
        return BoundReport(k, val, FormulaId.HERMITE_B,
                           _seq_assumptions(seq) + (cramer, f"sup exp(Y_abs^2/2) = {sup!r}"),
                           inputs)
    if mode is not Mode.SPLIT_EXP:
        raise ArgumentError(f"mode {mode.value} does not apply to the Hermite kernel")
    if exp_moment is None:
        raise ArgumentError("split mode needs an estimate of E exp(Y_abs^2)")
    em = float(getattr(exp_moment, "value", exp_moment))
    if not (em >= 1 and math.isfinite(em)):
        raise ArgumentError(f"E exp(Y_abs^2) must be a finite value >= 1, got {em!r}")
    fourth = power_moment_bound(measure, seq, k, 4)
    val = CRAMER_C * math.sqrt(base * math.sqrt(em) * math.sqrt(fourth))
    return BoundReport(k, val, FormulaId.HERMITE_S,
                       _seq_assumptions(seq) + (
                           cramer, f"E exp(Y_abs^2) estimated as {em!r} (Monte Carlo, not certified)"),
                       inputs)


# ---------------------------------------------------------------- worked examples


def uniform01_rfolded_example(r: int, a: float, k: int) -> float:
    """c_{r,a} / (k + 1/2)^(a-1), valid for k >= 1 under Uniform01, xi_j = j^-a."""
    if k < 1:
        raise ArgumentError("the closed form needs k >= 1")
    c = (math.sqrt(r / 6.0) * zeta(a) ** (r - 1.5) / math.factorial(r - 1)
         * math.sqrt(1.0 / (a - 1) ** 2 + 2.0 / (9.0 * (2 * a - 1))))
    return c / (k + 0.5) ** (a - 1)


def exponential_rfolded_example(r: int, a: float, lam: float, k: int) -> float:
    """c_{r,lambda} / (k + 1/2)^(a-1) for the exponential measure."""
    c = (2.0 * math.sqrt(r) * lam ** (r - 0.5) * float(math.factorial(4 * r - 6)) ** 0.25
         * zeta(a) ** (r - 1.5) / (math.factorial(r - 1) * (a - 1)))
    return c / (k + 0.5) ** (a - 1)


def uniform_sym_twosided_example(r: int, seq: CoefficientSequence, k: int) -> float:
    return c_r(r) * (0.5 * seq.total_abs()) ** (r - 1.5) * math.sqrt(seq.tail_sq_sum(k) / 12.0)


def gaussian_twosided_example(r: int, variance: float, seq: CoefficientSequence, k: int) -> float:
    s = math.sqrt(variance)
    fac = (s ** (4 * r - 2) * 3.0 * ms.double_factorial(4 * r - 7)) ** 0.25
    return c_r(r) * fac * seq.tail_abs_sum(k) * seq.total_abs() ** (r - 1.5)


def uniform_sym_korobov_example(weight, seq: CoefficientSequence, k: int) -> float:
    return math.sqrt(2.0 / 3.0) * math.pi * korobov_Cr(weight) * math.sqrt(seq.tail_sq_sum(k))


def gaussian_korobov_example(weight, variance: float, seq: CoefficientSequence, k: int) -> float:
    return (2.0 * math.sqrt(2.0) * math.pi * korobov_Cr(weight) * math.sqrt(variance)
            * math.sqrt(seq.tail_sq_sum(k)))


def uniform_sym_hermite_example(weight, a: float, k: int) -> float:
    """Power-law closed form of the bounded-exponential Hermite bound under UniformSym."""
    c_tilde = CRAMER_C * math.sqrt(math.sqrt(2.0 * math.pi) * hermite_V(weight) / 12.0)
    return (c_tilde * math.exp(zeta(a) ** 2 / 16.0) / math.sqrt(2 * a - 1)
            / (k + 0.5) ** (a - 0.5))


def holder_fr1_example(C: float, beta: float, m1: float, a: float, k: int) -> float:
    return C * m1**beta / ((a - 1) ** beta * (k + 0.5) ** (beta * (a - 1)))


def holder_zero_mean_example(C: float, beta: float, m2: float, a: float, k: int) -> float:
    return C * m2 ** (beta / 2) / ((2 * a - 1) ** (beta / 2) * (k + 0.5) ** (beta * (a - 0.5)))


# ---------------------------------------------------------------- dispatch


def default_mode(target, measure: MeasureSpec) -> Mode | None:
    if isinstance(target, (RFoldedWiener, TwoSidedRFolded)):
        return Mode.BOUNDED if math.isfinite(measure.sup_abs) else Mode.UNBOUNDED
    if isinstance(target, Hermite):
        return Mode.BOUNDED_EXP if math.isfinite(measure.sup_abs) else Mode.SPLIT_EXP
    return None


def bound_for(target, measure: MeasureSpec, seq: CoefficientSequence, k: int,
              mode: Mode | str | None = None, exp_moment=None) -> BoundReport:
    """Best certified bound for a kernel or Hoelder class at truncation level k."""
    if mode is None:
        mode = default_mode(target, measure)
    if isinstance(target, HolderClass):
        return holder_error_bound(target, measure, seq, k)
    if isinstance(target, FractionalWiener):
        return fractional_wiener_bound(target, measure, seq, k)
    if isinstance(target, RFoldedWiener):
        return rfolded_bound(measure, seq, k, target.r, mode)
    if isinstance(target, TwoSidedRFolded):
        return twosided_bound(measure, seq, k, target.r, mode)
    if isinstance(target, Korobov):
        return korobov_bound(measure, seq, k, target.weight)
    if isinstance(target, Hermite):
        return hermite_bound(measure, seq, k, target.weight, mode, exp_moment)
    raise ArgumentError(f"no bound for target {target!r}")
