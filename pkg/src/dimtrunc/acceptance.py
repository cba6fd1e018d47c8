"""Acceptance battery behind ``dimtrunc verify``.

Each check returns a :class:`CheckResult` carrying the inequality it tested
with the worst observed numbers. A check passes only if the inequality holds
and the check finished inside its wall-clock budget. Path sets shared between
checks are generated lazily and charged to the first check that needs them.
The ``tamper`` hook perturbs one named reference quantity so that negative
controls can confirm the corresponding check fails.
"""

from __future__ import annotations

import math
import sys
import tempfile
import time
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import integrate

from . import bounds as bd
from . import measures as ms
from ._rng import RngStream
from .coefficients import FiniteList, PowerLaw, tail_bracket
from .estimators import (McConfig, estimate_e1, estimate_err_kernel, estimate_moment,
                         fit_decay_rate, sample_paths)
from .kernels import (FractionalWiener, GeometricDecay, Hermite, Korobov, RFoldedWiener,
                      TwoSidedRFolded)

SEED = 20240917
TOTAL_BUDGET = 300.0
DOMINATION_GRID = (1, 2, 4, 8, 16, 32)
SHARED_GRID = tuple(range(1, 65))
N_BIG = K_BIG = 100_000


@dataclass
class CheckResult:
    number: int
    key: str
    title: str
    passed: bool
    detail: str
    elapsed: float = 0.0
    budget: float = math.inf

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status} [{self.number:02d}] {self.title}: {self.detail} "
                f"({self.elapsed:.2f} s / {self.budget:g} s)")


@dataclass
class Context:
    """Shared state for one battery run."""

    seed: int = SEED
    tamper: str | None = None
    warmup_seconds: float = 0.0
    results: list[CheckResult] = field(default_factory=list)

    def tampered(self, key: str) -> bool:
        return self.tamper == key

    def warmup(self):
        """Compile the sampling kernels once so no check pays for JIT."""
        t0 = time.perf_counter()
        cfg = McConfig(n=100, k_ref=8, seed=0, k_grid=(1,))
        for m in (ms.uniform01(), ms.uniform_sym(), ms.exponential(), ms.logistic(),
                  ms.gaussian()):
            sample_paths(m, PowerLaw(2.0), cfg)
            sample_paths(m, FiniteList((1.0, 0.5)), McConfig(n=100, k_ref=2, seed=0, k_grid=(1,)))
        self.warmup_seconds = time.perf_counter() - t0

    def big_config(self, grid=SHARED_GRID) -> McConfig:
        return McConfig(n=N_BIG, k_ref=K_BIG, seed=self.seed, k_grid=grid)

    @cached_property
    def sym_paths(self):
        return sample_paths(ms.uniform_sym(), PowerLaw(2.0), self.big_config())

    @cached_property
    def u01_paths(self):
        return sample_paths(ms.uniform01(), PowerLaw(2.0), self.big_config(DOMINATION_GRID))


def _rel(a: float, b: float) -> float:
    return abs(a - b) / abs(b) if b != 0 else abs(a)


# ---------------------------------------------------------------- checks


def check_constants(ctx: Context) -> tuple[bool, str]:
    bump = 1 + 1e-9 if ctx.tampered("constants") else 1.0
    worst = 0.0
    ok = True
    for m in (ms.uniform01(), ms.uniform_sym(), ms.exponential(1.0), ms.exponential(2.0)):
        for M in range(1, 9):
            closed = ms.c_constant_closed(m, M)
            ok &= closed.kind is ms.BoundKind.EXACT
            worst = max(worst, _rel(ms.c_constant_enum(m, M), closed.value * bump))
    inside = True
    for lam in (1.0, 2.0):
        m = ms.logistic(lam)
        for M in range(1, 9):
            iv = ms.c_constant_closed(m, M)
            inside &= iv.kind is ms.BoundKind.INTERVAL and iv.lo <= ms.c_constant_enum(m, M) <= iv.hi
    gauss_ok = True
    g_worst = 0.0
    for var in (1.0, 2.5):
        m = ms.gaussian(var)
        for M in range(1, 9):
            ub = ms.c_constant_closed(m, M)
            e = ms.c_constant_enum(m, M)
            gauss_ok &= ub.kind is ms.BoundKind.UPPER_BOUND and e <= ub.value * (1 + 1e-12)
            if M % 2 == 0:
                g_worst = max(g_worst, _rel(e, ub.value))
    ok = ok and inside and gauss_ok and worst <= 1e-12 and g_worst <= 1e-12
    return ok, (f"exact rel err {worst:.2e} <= 1e-12; logistic enum in interval: {inside}; "
                f"gaussian enum <= upper: {gauss_ok}, even-M rel err {g_worst:.2e} <= 1e-12")


def check_logistic_moments(ctx: Context) -> tuple[bool, str]:
    ok = True
    margin = math.inf
    for lam in (1.0, 2.0):
        m = ms.logistic(lam)
        for r in range(1, 9):
            v = ms.moment_abs(m, r)
            lo, hi = lam**r * math.factorial(r) / 2, 2 * lam**r * math.factorial(r)
            if ctx.tampered("logistic_moments"):
                hi = v
            ok &= lo < v < hi
            margin = min(margin, (v - lo) / v, (hi - v) / v)
    return ok, f"lam^r r!/2 < m_r < 2 lam^r r! for lam in {{1,2}}, r <= 8; min rel margin {margin:.3f}"


def check_tail_bracket(ctx: Context) -> tuple[bool, str]:
    ok = True
    margin = math.inf
    for a in (1.5, 2.0, 3.0):
        seq = PowerLaw(a)
        for k in range(65):
            t = seq.tail_abs_sum(k)
            lo, hi = tail_bracket(a, k)
            if ctx.tampered("tail_bracket"):
                lo = t * (1 + 1e-9)
            ok &= lo <= t <= hi
            margin = min(margin, (t - lo) / t, (hi - t) / t)
    return ok, f"lo <= tail_abs_sum <= hi for a in {{1.5,2,3}}, k <= 64; min rel margin {margin:.2e}"


def check_fractional_identity(ctx: Context) -> tuple[bool, str]:
    u = RngStream(ctx.seed, stream=7).take(20_000)
    x, y = 10 * u[:10_000] - 5, 10 * u[10_000:] - 5
    worst_closed = worst_generic = worst_est = 0.0
    cfg = McConfig(n=10_000, k_ref=10_000, seed=ctx.seed, k_grid=(1, 4, 16))
    paths = sample_paths(ms.uniform_sym(), PowerLaw(2.0), cfg)
    for beta in (0.25, 0.5, 0.75):
        kern = FractionalWiener(beta)
        ref = np.abs(x - y) ** (2 * beta)
        if ctx.tampered("fractional_identity"):
            ref = ref * (1 + 1e-9) + 1e-9
        worst_closed = max(worst_closed, float(np.max(np.abs(kern.sq_distance(x, y) - ref))))
        worst_generic = max(worst_generic,
                            float(np.max(np.abs(kern.sq_distance_generic(x, y) - ref))))
        for k in cfg.k_grid:
            e = estimate_err_kernel(kern, ms.uniform_sym(), PowerLaw(2.0), k, cfg, paths=paths)
            mo = estimate_moment(ms.uniform_sym(), PowerLaw(2.0), k, 2 * beta, cfg, paths=paths)
            worst_est = max(worst_est, _rel(e.value**2, mo.value))
    ok = max(worst_closed, worst_generic) <= 1e-12 and worst_est <= 1e-12
    return ok, (f"max |sq_distance - |x-y|^(2b)| = {worst_closed:.2e} (three-term form "
                f"{worst_generic:.2e}) <= 1e-12; max rel |e^2 - moment| = {worst_est:.2e} <= 1e-12")


def _rfolded_oracle(r: int, x: float, y: float) -> float:
    lo = min(x, y)
    if lo <= 0:
        return 0.0
    val, _ = integrate.quad(lambda t: (x - t) ** (r - 1) * (y - t) ** (r - 1), 0.0, lo,
                            epsabs=0.0, epsrel=1e-13, limit=200)
    return val / math.factorial(r - 1) ** 2


def check_rfolded_quadrature(ctx: Context) -> tuple[bool, str]:
    u = RngStream(ctx.seed, stream=8).take(2000)
    xs, ys = 5 * u[:1000], 5 * u[1000:]
    worst = 0.0
    for r in range(2, 7):
        kern = RFoldedWiener(r)
        vals = kern.eval(xs, ys)
        for x, y, v in zip(xs, ys, vals):
            ref = _rfolded_oracle(r, float(x), float(y))
            if ctx.tampered("rfolded_quadrature"):
                ref *= 1 + 1e-9
            worst = max(worst, _rel(float(v), ref))
    return worst <= 1e-12, f"max rel err vs adaptive quadrature {worst:.2e} <= 1e-12 (r = 2..6)"


def _domination(rows) -> tuple[bool, str]:
    """rows: (label, k, estimate, std_error, bound)."""
    worst = max(rows, key=lambda r: (r[2] - r[4] - 3 * r[3]) / r[4])
    ok = all(est <= bound + 3 * se for _, _, est, se, bound in rows)
    lab, k, est, se, bound = worst
    return ok, (f"estimate <= bound + 3 se at every k; tightest {lab} k={k}: "
                f"{est:.6g} <= {bound:.6g} + 3*{se:.3g}")


def _scale(ctx, key) -> float:
    return 0.5 if ctx.tampered(key) else 1.0


def check_holder_domination(ctx: Context) -> tuple[bool, str]:
    m, seq = ms.uniform_sym(), PowerLaw(2.0)
    cfg, P = ctx.big_config(), ctx.sym_paths
    s = _scale(ctx, "holder_domination")
    rows = []
    for k in DOMINATION_GRID:
        b = s * min(bd.holder_fr1_example(1.0, 0.5, ms.moment_abs(m, 1), 2.0, k),
                    bd.holder_zero_mean_example(1.0, 0.5, ms.moment_abs(m, 2), 2.0, k))
        mo = estimate_moment(m, seq, k, 1.0, cfg, paths=P)
        v = math.sqrt(mo.value)
        rows.append(("holder", k, v, mo.std_error / (2 * v), b))
        e = estimate_err_kernel(FractionalWiener(0.5), m, seq, k, cfg, paths=P)
        rows.append(("fractional", k, e.value, e.std_error, b))
    return _domination(rows)


def check_rfolded_domination(ctx: Context) -> tuple[bool, str]:
    m, seq = ms.uniform01(), PowerLaw(2.0)
    cfg, P = ctx.big_config(DOMINATION_GRID), ctx.u01_paths
    s = _scale(ctx, "rfolded_domination")
    rows = []
    for k in DOMINATION_GRID:
        e = estimate_err_kernel(RFoldedWiener(2), m, seq, k, cfg, paths=P)
        rows.append(("r=2", k, e.value, e.std_error, s * bd.uniform01_rfolded_example(2, 2.0, k)))
    return _domination(rows)


def check_korobov_domination(ctx: Context) -> tuple[bool, str]:
    m, seq = ms.uniform_sym(), PowerLaw(2.0)
    cfg, P = ctx.big_config(), ctx.sym_paths
    w = GeometricDecay(0.5)
    kern = Korobov(w)
    s = _scale(ctx, "korobov_domination")
    rows = []
    for k in DOMINATION_GRID:
        e = estimate_err_kernel(kern, m, seq, k, cfg, paths=P)
        rows.append(("korobov", k, e.value, e.std_error,
                     s * bd.uniform_sym_korobov_example(w, seq, k)))
    return _domination(rows)


def check_hermite_domination(ctx: Context) -> tuple[bool, str]:
    m, seq = ms.uniform_sym(), PowerLaw(2.0)
    cfg, P = ctx.big_config(), ctx.sym_paths
    w = GeometricDecay(0.5)
    kern = Hermite(w)
    if kern.cap > 64:
        return False, f"series cap {kern.cap} > 64"
    s = _scale(ctx, "hermite_domination")
    rows = []
    for k in DOMINATION_GRID:
        e = estimate_err_kernel(kern, m, seq, k, cfg, paths=P)
        rows.append((f"hermite L={kern.cap}", k, e.value, e.std_error,
                     s * bd.uniform_sym_hermite_example(w, 2.0, k)))
    return _domination(rows)


def check_e1_le_e2(ctx: Context) -> tuple[bool, str]:
    grid = (1, 4, 16)
    sym = McConfig(n=50_000, k_ref=20_000, seed=ctx.seed, k_grid=grid)
    gauss = McConfig(n=20_000, k_ref=10_000, seed=ctx.seed, k_grid=grid)
    seq = PowerLaw(2.0)
    streams = {}
    for m, cfg in ((ms.uniform_sym(), sym), (ms.gaussian(1.0), gauss)):
        streams[m] = (cfg, sample_paths(m, seq, cfg, stream=0), sample_paths(m, seq, cfg, stream=1))
    configs = [
        ("fractional", FractionalWiener(0.5), ms.uniform_sym()),
        ("korobov", Korobov(GeometricDecay(0.5)), ms.uniform_sym()),
        ("two-sided", TwoSidedRFolded(2), ms.gaussian(1.0)),
    ]
    ok = True
    worst = None
    for label, kern, m in configs:
        cfg, X, Z = streams[m]
        for k in grid:
            e1 = estimate_e1(kern, m, seq, k, cfg, x_paths=X, z_paths=Z)
            e2 = estimate_err_kernel(kern, m, seq, k, cfg, paths=X)
            if ctx.tampered("e1_le_e2"):
                e2 = type(e2)(0.5 * e1.value, 0.0, e2.n, e2.k_ref, e2.bias_bound)
            se = math.hypot(e1.std_error, e2.std_error)
            slack = e2.value + 3 * se - e1.value
            ok &= slack >= 0
            if worst is None or slack / e2.value < worst[0]:
                worst = (slack / e2.value, label, k, e1.value, e2.value, se)
    _, label, k, a, b, se = worst
    return ok, f"e1 <= e2 + 3 se on 3 configs; tightest {label} k={k}: {a:.6g} <= {b:.6g} + 3*{se:.3g}"


def check_decay_rate(ctx: Context) -> tuple[bool, str]:
    m, seq = ms.uniform_sym(), PowerLaw(2.0)
    cfg, P = ctx.big_config(), ctx.sym_paths
    kern = FractionalWiener(0.5)
    rows = [(k, estimate_err_kernel(kern, m, seq, k, cfg, paths=P).value)
            for k in range(2, 65)]
    slope, _, resid = fit_decay_rate(rows)
    target = -0.75 + (1.0 if ctx.tampered("decay_rate") else 0.0)
    ok = abs(slope - target) <= 0.25
    return ok, f"|slope - ({target:g})| = |{slope:.4f} - ({target:g})| <= 0.25 (rms residual {resid:.3g})"


REPRO_EXPERIMENT = """\
[measure]
kind = "uniform_sym"

[sequence]
kind = "power_law"
a = 2.0

[target]
kind = "fractional_wiener"
beta = 0.5

[mc]
n = 20000
k_ref = 20000
seed = {seed}
k_grid = [1, 2, 4, 8, 16]

[output]
formats = ["table", "json", "plotdata"]
"""


def check_reproducibility(ctx: Context) -> tuple[bool, str]:
    from .cli import run

    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        exp = tmp / "repro.toml"
        exp.write_text(REPRO_EXPERIMENT.format(seed=ctx.seed))
        outs = {}
        for workers in (1, 8):
            d = tmp / f"w{workers}"
            code = run(["sweep", "--experiment", str(exp), "--out", str(d),
                        "--workers", str(workers)])
            if code != 0:
                return False, f"sweep with {workers} workers exited with {code}"
            outs[workers] = {p.name: p.read_bytes() for p in sorted(d.iterdir())}
        if ctx.tampered("reproducibility"):
            outs[8]["sweep.csv"] += b"#\n"
    same = outs[1] == outs[8]
    return same, (f"{len(outs[1])} output files byte-identical for workers 1 and 8: {same}")


@dataclass(frozen=True)
class Check:
    number: int
    key: str
    title: str
    budget: float
    fn: object


CHECKS = (
    Check(1, "constants", "constants oracle", 1.0, check_constants),
    Check(2, "logistic_moments", "logistic moment quadrature", 1.0, check_logistic_moments),
    Check(3, "tail_bracket", "power-law tail bracket", 1.0, check_tail_bracket),
    Check(4, "fractional_identity", "fractional Wiener identity", 5.0, check_fractional_identity),
    Check(5, "rfolded_quadrature", "r-folded Gauss-Legendre vs quadrature", 5.0,
          check_rfolded_quadrature),
    Check(6, "holder_domination", "bound domination (Hoelder/fractional)", 60.0,
          check_holder_domination),
    Check(7, "rfolded_domination", "bound domination (r-folded)", 60.0, check_rfolded_domination),
    Check(8, "korobov_domination", "bound domination (Korobov)", 60.0, check_korobov_domination),
    Check(9, "hermite_domination", "bound domination (Hermite, bounded)", 120.0,
          check_hermite_domination),
    Check(10, "e1_le_e2", "e1 <= e2", 90.0, check_e1_le_e2),
    Check(11, "decay_rate", "decay-rate recovery", 60.0, check_decay_rate),
    Check(12, "reproducibility", "reproducibility across workers", 60.0, check_reproducibility),
)
RUNTIME = (13, "runtime", "full battery runtime")


def run_check(check: Check, ctx: Context) -> CheckResult:
    t0 = time.perf_counter()
    try:
        ok, detail = check.fn(ctx)
    except Exception as exc:  # a crash is a failure, reported like one
        ok, detail = False, f"raised {type(exc).__name__}: {exc}"
    elapsed = time.perf_counter() - t0
    if elapsed > check.budget:
        ok = False
        detail += "; over budget"
    res = CheckResult(check.number, check.key, check.title, ok, detail, elapsed, check.budget)
    ctx.results.append(res)
    return res


def runtime_result(ctx: Context) -> CheckResult:
    total = ctx.warmup_seconds + sum(r.elapsed for r in ctx.results)
    limit = TOTAL_BUDGET * (0.5 if ctx.tampered("runtime") else 1.0)
    if ctx.tampered("runtime"):
        total = limit + 1.0
    n, key, title = RUNTIME
    return CheckResult(n, key, title, total < limit,
                       f"total {total:.1f} s (warm-up {ctx.warmup_seconds:.1f} s) < {limit:g} s",
                       total, limit)


def run_battery(only=None, tamper: str | None = None, stream=sys.stdout,
                seed: int = SEED) -> bool:
    """Run the checks (all by default), print one line each; True iff all pass."""
    ctx = Context(seed=seed, tamper=tamper)
    ctx.warmup()
    wanted = set(only) if only else {c.number for c in CHECKS} | {RUNTIME[0]}
    results = []
    for check in CHECKS:
        if check.number in wanted:
            res = run_check(check, ctx)
            print(res.line(), file=stream, flush=True)
            results.append(res)
    if RUNTIME[0] in wanted:
        res = runtime_result(ctx)
        print(res.line(), file=stream, flush=True)
        results.append(res)
    n_ok = sum(r.passed for r in results)
    print(f"{n_ok}/{len(results)} checks passed", file=stream)
    return n_ok == len(results)
