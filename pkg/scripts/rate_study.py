"""Empirical decay rate of the truncation error against the predicted order.

For xi_j = j^-a under the centred uniform measure, the truncated part of
Y is a mean-zero sum with variance of order k^(1-2a), so the fractional
Wiener kernel error with index beta decays like k^(-beta (a - 1/2)). This
script fits the log-log slope of the
Monte Carlo estimates for several (a, beta) and prints it next to the
prediction.

    python scripts/rate_study.py [--n N] [--k-ref K] [--seed S]
"""

from __future__ import annotations

import argparse
import sys

from dimtrunc import measures as ms
from dimtrunc.coefficients import PowerLaw
from dimtrunc.estimators import McConfig, fit_decay_rate, sweep
from dimtrunc.kernels import FractionalWiener

CASES = ((2.0, 0.5), (3.0, 0.5), (2.0, 0.25), (2.5, 0.75))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20_000)
    ap.add_argument("--k-ref", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args(argv)

    grid = tuple(2**i for i in range(1, 7))
    cfg = McConfig(n=args.n, k_ref=args.k_ref, seed=args.seed, k_grid=grid,
                   enforce_bias=False)
    print(f"{'a':>5s} {'beta':>5s} {'predicted':>10s} {'fitted':>10s} {'residual':>9s}")
    for a, beta in CASES:
        rows = sweep(FractionalWiener(beta), ms.uniform_sym(), PowerLaw(a), cfg)
        slope, _, resid = fit_decay_rate(rows)
        print(f"{a:5.2f} {beta:5.2f} {-beta * (a - 0.5):10.4f} {slope:10.4f} {resid:9.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
