"""Run every shipped experiment through ``bounds`` and ``sweep``.

Outputs land in ``results/<experiment>/``. Experiments without a target only
produce the constants table.

    python scripts/run_experiments.py [--only NAME ...] [--workers W]
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from dimtrunc import cli

ROOT = Path(__file__).resolve().parents[1]


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--experiments", default=str(ROOT / "experiments"))
    ap.add_argument("--out", default=str(ROOT / "results"))
    ap.add_argument("--only", nargs="*", default=None, help="experiment stems to run")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args(argv)

    worst = 0
    for path in sorted(Path(args.experiments).glob("*.toml")):
        if args.only and path.stem not in args.only:
            continue
        out = Path(args.out) / path.stem
        spec = cli.load_experiment(path)
        cmds = [["constants"]] if spec.target is None else [["bounds"], ["sweep", "--workers",
                                                                         str(args.workers)]]
        for cmd in cmds:
            t0 = time.perf_counter()
            code = cli.run(cmd + ["--experiment", str(path), "--out", str(out)])
            print(f"{path.stem:28s} {cmd[0]:9s} exit {code} ({time.perf_counter() - t0:.1f} s)",
                  flush=True)
            worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main())
