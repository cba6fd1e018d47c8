"""Command line front end: ``dimtrunc {constants,bounds,sweep,verify}``.

Experiment files are TOML; see ``experiments/`` and the README for the grammar.
Exit codes: 0 success, 1 verification failure, 2 parse error,
3 refused precondition, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np

from . import __version__
from . import bounds as bd
from . import measures as ms
from .coefficients import CoefficientSequence, FiniteList, PowerLaw
from .errors import (ArgumentError, ConfigurationError, DimtruncError, NumericError,
                     RefusedPrecondition)
from .estimators import McConfig, default_k_ref, fit_decay_rate, sweep
from .kernels import (FractionalWiener, GeometricDecay, Hermite, Korobov, PolynomialDecay,
                      RFoldedWiener, TwoSidedRFolded)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXIT_OK, EXIT_VERIFY, EXIT_PARSE, EXIT_REFUSED, EXIT_NUMERIC = 0, 1, 2, 3, 4
OUTPUT_KINDS = ("table", "json", "plotdata")


class ParseError(DimtruncError):
    pass


@dataclass(frozen=True)
class ExperimentSpec:
    measure: ms.MeasureSpec
    sequence: CoefficientSequence | None
    target: object
    mode: bd.Mode | None
    mc: McConfig | None
    outputs: tuple[str, ...] = ("table",)
    m_max: int = 8
    r_max: int = 8

    @property
    def k_grid(self) -> tuple[int, ...]:
        return self.mc.k_grid


# ---------------------------------------------------------------- parsing


def _section(doc: dict, name: str, required: bool = True) -> dict:
    sec = doc.get(name)
    if sec is None:
        if required:
            raise ParseError(f"missing [{name}] section")
        return {}
    if not isinstance(sec, dict):
        raise ParseError(f"[{name}] must be a table")
    return sec


def _only(sec: dict, name: str, allowed: set[str]):
    extra = set(sec) - allowed
    if extra:
        raise ParseError(f"[{name}] has unknown keys: {sorted(extra)}")


def parse_measure(sec: dict) -> ms.MeasureSpec:
    _only(sec, "measure", {"kind", "scale", "variance"})
    try:
        return ms.MeasureSpec(ms.MeasureKind(sec.get("kind")), sec.get("scale"), sec.get("variance"))
    except ValueError as exc:
        raise ParseError(f"[measure]: {exc}") from exc


def parse_sequence(sec: dict) -> CoefficientSequence:
    _only(sec, "sequence", {"kind", "a", "values"})
    kind = sec.get("kind")
    try:
        if kind == "power_law":
            return PowerLaw(float(sec["a"]))
        if kind == "finite_list":
            return FiniteList(tuple(sec["values"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"[sequence]: {exc}") from exc
    raise ParseError(f"[sequence] kind must be power_law or finite_list, got {kind!r}")


def parse_weight(sec) -> PolynomialDecay | GeometricDecay:
    if not isinstance(sec, dict):
        raise ParseError("target.weight must be an inline table")
    kind = sec.get("kind")
    if kind == "geometric":
        return GeometricDecay(float(sec["q"]))
    if kind == "polynomial":
        return PolynomialDecay(float(sec["alpha"]))
    raise ParseError(f"weight kind must be geometric or polynomial, got {kind!r}")


def parse_target(sec: dict):
    _only(sec, "target", {"kind", "beta", "r", "C", "p", "mode", "weight",
                          "series_cap", "tail_tol"})
    kind = sec.get("kind")
    try:
        if kind == "holder":
            target = bd.HolderClass(float(sec.get("C", 1.0)), float(sec["beta"]))
        elif kind == "gp_space":
            p = sec["p"]
            target = bd.gp_space_params(math.inf if p in ("inf", "infinity") else float(p))
        elif kind == "fractional_wiener":
            target = FractionalWiener(float(sec["beta"]))
        elif kind == "rfolded_wiener":
            target = RFoldedWiener(sec["r"])
        elif kind == "two_sided":
            target = TwoSidedRFolded(sec["r"])
        elif kind in ("korobov", "hermite"):
            cls = Korobov if kind == "korobov" else Hermite
            target = cls(parse_weight(sec["weight"]), sec.get("series_cap"),
                         float(sec.get("tail_tol", 1e-14)))
        else:
            raise ParseError(f"unknown target kind {kind!r}")
        mode = bd.Mode(sec["mode"]) if "mode" in sec else None
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"[target]: {exc!r}") from exc
    return target, mode


def parse_experiment(text: str, seed: int | None = None) -> ExperimentSpec:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"not valid TOML: {exc}") from exc
    _only(doc, "experiment", {"measure", "sequence", "target", "mc", "output", "constants",
                              "k_grid"})
    measure = parse_measure(_section(doc, "measure"))
    ssec = _section(doc, "sequence", required=False)
    seq = parse_sequence(ssec) if ssec else None
    tsec = _section(doc, "target", required=False)
    target, mode = parse_target(tsec) if tsec else (None, None)
    if target is not None and seq is None:
        raise ParseError("[target] needs a [sequence] section")
    mc = _section(doc, "mc", required=False)
    _only(mc, "mc", {"n", "k_ref", "seed", "k_grid", "enforce_bias"})
    grid = mc.get("k_grid", doc.get("k_grid", [1]))
    config = None
    if seq is not None:
        try:
            config = McConfig(
                n=int(mc.get("n", 10_000)),
                k_ref=int(mc.get("k_ref", default_k_ref(seq))),
                seed=int(seed if seed is not None else mc.get("seed", 0)),
                k_grid=tuple(grid),
                enforce_bias=bool(mc.get("enforce_bias", True)),
            )
        except (TypeError, ValueError, OverflowError) as exc:
            raise ParseError(f"[mc]: {exc}") from exc
    out = _section(doc, "output", required=False)
    _only(out, "output", {"formats"})
    outputs = tuple(out.get("formats", ["table"]))
    bad = set(outputs) - set(OUTPUT_KINDS)
    if bad:
        raise ParseError(f"[output] formats must be among {OUTPUT_KINDS}, got {sorted(bad)}")
    const = _section(doc, "constants", required=False)
    _only(const, "constants", {"m_max", "r_max"})
    return ExperimentSpec(measure, seq, target, mode, config, outputs,
                          int(const.get("m_max", 8)), int(const.get("r_max", 8)))


def load_experiment(path: str | Path, seed: int | None = None) -> ExperimentSpec:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    return parse_experiment(text, seed)


# ---------------------------------------------------------------- formatting


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    return str(x)


def _csv(header, rows, comments=(), trailer=()) -> str:
    buf = io.StringIO()
    for line in comments:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    for line in trailer:
        buf.write(f"# {line}\n")
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _describe(target) -> str:
    return target.label() if hasattr(target, "label") else repr(target)


def _mode_name(spec: ExperimentSpec) -> str:
    mode = spec.mode or bd.default_mode(spec.target, spec.measure)
    return mode.value if mode else "none"


def metadata(spec: ExperimentSpec) -> list[str]:
    lines = [
        f"dimtrunc {__version__}; numpy {np.__version__}; numba {numba.__version__}",
        f"measure: {spec.measure.label()}",
        f"sequence: {spec.sequence.label()}",
        f"target: {_describe(spec.target)}",
        f"mode: {_mode_name(spec)}",
        f"seed: {spec.mc.seed}",
        f"N: {spec.mc.n}",
        f"K_ref: {spec.mc.k_ref}",
    ]
    meta = getattr(spec.target, "series_meta", lambda: {})()
    if meta:
        lines.append("series: " + ", ".join(f"{k}={v}" for k, v in sorted(meta.items())))
    if isinstance(spec.sequence, PowerLaw):
        lines.append(f"note: {bd.PUBLISHED_REPRESENTATIVE}")
    return lines


# ---------------------------------------------------------------- commands

CONST_HEADER = ("measure", "quantity", "order", "value", "lo", "hi", "kind")


def constants_rows(measure: ms.MeasureSpec, m_max: int, r_max: int) -> list[tuple]:
    name = measure.label()
    rows = [(name, "mean", "", ms.mean(measure), None, None, "Exact"),
            (name, "variance", "", ms.variance(measure), None, None, "Exact")]
    m_kind = "Quadrature" if measure.kind is ms.MeasureKind.LOGISTIC else "Exact"
    for r in range(1, r_max + 1):
        rows.append((name, "m", r, ms.moment_abs(measure, r), None, None, m_kind))
    for M in range(1, m_max + 1):
        if M <= ms.PARTITION_GUARD:
            rows.append((name, "C_enum", M, ms.c_constant_enum(measure, M), None, None, "Exact"))
        bv = ms.c_constant_closed(measure, M)
        rows.append((name, "C", M, bv.value, bv.lo, bv.hi, bv.kind.value))
    return rows


def cmd_constants(measure: ms.MeasureSpec, m_max: int = 8, r_max: int = 8,
                  fmt_: str = "csv") -> str:
    rows = constants_rows(measure, m_max, r_max)
    if fmt_ == "json":
        return _json([dict(zip(CONST_HEADER, r)) for r in rows])
    return _csv(CONST_HEADER, rows)


def bounds_rows(spec: ExperimentSpec) -> list[bd.BoundReport]:
    if spec.target is None:
        raise ParseError("bounds needs a [target] section")
    return [bd.bound_for(spec.target, spec.measure, spec.sequence, k, spec.mode)
            for k in spec.k_grid]


def cmd_bounds(spec: ExperimentSpec, fmt_: str = "csv") -> str:
    reps = bounds_rows(spec)
    if fmt_ == "json":
        return _json([{"k": r.k, "formula_id": r.formula_id.value, "value": r.value,
                       "assumptions": list(r.assumptions)} for r in reps])
    return _csv(("k", "formula_id", "value", "assumptions"),
                [(r.k, r.formula_id.value, r.value, "; ".join(r.assumptions)) for r in reps],
                comments=[f"measure: {spec.measure.label()}",
                          f"sequence: {spec.sequence.label()}",
                          f"target: {_describe(spec.target)}"])


SWEEP_HEADER = ("k", "estimate", "std_error", "bias_bound", "bound", "formula_id", "ratio",
                "clamped_flag")


def cmd_sweep(spec: ExperimentSpec, workers: int = 1) -> dict[str, str]:
    """Run a sweep and render every requested output; returns {filename: content}."""
    if spec.target is None:
        raise ParseError("sweep needs a [target] section")
    rows = sweep(spec.target, spec.measure, spec.sequence, spec.mc, spec.mode, workers)
    meta = metadata(spec)
    table = [(r.k, r.estimate.value, r.estimate.std_error, r.estimate.bias_bound,
              r.bound.value, r.bound.formula_id.value, r.ratio, int(r.estimate.clamped))
             for r in rows]
    uncertified = [r.k for r in rows if not r.estimate.bias_certified]
    if uncertified:
        meta.append(f"bias uncertified at k = {uncertified}")
    trailer = []
    fit = None
    try:
        fit = fit_decay_rate(rows)
        trailer.append(f"fit: slope={fmt(fit[0])}, intercept={fmt(fit[1])}, residual={fmt(fit[2])}")
    except ArgumentError:
        pass
    out = {}
    if "table" in spec.outputs:
        out["sweep.csv"] = _csv(SWEEP_HEADER, table, meta, trailer)
    if "json" in spec.outputs:
        doc = {"metadata": meta,
               "rows": [dict(zip(SWEEP_HEADER, row)) | {"assumptions": list(r.bound.assumptions)}
                        for row, r in zip(table, rows)]}
        if fit:
            doc["fit"] = {"slope": fit[0], "intercept": fit[1], "residual": fit[2]}
        out["sweep.json"] = _json(doc)
    if "plotdata" in spec.outputs:
        out["sweep_estimate.dat"] = _csv(("x", "y", "yerr"),
                                         [(r.k, r.estimate.value, r.estimate.std_error)
                                          for r in rows], meta)
        out["sweep_bound.dat"] = _csv(("x", "y", "yerr"),
                                      [(r.k, r.bound.value, 0.0) for r in rows], meta)
    return out


def _emit(outputs: dict[str, str], out_dir: str | None):
    # everything is rendered before anything is written
    if out_dir is None:
        for name, text in outputs.items():
            sys.stdout.write(text)
        return
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    for name, text in outputs.items():
        (d / name).write_text(text)


def _measure_from_flags(args) -> ms.MeasureSpec:
    try:
        return ms.MeasureSpec(ms.MeasureKind(args.measure), args.scale, args.variance)
    except ValueError as exc:
        raise ParseError(f"--measure: {exc}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dimtrunc", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"dimtrunc {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, experiment_required=True):
        sp.add_argument("--experiment", required=experiment_required, help="TOML experiment file")
        sp.add_argument("--out", help="output directory (default: stdout)")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")

    c = sub.add_parser("constants", help="moments m_r and C(M, omega)")
    common(c, experiment_required=False)
    c.add_argument("--measure", choices=[k.value for k in ms.MeasureKind])
    c.add_argument("--scale", type=float)
    c.add_argument("--variance", type=float)
    c.add_argument("--m-max", type=int)
    c.add_argument("--r-max", type=int)

    b = sub.add_parser("bounds", help="theoretical bounds over the k grid")
    common(b)

    s = sub.add_parser("sweep", help="Monte Carlo estimates against bounds")
    common(s)
    s.add_argument("--seed", type=int, help="override the experiment seed")
    s.add_argument("--workers", type=int, default=1)

    v = sub.add_parser("verify", help="run the acceptance battery")
    v.add_argument("--only", help="comma-separated check numbers")
    v.add_argument("--tamper", help=argparse.SUPPRESS)
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            from .acceptance import run_battery
            only = [int(x) for x in args.only.split(",")] if args.only else None
            ok = run_battery(only=only, tamper=args.tamper, stream=sys.stdout)
            return EXIT_OK if ok else EXIT_VERIFY
        if args.command == "constants":
            if args.experiment:
                spec = load_experiment(args.experiment)
                measure, m_max, r_max = spec.measure, spec.m_max, spec.r_max
            elif args.measure:
                measure, m_max, r_max = _measure_from_flags(args), 8, 8
            else:
                raise ParseError("constants needs --experiment or --measure")
            m_max = args.m_max or m_max
            r_max = args.r_max or r_max
            text = cmd_constants(measure, m_max, r_max, args.format)
            _emit({f"constants.{args.format}": text}, args.out)
        elif args.command == "bounds":
            spec = load_experiment(args.experiment)
            _emit({f"bounds.{args.format}": cmd_bounds(spec, args.format)}, args.out)
        elif args.command == "sweep":
            spec = load_experiment(args.experiment, args.seed)
            if args.format == "json" and "json" not in spec.outputs:
                spec = ExperimentSpec(**{**spec.__dict__, "outputs": spec.outputs + ("json",)})
            outputs = cmd_sweep(spec, args.workers)
            if args.out is None:
                outputs = {k: v for k, v in outputs.items()
                           if k == ("sweep.json" if args.format == "json" else "sweep.csv")}
            _emit(outputs, args.out)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (RefusedPrecondition, ConfigurationError) as exc:
        name = getattr(exc, "precondition", "bias bound <= 0.1 x std error")
        print(f"refused ({name}): {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ArgumentError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
