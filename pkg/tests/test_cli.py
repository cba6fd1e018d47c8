from __future__ import annotations

import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import pytest

from dimtrunc import bounds as bd
from dimtrunc import cli
from dimtrunc.coefficients import PowerLaw

ROOT = Path(__file__).resolve().parents[1]
EXPERIMENTS = sorted((ROOT / "experiments").glob("*.toml"))

SMALL = """\
[measure]
kind = "uniform_sym"

[sequence]
kind = "power_law"
a = 2.0

[target]
kind = "fractional_wiener"
beta = 0.5

[mc]
n = 2000
k_ref = 2000
seed = 4
k_grid = [1, 2, 4, 8]

[output]
formats = ["table", "json", "plotdata"]
"""


def _write(tmp_path, text, name="exp.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def _rows(text):
    lines = [l for l in text.splitlines() if not l.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


# ---------------------------------------------------------------- parsing


@pytest.mark.parametrize("path", EXPERIMENTS, ids=lambda p: p.stem)
def test_shipped_experiments_parse(path):
    spec = cli.load_experiment(path)
    assert spec.measure is not None


@pytest.mark.parametrize("bad", [
    "not toml [",
    "[measure]\nkind = 'cauchy'\n",
    "[measure]\nkind = 'uniform01'\nscale = 2.0\n",
    SMALL.replace('kind = "power_law"', 'kind = "zigzag"'),
    SMALL.replace("a = 2.0", "a = 0.5"),
    SMALL.replace("beta = 0.5", "beta = 1.5"),
    SMALL.replace("k_grid = [1, 2, 4, 8]", "k_grid = [8, 4]"),
    SMALL.replace("k_grid = [1, 2, 4, 8]", "k_grid = [1, 4000]"),
    SMALL.replace("seed = 4", "seed = -4"),
    SMALL.replace('formats = ["table", "json", "plotdata"]', 'formats = ["pdf"]'),
    SMALL + "\n[extra]\nx = 1\n",
    SMALL.replace("n = 2000", "n = 2000\nwhatever = 1"),
])
def test_parse_errors_exit_2(tmp_path, bad, capsys):
    code = cli.run(["bounds", "--experiment", _write(tmp_path, bad)])
    assert code == cli.EXIT_PARSE
    assert "parse error" in capsys.readouterr().err


def test_missing_file_exit_2(capsys):
    assert cli.run(["bounds", "--experiment", "/nonexistent.toml"]) == cli.EXIT_PARSE


def test_parse_weights_and_targets():
    spec = cli.parse_experiment(SMALL.replace(
        'kind = "fractional_wiener"\nbeta = 0.5',
        'kind = "korobov"\nweight = { kind = "polynomial", alpha = 3.0 }\nseries_cap = 5000'))
    assert spec.target.cap == 5000
    spec = cli.parse_experiment(SMALL.replace(
        'kind = "fractional_wiener"\nbeta = 0.5', 'kind = "gp_space"\np = "inf"'))
    assert spec.target == bd.HolderClass(1.0, 1.0)
    spec = cli.parse_experiment(SMALL, seed=99)
    assert spec.mc.seed == 99
    assert spec.sequence == PowerLaw(2.0)


# ---------------------------------------------------------------- constants


def test_constants_rows(capsys):
    assert cli.run(["constants", "--measure", "uniform01", "--m-max", "4", "--r-max", "2"]) == 0
    rows = _rows(capsys.readouterr().out)
    c4 = [r for r in rows if r["quantity"] == "C" and r["order"] == "4"][0]
    assert float(c4["value"]) == pytest.approx(0.2) and c4["kind"] == "Exact"
    enum4 = [r for r in rows if r["quantity"] == "C_enum" and r["order"] == "4"][0]
    assert float(enum4["value"]) == pytest.approx(0.2, rel=1e-15)
    assert list(rows[0]) == list(cli.CONST_HEADER)


def test_constants_logistic_and_gaussian(capsys):
    cli.run(["constants", "--measure", "logistic", "--scale", "1", "--m-max", "3"])
    rows = _rows(capsys.readouterr().out)
    c3 = [r for r in rows if r["quantity"] == "C" and r["order"] == "3"][0]
    assert (float(c3["lo"]), float(c3["hi"]), c3["kind"]) == (3.0, 12.0, "Interval")
    cli.run(["constants", "--measure", "gaussian", "--variance", "1", "--m-max", "4"])
    rows = _rows(capsys.readouterr().out)
    c4 = [r for r in rows if r["quantity"] == "C" and r["order"] == "4"][0]
    assert (float(c4["value"]), c4["kind"]) == (3.0, "UpperBound")


def test_constants_json_and_out(tmp_path):
    exp = ROOT / "experiments" / "constants_logistic.toml"
    assert cli.run(["constants", "--experiment", str(exp), "--format", "json",
                    "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "constants.json").read_text())
    assert {d["quantity"] for d in doc} == {"mean", "variance", "m", "C", "C_enum"}


def test_constants_needs_a_measure(capsys):
    assert cli.run(["constants"]) == cli.EXIT_PARSE


# ---------------------------------------------------------------- bounds


def test_bounds_rows(tmp_path, capsys):
    exp = _write(tmp_path, SMALL)
    assert cli.run(["bounds", "--experiment", exp]) == 0
    rows = _rows(capsys.readouterr().out)
    vals = [float(r["value"]) for r in rows]
    assert [int(r["k"]) for r in rows] == [1, 2, 4, 8]
    assert all(b <= a for a, b in zip(vals, vals[1:]))
    assert {r["formula_id"] for r in rows} <= {f.value for f in bd.FormulaId}


def test_bounds_rfolded_example(capsys):
    assert cli.run(["bounds", "--experiment", str(ROOT / "experiments/rfolded_uniform01.toml")]) == 0
    for r in _rows(capsys.readouterr().out):
        assert float(r["value"]) <= bd.uniform01_rfolded_example(2, 2.0, int(r["k"]))


def test_bounds_fully_truncated_finite_list(tmp_path, capsys):
    text = SMALL.replace('kind = "power_law"\na = 2.0', 'kind = "finite_list"\nvalues = [0.5, 0.25]')
    text = text.replace("k_ref = 2000\n", "").replace("k_grid = [1, 2, 4, 8]", "k_grid = [2]")
    assert cli.run(["bounds", "--experiment", _write(tmp_path, text)]) == 0
    assert [float(r["value"]) for r in _rows(capsys.readouterr().out)] == [0.0]


def test_bounds_refusal_exit_3(tmp_path, capsys):
    text = SMALL.replace('kind = "uniform_sym"', 'kind = "gaussian"\nvariance = 1.0').replace(
        'kind = "fractional_wiener"\nbeta = 0.5', 'kind = "two_sided"\nr = 2\nmode = "bounded"')
    assert cli.run(["bounds", "--experiment", _write(tmp_path, text)]) == cli.EXIT_REFUSED
    assert "bounded support" in capsys.readouterr().err


# ---------------------------------------------------------------- sweep


def test_sweep_outputs_and_determinism(tmp_path):
    exp = _write(tmp_path, SMALL)
    for d in ("a", "b", "c"):
        workers = "8" if d == "c" else "1"
        assert cli.run(["sweep", "--experiment", exp, "--out", str(tmp_path / d),
                        "--workers", workers]) == 0
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert names == ["sweep.csv", "sweep.json", "sweep_bound.dat", "sweep_estimate.dat"]
    for n in names:
        blob = (tmp_path / "a" / n).read_bytes()
        assert blob == (tmp_path / "b" / n).read_bytes() == (tmp_path / "c" / n).read_bytes()
    text = (tmp_path / "a" / "sweep.csv").read_text()
    header = [l for l in text.splitlines() if l.startswith("#")]
    assert any(l.startswith("# seed: 4") for l in header)
    assert any(l.startswith("# N: 2000") for l in header)
    assert any(l.startswith("# K_ref: 2000") for l in header)
    assert text.rstrip().splitlines()[-1].startswith("# fit: slope=")
    rows = _rows(text)
    assert list(rows[0]) == list(cli.SWEEP_HEADER)
    for r in rows:
        rel = float(r["std_error"]) / float(r["estimate"])
        assert float(r["ratio"]) >= 1 - 3 * rel
        # shortest round-trip float formatting
        assert repr(float(r["estimate"])) == r["estimate"]
    doc = json.loads((tmp_path / "a" / "sweep.json").read_text())
    assert len(doc["rows"]) == 4 and "fit" in doc
    dat = (tmp_path / "a" / "sweep_estimate.dat").read_text()
    assert "x,y,yerr" in dat


def test_sweep_seed_override_changes_output(tmp_path, capsys):
    exp = _write(tmp_path, SMALL)
    cli.run(["sweep", "--experiment", exp])
    a = capsys.readouterr().out
    cli.run(["sweep", "--experiment", exp, "--seed", "5"])
    b = capsys.readouterr().out
    assert a != b and "# seed: 5" in b


def test_sweep_json_to_stdout(tmp_path, capsys):
    exp = _write(tmp_path, SMALL.replace('formats = ["table", "json", "plotdata"]',
                                         'formats = ["table"]'))
    assert cli.run(["sweep", "--experiment", exp, "--format", "json"]) == 0
    assert "rows" in json.loads(capsys.readouterr().out)


def test_sweep_bias_refusal_writes_nothing(tmp_path):
    text = SMALL.replace("k_ref = 2000", "k_ref = 10").replace(
        'kind = "fractional_wiener"\nbeta = 0.5',
        'kind = "korobov"\nweight = { kind = "geometric", q = 0.5 }')
    out = tmp_path / "out"
    assert cli.run(["sweep", "--experiment", _write(tmp_path, text), "--out", str(out)]) == \
        cli.EXIT_REFUSED
    assert not out.exists()


def test_sweep_numeric_failure_exit_4(tmp_path, monkeypatch):
    from dimtrunc.errors import NumericError

    def boom(*a, **k):
        raise NumericError("synthetic", achieved=1.0)

    monkeypatch.setattr(cli, "sweep", boom)
    out = tmp_path / "out"
    assert cli.run(["sweep", "--experiment", _write(tmp_path, SMALL), "--out", str(out)]) == \
        cli.EXIT_NUMERIC
    assert not out.exists()


def test_sweep_without_target(tmp_path):
    exp = ROOT / "experiments" / "constants_logistic.toml"
    assert cli.run(["sweep", "--experiment", str(exp)]) == cli.EXIT_PARSE


# ---------------------------------------------------------------- verify


def test_verify_tamper_fails_named_check(capsys):
    code = cli.run(["verify", "--only", "1,2,3", "--tamper", "constants"])
    out = capsys.readouterr().out
    assert code == cli.EXIT_VERIFY
    assert "FAIL [01]" in out and "PASS [02]" in out and "PASS [03]" in out


def test_verify_subset_passes(capsys):
    assert cli.run(["verify", "--only", "1,2,3,4,5"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 5


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "dimtrunc.cli", "--version"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "dimtrunc" in res.stdout
