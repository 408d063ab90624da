import json
import shutil
import subprocess

import pytest

from sturmian.cli import EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, EXIT_VERIFY, main
from sturmian.intervals import IntervalSet


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_spectrum_free_band(capsys):
    code, out, _ = run(capsys, "spectrum", "--lambda", "0", "--resolution", "1e-3")
    assert code == EXIT_OK
    s = IntervalSet.from_csv(out)
    assert s.hausdorff_distance(IntervalSet([(-2.0, 2.0)])) < 1e-3


def test_spectrum_json_echoes_config(capsys):
    code, out, _ = run(capsys, "spectrum", "--lambda", "1", "--format", "json")
    doc = json.loads(out)
    assert code == EXIT_OK
    assert doc["intervals"] > 1 and doc["total_length"] < 4
    assert doc["config"]["lambda"] == 1.0 and doc["config"]["alpha"] == "golden"
    assert doc["columns"] == ["left", "right"] and len(doc["rows"]) == doc["intervals"]


def test_csv_file_with_sidecar(tmp_path, capsys):
    path = tmp_path / "spec.csv"
    code, _, _ = run(capsys, "spectrum", "--lambda", "0.5", "--output", str(path))
    assert code == EXIT_OK
    summary = json.loads((tmp_path / "spec.csv.json").read_text())
    assert summary["intervals"] == len(path.read_text().splitlines()) - 1


def test_deterministic_csv(tmp_path, capsys):
    outs = []
    for i in range(2):
        p = tmp_path / f"run{i}.csv"
        run(capsys, "dimension-sweep", "--lambda-list", "1", "0.5", "--rho", "0.3", "--output", str(p))
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


def test_seventeen_digits(capsys):
    _, out, _ = run(capsys, "spectrum", "--lambda", "1", "--resolution", "1e-2")
    row = out.splitlines()[1].split(",")
    assert float(row[0]) == float(format(float(row[0]), ".17g"))
    assert any(len(v.lstrip("-").replace(".", "").lstrip("0")) >= 15 for v in row)


def test_bad_alpha(capsys):
    code, _, err = run(capsys, "spectrum", "--alpha", "x,y")
    assert code == EXIT_USAGE and "alpha" in err


def test_unknown_flag_exits_one(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["spectrum", "--bogus"])
    assert exc.value.code == EXIT_USAGE


def test_negative_resolution(capsys):
    code, _, _ = run(capsys, "spectrum", "--resolution", "-1")
    assert code == EXIT_USAGE


def test_sweep_requires_descending(capsys):
    code, _, err = run(capsys, "dimension-sweep", "--lambda-list", "0.5", "1")
    assert code == EXIT_USAGE and "decreasing" in err


def test_sweep_rows(capsys):
    code, out, _ = run(capsys, "dimension-sweep", "--lambda-list", "1", "0")
    lines = out.splitlines()
    assert code == EXIT_OK
    assert lines[0] == "lambda,box_dim,tau,dim_lower,total_length"
    assert len(lines) == 3
    assert lines[2].split(",")[3] == "1"


def test_sweep_single_lambda_with_timings(capsys):
    _, out, _ = run(capsys, "dimension-sweep", "--lambda-list", "0.5", "--timings")
    lines = out.splitlines()
    assert lines[0].endswith(",runtime") and len(lines) == 2


def test_orbit_escapes(capsys):
    code, out, _ = run(capsys, "orbit", "--lambda", "0", "--energy", "3", "--format", "json")
    doc = json.loads(out)
    assert code == EXIT_OK and doc["status"] == "escaped" and doc["steps"] <= 50
    assert len(doc["rows"]) == doc["steps"] + 1


def test_three_distance_golden(capsys):
    code, out, _ = run(capsys, "three-distance", "--n", "4", "--format", "json")
    doc = json.loads(out)
    assert code == EXIT_OK and doc["count"] == 2


def test_survival_needs_rho(capsys):
    code, _, _ = run(capsys, "survival", "--lambda", "0.05")
    assert code == EXIT_USAGE
    code, out, _ = run(capsys, "survival", "--lambda", "0.05", "--rho", "0.3")
    assert code == EXIT_OK and len(out.splitlines()) > 1


def test_stable_manifold(capsys):
    code, out, _ = run(capsys, "stable-manifold", "--depth", "30", "--format", "json")
    doc = json.loads(out)
    assert code == EXIT_OK
    assert doc["fitted_slope"] == pytest.approx(-(1 + 5**0.5) / 2, abs=1e-6)


def test_numeric_failure_exit_code(monkeypatch, capsys):
    import sturmian.cli as cli
    from sturmian.exceptions import NonContractionError

    def boom(*args, **kwargs):
        raise NonContractionError("forced")

    monkeypatch.setattr(cli, "spectrum_estimate", boom)
    code, _, err = run(capsys, "spectrum")
    assert code == EXIT_NUMERIC and "NonContractionError" in err


def test_property_c_exit_codes(capsys):
    code, _, _ = run(capsys, "property-c", "--lambda", "0.01", "--grid", "30")
    assert code == EXIT_OK
    code, _, _ = run(capsys, "property-c", "--lambda", "0.5", "--grid", "20", "--lambda-guard", "1")
    assert code == EXIT_VERIFY
    code, _, _ = run(capsys, "property-c", "--lambda", "0.5", "--grid", "20")
    assert code == EXIT_USAGE


def test_verify_subset(tmp_path, capsys):
    path = tmp_path / "v.json"
    code, _, err = run(capsys, "verify", "--only", "eigenvalue_identities,three_distance", "--output", str(path))
    doc = json.loads(path.read_text())
    assert code == EXIT_OK and doc["passed"] and len(doc["checks"]) == 2
    assert "PASS eigenvalue_identities" in err


def test_verify_failure_exit_code(monkeypatch, tmp_path, capsys):
    import sturmian.verify as v

    monkeypatch.setattr(v, "CHECKS", [("always_fails", lambda rng: (False, {}))])
    code, _, _ = run(capsys, "verify", "--output", str(tmp_path / "v.json"))
    doc = json.loads((tmp_path / "v.json").read_text())
    assert code == EXIT_VERIFY and doc["failures"] == ["always_fails"]


@pytest.mark.skipif(shutil.which("sturmian") is None, reason="console script not installed")
def test_console_script():
    r = subprocess.run(["sturmian", "three-distance", "--n", "4"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("index,arc_length")
