import json

import numpy as np
import pytest

from dvarint.cli import main
from dvarint.mechanics import midpoint_step
from dvarint.models import make_mechanics


def run(tmp_path, *args, name="out"):
    out = tmp_path / name
    code = main([*args, "--output", str(out)])
    return code, out.read_text() if out.exists() else None


def test_run_csv_format(tmp_path):
    code, text = run(tmp_path, "run", "--model", "harmonic", "--scheme", "midpoint", "--steps", "10")
    assert code == 0
    lines = text.split("\n")
    assert lines[0] == "step,time,p0,q0,energy,omega_01"
    assert lines[-1] == ""
    assert len(lines) - 2 == 11
    assert "\r" not in text
    # 17 significant digits round-trip exactly
    z1 = midpoint_step(make_mechanics("harmonic")[1], np.array([0.0, 1.0]), 0.1)
    assert [float(v) for v in lines[2].split(",")[2:4]] == list(z1)
    assert z1[1] == pytest.approx((1 - 0.01 / 4) / (1 + 0.01 / 4), rel=1e-15)


def test_run_json_roundtrip(tmp_path):
    code, text = run(tmp_path, "run", "--model", "pendulum", "--steps", "5", "--format", "json", "--tangents", "4")
    assert code == 0
    doc = json.loads(text)
    assert doc["columns"] == ["step", "time", "p0", "q0", "energy", "omega_01", "omega_23"]
    assert len(doc["records"]) == 6
    assert set(doc["records"][3]) == set(doc["columns"])
    assert doc["meta"]["model"] == "pendulum"


def test_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# oscillator\nmodel = harmonic\nparam.omega = 2\nscheme = canonical\nsteps = 3\ntau = 0.05\n")
    code, text = run(tmp_path, "run", "--config", str(cfg), "--steps", "4")
    assert code == 0
    rows = text.strip().split("\n")
    assert len(rows) == 6
    assert float(rows[0 + 1].split(",")[4]) == 2.0  # H = omega^2 q^2 / 2 at q = 1


def test_param_flag(tmp_path):
    code, text = run(tmp_path, "run", "--param", "omega=3", "--steps", "1")
    assert code == 0
    assert float(text.split("\n")[1].split(",")[4]) == 4.5


def test_determinism(tmp_path):
    args = ["run", "--model", "pendulum", "--scheme", "del", "--steps", "30", "--tangents", "5", "--seed", "42"]
    _, a = run(tmp_path, *args, name="a")
    _, b = run(tmp_path, *args, name="b")
    assert a == b
    _, c = run(tmp_path, *args[:-1], "7", name="c")
    assert c != a


@pytest.mark.parametrize(
    "args",
    [
        ["run", "--model", "harmonic", "--scheme", "box"],
        ["run", "--model", "sine_gordon_bridges", "--scheme", "leapfrog_field"],
        ["run", "--model", "harmonic", "--tau", "-1"],
        ["run", "--steps", "0"],
        ["run", "--tau", "abc"],
        ["run", "--model", "kepler"],
        ["run", "--param", "omega"],
        ["run", "--initial", "1,2,3"],
        ["residuals", "--tangents", "1"],
        ["order", "--model", "pendulum"],
        ["order", "--taus", "0.1,0.05"],
    ],
)
def test_config_errors_exit_1(tmp_path, args, capsys):
    code, _ = run(tmp_path, *args)
    assert code == 1
    assert "error" in capsys.readouterr().err


def test_solver_failure_exit_2_with_partial_output(tmp_path, capsys):
    code, text = run(tmp_path, "run", "--model", "pendulum", "--scheme", "midpoint", "--tau", "1e6", "--steps", "5")
    assert code == 2
    assert text.startswith("step,time")
    assert len(text.strip().split("\n")) >= 2
    assert "residual norm" in capsys.readouterr().err


def test_io_failures_exit_3(tmp_path):
    assert main(["run", "--output", str(tmp_path / "missing" / "x.csv")]) == 3
    assert main(["run", "--config", str(tmp_path / "nope.cfg")]) == 3
    assert main(["run", "--initial", str(tmp_path / "nope.txt"), "--output", str(tmp_path / "o")]) == 3


def test_initial_from_file(tmp_path):
    f = tmp_path / "z0.txt"
    f.write_text("0.5 0.25\n")
    code, text = run(tmp_path, "run", "--initial", str(f), "--steps", "1")
    assert code == 0
    assert text.split("\n")[1].startswith("0,0,0.5,0.25,")


def test_residuals_report_midpoint(tmp_path):
    code, text = run(tmp_path, "residuals", "--model", "pendulum", "--steps", "500", "--format", "json", "--windows", "20")
    assert code == 0
    rep = json.loads(text)
    assert rep["max_symplectic_residual"] <= 1e-10
    assert rep["max_identity_residual"] <= 5e-6
    assert abs(rep["energy_slope"]) <= 1e-8


def test_residuals_report_explicit_euler(tmp_path):
    code, text = run(tmp_path, "residuals", "--scheme", "explicit_euler", "--steps", "100", "--format", "json")
    assert code == 0
    rep = json.loads(text)
    assert rep["symplectic_growth_factor"] == pytest.approx(1.01, rel=1e-8)
    assert rep["energy_slope"] > 0


def test_residuals_report_box(tmp_path):
    args = ["residuals", "--model", "sine_gordon_bridges", "--scheme", "box", "--extent", "16", "--h", "1.25", "--tau", "0.625"]
    code, text = run(tmp_path, *args, "--steps", "10", "--windows", "10", "--format", "json")
    assert code == 0
    rep = json.loads(text)
    assert rep["max_multisymplectic_residual"] <= 1e-8
    assert rep["omega0_total_drift"] <= 1e-10


def test_residual_reports_are_deterministic(tmp_path):
    args = ["residuals", "--model", "quartic", "--steps", "50", "--seed", "3"]
    assert run(tmp_path, *args, name="a")[1] == run(tmp_path, *args, name="b")[1]


@pytest.mark.parametrize("scheme,lo,hi", [("midpoint", 1.9, 2.1), ("order4", 3.7, 4.3), ("explicit_euler", 0.8, 1.45)])
def test_order_study(tmp_path, scheme, lo, hi):
    code, text = run(tmp_path, "order", "--scheme", scheme)
    assert code == 0
    rows = [line.split(",") for line in text.strip().split("\n")[1:]]
    assert len(rows) == 4
    assert lo <= float(rows[-1][3]) <= hi


def test_field_runs(tmp_path):
    code, text = run(tmp_path, "run", "--model", "nonlinear_wave", "--scheme", "leapfrog_field", "--extent", "8", "--steps", "3")
    assert code == 0
    header = text.split("\n")[0].split(",")
    assert header[:3] == ["step", "time", "u0"] and header[-1] == "energy"
    code, text = run(tmp_path, "run", "--model", "linear_wave_bridges", "--scheme", "box", "--extent", "8", "--steps", "2", "--format", "json")
    assert code == 0
    doc = json.loads(text)
    assert "msres_01" in doc["columns"] and "w7" in doc["columns"]
    assert np.isfinite([r["energy"] for r in doc["records"]]).all()


def test_field_initial_inline(tmp_path):
    values = ",".join(["0.1"] * 4)
    code, text = run(tmp_path, "run", "--model", "nonlinear_wave", "--scheme", "canonical_field", "--extent", "4", "--initial", values, "--steps", "1")
    assert code == 0
    assert text.split("\n")[1].startswith("0,0,0.10000000000000001,")
