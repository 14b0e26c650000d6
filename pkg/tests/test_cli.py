import json
import math
import subprocess
import sys

import pytest

BASE = [sys.executable, "-m", "spintorus.cli"]


def run_cli(*args, check=True):
    result = subprocess.run(
        BASE + list(args), capture_output=True, text=True
    )
    if check and result.returncode != 0:
        raise AssertionError(f"cli failed ({result.returncode}): {result.stderr}")
    return result


def test_spectrum_trivial_square_reports_kernel(tmp_path):
    out = tmp_path / "s"
    run_cli("spectrum", "--v1", "1 0", "--v2", "0 1", "--eps", "+1 +1", "--out", str(out))
    report = json.loads((out / "spectrum_report.json").read_text())
    assert report["schema_version"] == "1"
    assert report["spectrum"]["kernel_dim_complex"] == 2
    assert [0.0, 2] in report["spectrum"]["closed_form"]


def test_spectrum_unit_square_nontrivial(tmp_path):
    out = tmp_path / "s"
    run_cli("spectrum", "--v1", "1 0", "--v2", "0 1", "--eps", "+1 -1", "--out", str(out))
    report = json.loads((out / "spectrum_report.json").read_text())
    assert report["spectrum"]["lambda1_sqrt_area"] == pytest.approx(math.pi, rel=1e-12)
    assert report["threshold"]["below_threshold"] is True


def test_validation_error_names_field(tmp_path):
    result = run_cli("spectrum", "--grid", "7", "--out", str(tmp_path), check=False)
    assert result.returncode == 2
    assert "n_grid" in result.stderr


def test_solve_below_threshold(tmp_path):
    out = tmp_path / "run"
    run_cli(
        "solve", "--v1", "1 0", "--v2", "0 1", "--eps", "+1 -1",
        "--grid", "16", "--seed", "5", "--out", str(out),
    )
    report = json.loads((out / "solve_report.json").read_text())
    assert report["solution"]["lambda"] == pytest.approx(math.pi, abs=1e-6)
    assert report["threshold"]["below_threshold"] is True
    assert "minimizer regime" in report["threshold"]["verdict"]
    assert report["checks"]["passed"] is True
    assert (out / "solution.json").exists()


def test_solve_above_threshold_flat_torus(tmp_path):
    # y = 0.6: lambda sqrt(area) = pi/sqrt(0.6) > 2 sqrt(pi)
    out = tmp_path / "run"
    run_cli(
        "solve", "--v1", "1 0", "--v2", "0 0.6", "--eps", "+1 -1",
        "--grid", "16", "--seed", "5", "--out", str(out),
    )
    report = json.loads((out / "solve_report.json").read_text())
    assert report["solution"]["lambda"] == pytest.approx(math.pi / math.sqrt(0.6), abs=1e-5)
    assert report["threshold"]["below_threshold"] is False
    assert "threshold not met" in report["threshold"]["verdict"]


def test_reports_are_byte_identical(tmp_path):
    args = ["solve", "--v1", "1 0", "--v2", "0 2", "--eps", "+1 -1", "--grid", "16", "--seed", "3"]
    run_cli(*args, "--out", str(tmp_path / "a"))
    run_cli(*args, "--out", str(tmp_path / "b"))
    a = (tmp_path / "a" / "solve_report.json").read_bytes()
    b = (tmp_path / "b" / "solve_report.json").read_bytes()
    assert a == b


def test_resume_is_deterministic(tmp_path):
    args = ["--v1", "1 0", "--v2", "0 2", "--eps", "+1 -1", "--grid", "16", "--seed", "3"]
    run_cli("solve", *args, "--out", str(tmp_path / "a"))
    run_cli("solve", *args, "--resume", str(tmp_path / "a" / "solution.json"),
            "--out", str(tmp_path / "b"))
    a = json.loads((tmp_path / "a" / "solve_report.json").read_text())
    b = json.loads((tmp_path / "b" / "solve_report.json").read_text())
    assert abs(a["solution"]["lambda"] - b["solution"]["lambda"]) < 1e-12


def test_surface_export_and_verify_only(tmp_path):
    out = tmp_path / "run"
    run_cli(
        "solve", "--v1", "1 0", "--v2", "0 2", "--eps", "+1 -1",
        "--grid", "32", "--seed", "1", "--out", str(out),
    )
    sol_file = str(out / "solution.json")
    run_cli("surface", "--solution", sol_file, "--verify-only", "--out", str(out / "v"))
    assert not (out / "v" / "surface.obj").exists()
    report = json.loads((out / "v" / "surface_report.json").read_text())
    assert report["checks"]["passed"] is True

    run_cli("surface", "--solution", sol_file, "--copies", "2x1", "--out", str(out / "m"))
    assert (out / "m" / "surface.obj").exists()
    assert (out / "m" / "surface.json").exists()
    sidecar = json.loads((out / "m" / "surface.json").read_text())
    assert sidecar["copies"] == [2, 1]


def test_check_passes_on_good_solution(tmp_path):
    out = tmp_path / "run"
    run_cli(
        "solve", "--v1", "1 0", "--v2", "0 1", "--eps", "+1 -1",
        "--grid", "16", "--seed", "2", "--out", str(out),
    )
    result = run_cli("check", "--solution", str(out / "solution.json"), "--out", str(out))
    assert result.returncode == 0


def test_check_fails_on_tampered_solution(tmp_path):
    out = tmp_path / "run"
    run_cli(
        "solve", "--v1", "1 0", "--v2", "0 1", "--eps", "+1 -1",
        "--grid", "16", "--seed", "2", "--out", str(out),
    )
    data = json.loads((out / "solution.json").read_text())
    data["lambda"] *= 1.01
    data["residual"] = 0.0
    (out / "bad.json").write_text(json.dumps(data))
    result = run_cli("check", "--solution", str(out / "bad.json"), "--out", str(out), check=False)
    assert result.returncode == 4


def test_surface_rejects_zero_spinor(tmp_path):
    from spintorus.fields import zero_field
    from spintorus.lattice import SpinStructure, make_lattice
    from spintorus.solver import Solution

    sol = Solution(
        phi=zero_field(make_lattice((1, 0), (0, 1)), SpinStructure(1, -1), 8),
        lam=1.0, p=4.0, residual=0.0, norm_p=0.0,
    )
    path = tmp_path / "zero.json"
    path.write_text(json.dumps(sol.to_dict()))
    result = run_cli("surface", "--solution", str(path), "--out", str(tmp_path), check=False)
    assert result.returncode == 2


def test_config_file_ini_and_json(tmp_path):
    ini = tmp_path / "run.cfg"
    ini.write_text(
        "[lattice]\nv1 = 1 0\nv2 = 0 2\n"
        "[spin]\neps1 = +1\neps2 = -1\n"
        "[run]\nn_grid = 16\nseed = 9\n"
        "[tolerances]\ntol_norm = 1e-10\n"
    )
    out = tmp_path / "ini_out"
    run_cli("solve", "--config", str(ini), "--out", str(out))
    rep_ini = json.loads((out / "solve_report.json").read_text())

    jsn = tmp_path / "run.json"
    jsn.write_text(json.dumps({"v1": [1, 0], "v2": [0, 2], "eps1": 1, "eps2": -1,
                               "n_grid": 16, "seed": 9}))
    out2 = tmp_path / "json_out"
    run_cli("solve", "--config", str(jsn), "--out", str(out2))
    rep_json = json.loads((out2 / "solve_report.json").read_text())
    assert rep_ini["solution"]["lambda"] == rep_json["solution"]["lambda"]


def test_mu_curve_command(tmp_path):
    out = tmp_path / "mu"
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"q_values": [1.8, 2.0], "n_grid": 12}))
    run_cli("mu-curve", "--config", str(cfg), "--v1", "1 0", "--v2", "0 1",
            "--eps", "+1 -1", "--out", str(out))
    report = json.loads((out / "mu_curve_report.json").read_text())
    mus = {row["q"]: row["mu"] for row in report["mu_curve"]}
    assert mus[2.0] == pytest.approx(1 / math.pi, abs=1e-7)
    assert mus[1.8] >= mus[2.0] - 1e-7
