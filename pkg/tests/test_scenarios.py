import json
import math
import subprocess
import sys

import numpy as np
import pytest
import yaml

from pathframes.cli import main
from pathframes.errors import ConfigError
from pathframes.scenarios import (
    GEOMETRIES,
    default_scenarios,
    describe,
    dump_config,
    list_geometries,
    load_config,
    normalize_config,
    recompute_verdicts,
    run_scenario,
)


@pytest.fixture(scope="module")
def sphere_report():
    return run_scenario({"geometry": "sphere2", "path": {"kind": "latitude", "theta0": math.pi / 3}})


@pytest.fixture(scope="module")
def torsion_report():
    return run_scenario({"geometry": {"name": "torsion-const", "params": {"kappa": 0.3}},
                         "path": "line"})


def write(tmp_path, doc, name="scenario.yaml"):
    target = tmp_path / name
    target.write_text(doc if isinstance(doc, str) else yaml.safe_dump(doc))
    return str(target)


def test_registry_lists_four_geometries():
    assert list_geometries() == ["flat", "polar-flat", "sphere2", "torsion-const"]


def test_describe_sphere():
    info = describe("sphere2")
    assert info["coefficients"] == {
        "Gamma^theta_{phi phi}": "-sin(theta) cos(theta)",
        "Gamma^phi_{theta phi}": "cot(theta)",
        "Gamma^phi_{phi theta}": "cot(theta)",
    }
    assert info["nonzero_only"] is True


def test_sphere_coefficients_follow_from_metric():
    # Levi-Civita symbols of diag(1, sin^2) by finite differences of the metric
    g = GEOMETRIES["sphere2"]
    conn = g.connection()
    x = np.array([0.9, 0.4])
    h = 1e-6
    dg = [(g.metric(x + h * e) - g.metric(x - h * e)) / (2 * h) for e in np.eye(2)]
    ginv = np.linalg.inv(g.metric(x))
    G = np.zeros((2, 2, 2))
    for i in range(2):
        for j in range(2):
            for k in range(2):
                G[i, j, k] = 0.5 * sum(ginv[i, m] * (dg[j][m, k] + dg[k][m, j] - dg[m][j, k])
                                       for m in range(2))
    assert np.max(np.abs(conn.coefficients(x) - G)) < 1e-8


def test_describe_torsion_const():
    info = describe("torsion-const")
    assert list(info["coefficients"]) == ["Gamma^1_{12}"]
    assert info["params"] == {"kappa": 0.3}


def test_describe_unknown_raises():
    with pytest.raises(ConfigError):
        describe("torus")


@pytest.mark.parametrize("raw", [
    {"geometry": "flat", "colour": "red"},
    {"geometry": "flat", "path": {"kind": "line", "start": [0, 0], "end": [1, 1], "speed": 2}},
    {"geometry": {"name": "sphere2", "params": {"radius": 2}}},
    {"geometry": "flat", "tolerances": {"residul": 1e-8}},
    {"geometry": "torus"},
    {"path": "line"},
    {"geometry": "flat", "path": {"kind": "spiral"}},
    {"geometry": "flat", "outputs": ["plot"]},
    {"geometry": {"name": "inline", "dimension": 2, "coefficients": [[1, 1, 3, 0.5]]},
     "path": "line"},
])
def test_bad_configs_are_rejected(raw):
    with pytest.raises(ConfigError):
        normalize_config(raw)


def test_config_round_trip(tmp_path):
    for config in default_scenarios():
        text = dump_config(config)
        assert load_config(write(tmp_path, text)) == config
        assert normalize_config(yaml.safe_load(text)) == config


def test_inline_geometry_matches_builtin():
    inline = run_scenario({"name": "inline", "geometry": {
        "name": "inline", "dimension": 2, "coefficients": [[1, 1, 2, 0.3]]},
        "path": {"kind": "line", "start": [0, 0], "end": [1, 1]}})
    builtin = run_scenario({"name": "inline", "geometry": "torsion-const", "path": "line"})
    assert inline.rows == builtin.rows
    assert inline.summary["holonomicity"] == "anholonomic"


def test_flat_line_is_exact():
    report = run_scenario({"geometry": "flat", "path": "line"})
    assert report.passed
    cols = report.columns
    for row in report.rows:
        assert row[cols.index("residual")] == 0.0
        assert row[cols.index("commutator_norm")] == 0.0
    assert report.summary["holonomicity"] == "holonomic"


def test_sphere_latitude_scenario(sphere_report):
    s = sphere_report.summary
    assert s["status"] == "pass"
    assert s["holonomicity"] == "holonomic"
    assert abs(s["diagnostics"]["holonomy_deficit"] - math.pi) < 1e-6


def test_torsion_scenario_is_anholonomic(torsion_report):
    s = torsion_report.summary
    assert s["status"] == "pass"
    assert s["verdicts"]["transport_residual"] == "pass"
    assert s["holonomicity"] == "anholonomic"
    assert s["diagnostics"]["torsion_free"] is False


def test_rows_reproduce_summary_verdicts(sphere_report, torsion_report):
    for report in (sphere_report, torsion_report):
        again = recompute_verdicts(report)
        assert again["transport_residual"] == report.summary["verdicts"]["transport_residual"]
        assert again["holonomicity"] == report.summary["holonomicity"]
        assert again["torsion_free"] == report.summary["diagnostics"]["torsion_free"]


def test_csv_layout(torsion_report):
    lines = torsion_report.csv_text().splitlines()
    assert lines[0] == "s,x1,x2,A11,A12,A21,A22,residual,commutator_norm,torsion_norm"
    assert len(lines) == 1 + len(torsion_report.rows)
    assert float(lines[-1].split(",")[0]) == 1.0


def test_runs_are_byte_identical(tmp_path):
    config = {"name": "det", "geometry": "polar-flat", "path": "line", "seed": 11}
    run_scenario(config, out_dir=tmp_path / "a")
    run_scenario(config, out_dir=tmp_path / "b")
    for suffix in (".csv", ".summary.json"):
        assert (tmp_path / "a" / f"det{suffix}").read_bytes() == (tmp_path / "b" / f"det{suffix}").read_bytes()


def test_provenance_records_config(torsion_report):
    prov = torsion_report.summary["provenance"]
    assert prov["config"]["geometry"]["params"]["kappa"] == 0.3
    assert prov["grid_nodes"] == 2001
    assert len(prov["config_hash"]) == 64


def test_cli_list_and_describe(capsys):
    assert main(["list"]) == 0
    assert capsys.readouterr().out.split() == list_geometries()
    assert main(["describe", "sphere2"]) == 0
    assert json.loads(capsys.readouterr().out)["name"] == "sphere2"
    assert main(["describe", "torus"]) == 2


def test_cli_run_writes_reports(tmp_path, capsys):
    cfg = write(tmp_path, {"name": "flat-run", "geometry": "flat", "path": "circle"})
    assert main(["run", cfg, "--out", str(tmp_path / "out")]) == 0
    summary = json.loads((tmp_path / "out" / "flat-run.summary.json").read_text())
    assert summary["status"] == "pass"
    assert (tmp_path / "out" / "flat-run.csv").exists()
    assert "flat-run: pass" in capsys.readouterr().out


def test_cli_overrides(tmp_path):
    cfg = write(tmp_path, {"name": "ovr", "geometry": "flat", "path": "line"})
    assert main(["run", cfg, "--out", str(tmp_path), "--steps-per-unit", "400",
                 "--tol", "holonomic=2e-5"]) == 0
    summary = json.loads((tmp_path / "ovr.summary.json").read_text())
    assert summary["provenance"]["grid_nodes"] == 401
    assert summary["provenance"]["config"]["tolerances"]["holonomic"] == 2e-5


def test_cli_config_error_exit_code(tmp_path, capsys):
    assert main(["run", write(tmp_path, {"geometry": "flat", "bogus": 1}), "--out", str(tmp_path)]) == 2
    assert main(["run", str(tmp_path / "missing.yaml"), "--out", str(tmp_path)]) == 2
    assert main(["run", write(tmp_path, "geometry: [unclosed", "bad.yaml")]) == 2
    assert "config error" in capsys.readouterr().err


def test_cli_construction_error_exit_code(tmp_path, capsys):
    cfg = write(tmp_path, {"geometry": "sphere2", "path": "line", "steps_per_unit": 3,
                           "tolerances": {"residual": 1e-14}})
    assert main(["run", cfg, "--out", str(tmp_path)]) == 3
    assert "construction error" in capsys.readouterr().err


def test_cli_verdict_failure_exit_code(tmp_path):
    cfg = write(tmp_path, {"name": "strict", "geometry": "polar-flat", "path": "line",
                           "tolerances": {"transition": 1e-30}})
    assert main(["run", cfg, "--out", str(tmp_path)]) == 1
    summary = json.loads((tmp_path / "strict.summary.json").read_text())
    assert summary["verdicts"]["transition_constancy"] == "fail"


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "pathframes", "list"], capture_output=True,
                         text=True, check=True)
    assert out.stdout.split() == list_geometries()
