import json
import math
from pathlib import Path

import pytest

from nuloss import cli


BASE = {
    "domain": {"length": math.pi, "potential": "-1", "boundary": "dirichlet"},
    "coefficient": {"b": "2+sin(log(1/t))", "nu": {"kind": "log"}, "T": 0.6},
    "zones": {"M": 16.0, "P": 10},
    "solver": {"rel_tol": 1e-10, "abs_tol": 1e-12},
    "counterexample": {"epsilon": 0.05, "p": 8, "k_max": 3, "psi_r": 2.0,
                       "a0": 1, "c1": 1.0},
    "output": {"dir": "out", "format": "csv"},
}


def write_config(tmp_path: Path, overrides=None) -> Path:
    cfg = json.loads(json.dumps(BASE))
    for section, body in (overrides or {}).items():
        cfg.setdefault(section, {}).update(body)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


def run(tmp_path, command, extra=(), overrides=None):
    cfg = write_config(tmp_path, overrides={"output": {"dir": str(tmp_path / "out")},
                                            **(overrides or {})})
    return cli.main([command, "--config", str(cfg), *extra]), tmp_path / "out"


def test_eigen_first_column_squares(tmp_path):
    code, out = run(tmp_path, "eigen")
    assert code == 0
    lines = (out / "eigen.csv").read_text().splitlines()
    assert lines[0].startswith("# nuloss ")
    assert lines[1].split(",")[0] == "eigenvalue"
    first = [float(l.split(",")[0]) for l in lines[2:6]]
    assert first == [1.0, 4.0, 9.0, 16.0]


def test_outputs_are_deterministic(tmp_path):
    code1, out = run(tmp_path, "eigen")
    body1 = (out / "eigen.csv").read_bytes()
    code2, out = run(tmp_path, "eigen")
    body2 = (out / "eigen.csv").read_bytes()
    assert code1 == code2 == 0
    assert body1 == body2


def test_classify_log_power(tmp_path):
    code, out = run(tmp_path, "classify",
                    overrides={"coefficient": {"nu": {"kind": "log_power",
                                                      "gamma": 0.5}}})
    assert code == 0
    doc = json.loads((out / "classify.json").read_text())
    assert doc["loss"] == "arbitrarily_small"
    assert doc["artifact_version"]
    assert doc["config_hash"]


def test_malformed_expression_is_config_error(tmp_path, capsys):
    code, _ = run(tmp_path, "classify",
                  overrides={"coefficient": {"b": "sin(2t)"}})
    assert code == 1
    assert "byte" in capsys.readouterr().err


def test_dotted_override(tmp_path):
    cfg = write_config(tmp_path, overrides={"output": {"dir": str(tmp_path / "o")}})
    code = cli.main(["classify", "--config", str(cfg),
                     '--coefficient.nu={"kind":"constant","c":1.0}',
                     "--coefficient.T=1.0"])
    assert code == 0
    doc = json.loads((tmp_path / "o" / "classify.json").read_text())
    assert doc["loss"] == "none"


def test_unknown_override_rejected(tmp_path):
    cfg = write_config(tmp_path)
    assert cli.main(["classify", "--config", str(cfg), "--zones.Q=1"]) == 1


def test_missing_config_file():
    assert cli.main(["classify", "--config", "/nonexistent/cfg.json"]) == 1


def test_zone_map_command(tmp_path):
    code, out = run(tmp_path, "zones", extra=["--nt", "9", "--nlam", "5",
                                              "--lam-max", "4096"])
    assert code == 0
    lines = (out / "zones.csv").read_text().splitlines()
    assert lines[1] == "t,lambda,zone"
    assert len(lines) == 2 + 9 * 5
    zones_seen = {l.split(",")[2] for l in lines[2:]}
    assert zones_seen <= {"low", "pd", "pe"}


def test_solve_command_trajectory(tmp_path):
    code, out = run(tmp_path, "solve", extra=["--lam", "64", "--t0", "0.0",
                                              "--t1", "0.5"],
                    overrides={"coefficient": {"b": "1", "nu": {"kind": "constant"},
                                               "T": 1.0}})
    assert code == 0
    lines = (out / "trajectory.csv").read_text().splitlines()
    assert lines[1] == "t,re_u,im_u,re_ut,im_ut"
    last = [float(x) for x in lines[-1].split(",")]
    lam = 64.0
    expect = math.cos(lam * 0.5) / lam + math.sin(lam * 0.5) / lam
    assert last[1] == pytest.approx(expect, abs=1e-8)


def test_counterexample_command(tmp_path):
    code, out = run(tmp_path, "counterexample")
    assert code == 0
    fam = json.loads((out / "family.json").read_text())
    assert len(fam["family"]["members"]) == 3
    assert fam["family"]["invariants"]["monotone_weighted"] is True
    lines = (out / "blowup.csv").read_text().splitlines()
    assert lines[1].split(",")[:4] == ["k", "lambda_k", "t_k", "rho_k"]
    assert len(lines) == 2 + 3


def test_counterexample_bad_p_exits_2(tmp_path):
    code, _ = run(tmp_path, "counterexample",
                  overrides={"counterexample": {"p": 2}})
    assert code == 2


def test_verify_command(tmp_path):
    code, out = run(tmp_path, "verify",
                    extra=["--lam-min", "1024", "--lam-max", "4096",
                           "--points", "2"],
                    overrides={"coefficient": {"b": "1", "nu": {"kind": "constant"},
                                               "T": 1.0}})
    assert code == 0
    doc = json.loads((out / "energy_report.json").read_text())
    assert doc["report"]["fitted_c1"] <= 1e-6
    assert doc["report"]["stable"] is True
    rows = (out / "energy_rows.csv").read_text().splitlines()
    assert rows[1].split(",")[0] == "lambda"


def test_seventeen_digit_floats(tmp_path):
    code, out = run(tmp_path, "zones", extra=["--nt", "2", "--nlam", "2"])
    body = (out / "zones.csv").read_text().splitlines()[2]
    t_field = body.split(",")[0]
    assert float(t_field) in (0.6, 0.6 * 2.0**-0.25)
    code2, out2 = run(tmp_path, "counterexample")
    row = (out2 / "blowup.csv").read_text().splitlines()[2]
    t_k = row.split(",")[2]
    assert len(t_k.replace(".", "").replace("-", "").lstrip("0")) >= 16


def test_validation_catches_bad_tolerances(tmp_path):
    code, _ = run(tmp_path, "classify", overrides={"solver": {"rel_tol": -1.0}})
    assert code == 1


def test_rfc4180_line_endings(tmp_path):
    _, out = run(tmp_path, "eigen")
    raw = (out / "eigen.csv").read_bytes()
    assert b"\r\n" in raw


def test_zones_frequency_cut_below_lambda1(tmp_path):
    code, _ = run(tmp_path, "zones", overrides={"zones": {"M": 0.2}})
    assert code == 1
