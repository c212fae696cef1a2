import csv
import io
import json
import math
import subprocess
import sys

import pytest

from halfline_spectral.cli import Grid, RunConfig, main, parse_function
from halfline_spectral.cbf_model import ModelSpec


def run_cli(capsys, *args):
    code = main(list(args))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_theta_stable_one(capsys):
    code, out, _ = run_cli(capsys, "theta", "--model", "stable:1", "--lambda", "1")
    assert code == 0
    r = rows(out)
    assert r[0] == ["lambda", "theta", "c_lambda"]
    assert r[1][1].startswith("0.39269908")
    assert float(r[1][1]) == pytest.approx(math.pi / 8, abs=1e-10)
    assert out.endswith("\r\n")  # RFC 4180 line breaks


def test_theta_compound_poisson(capsys):
    code, out, _ = run_cli(capsys, "theta", "--model", "cp-exp", "--lambda", "1")
    assert code == 0 and float(rows(out)[1][1]) == pytest.approx(math.pi / 4, abs=1e-10)


def test_numbers_have_seventeen_digits(capsys):
    _, out, _ = run_cli(capsys, "theta", "--model", "stable:1", "--lambda", "1")
    assert float(rows(out)[1][1]) == float(repr(float(rows(out)[1][1])))
    assert len(rows(out)[1][1].replace(".", "").lstrip("0")) >= 16


def test_config_file_with_flag_override(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"model": "cp-exp", "lambda": {"min": 0.5, "max": 2, "count": 3,
                                                             "scale": "log"}, "format": "json"}))
    code, out, _ = run_cli(capsys, "theta", "--config", str(cfg))
    data = json.loads(out)
    assert code == 0 and len(data["rows"]) == 3
    assert data["rows"][2]["theta"] == pytest.approx(math.atan(2.0), abs=1e-10)
    code, out, _ = run_cli(capsys, "theta", "--config", str(cfg), "--lambda", "1", "--format", "csv")
    assert code == 0 and len(rows(out)) == 2


def test_unknown_config_key_is_an_error(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"model": "gamma", "bogus": 1}))
    code, _, err = run_cli(capsys, "theta", "--config", str(cfg), "--lambda", "1")
    assert code == 1 and "bogus" in err


def test_output_file_and_byte_determinism(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["eigenfunction", "--model", "stable:1.5", "--lambda", "1.3", "--x", "0:4:9"]
    assert main(args + ["--output", str(a)]) == 0
    assert main(args + ["--output", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    r = rows(a.read_text())
    assert r[0] == ["x", "F", "sin_part", "G"] and len(r) == 10
    assert float(r[1][1]) == 0.0
    assert capsys.readouterr().out == ""


def test_laplace_command(capsys):
    code, out, _ = run_cli(capsys, "laplace", "--model", "brownian", "--lambda", "2", "--xi", "1")
    assert code == 0 and float(rows(out)[1][1]) == pytest.approx(2 / 5, rel=1e-12)


def test_survival_table(capsys, oracle):
    code, out, _ = run_cli(capsys, "survival", "--model", "brownian", "--x", "1", "--t", "1")
    r = rows(out)
    assert code == 0
    assert r[0] == ["t", "x", "survival", "abs_error", "converged", "note"]
    assert float(r[1][2]) == pytest.approx(oracle["brownian_survival_1_1"], abs=1e-7)


def test_heatkernel_gamma_refused_for_small_t(capsys):
    code, _, err = run_cli(capsys, "heatkernel", "--model", "gamma", "--x", "1", "--y", "1",
                           "--t", "0.25")
    assert code == 3
    assert "refused" in err and "1/2" in err


def test_atom_exit_code_reports_location(capsys):
    code, _, err = run_cli(capsys, "eigenfunction", "--model", "rational:5,1;1,5", "--lambda", "1",
                           "--x", "1")
    assert code == 4 and "atom at xi = 2" in err


def test_validate_matrix(capsys):
    code, out, _ = run_cli(capsys, "validate", "--model", "stable:1.5")
    r = rows(out)
    assert code == 0
    assert r[0] == ["group", "check", "passed", "detail"]
    assert any(row[1].startswith("Wiener-Hopf") for row in r)


def test_validate_fails_on_a_non_cbf(capsys):
    # a negative coefficient breaks complete monotonicity of psi'
    bad = json.dumps({"kind": "rational", "terms": [[1.0, 1.0], [-0.5, 2.0]]})
    code, _, err = run_cli(capsys, "validate", "--model", bad)
    assert code == 1


def test_transform_command(capsys):
    code, out, _ = run_cli(capsys, "transform", "--model", "brownian", "--lambda", "1",
                           "--f", "exp:1")
    # int_0^inf e^{-x} sin x dx = 1/2
    assert code == 0 and float(rows(out)[1][1]) == pytest.approx(0.5, abs=1e-7)


def test_bad_inputs(capsys):
    assert run_cli(capsys, "theta", "--model", "nope", "--lambda", "1")[0] == 1
    assert run_cli(capsys, "theta", "--model", "gamma")[0] == 1
    assert run_cli(capsys, "theta", "--model", "gamma", "--lambda", "1", "--tol", "0")[0] == 1
    assert run_cli(capsys, "theta", "--model", "gamma", "--lambda", "1:2:0")[0] == 1
    with pytest.raises(ValueError):
        Grid.parse("0:1:3:cubic")
    with pytest.raises(ValueError):
        parse_function("tent:2:1:3")
    with pytest.raises(ValueError):
        RunConfig("plot", ModelSpec.gamma())


def test_threads_env_fallback(monkeypatch, capsys):
    monkeypatch.setenv("HALFLINE_SPECTRAL_THREADS", "0")
    code, _, err = run_cli(capsys, "theta", "--model", "gamma", "--lambda", "1")
    assert code == 1 and "HALFLINE_SPECTRAL_THREADS" in err
    monkeypatch.setenv("HALFLINE_SPECTRAL_THREADS", "2")
    assert run_cli(capsys, "theta", "--model", "gamma", "--lambda", "1")[0] == 0


def test_console_entry_point_runs_as_module():
    out = subprocess.run([sys.executable, "-m", "halfline_spectral.cli", "theta", "--model",
                          "cp-exp", "--lambda", "1"], capture_output=True, text=True, check=True)
    assert float(out.stdout.splitlines()[1].split(",")[1]) == pytest.approx(math.pi / 4)


def test_mc_compare_stable(capsys):
    code, out, _ = run_cli(capsys, "mc-compare", "--model", "stable:1.2", "--x", "1", "--t", "0.5",
                           "--n", "100000", "--dt", "1e-3", "--seed", "7")
    r = rows(out)
    assert r[0] == ["t", "x", "spectral", "mc", "mc_stderr", "z"]
    assert code == 0 and abs(float(r[1][5])) < 3
