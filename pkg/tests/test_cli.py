import json
import subprocess
import sys

import pytest

from ensemble_ols.cli import run_cli


def run(capsys, *argv):
    code = run_cli(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def kv(line):
    return dict(item.split("=", 1) for item in line.split())


def test_theory_defaults(capsys):
    code, out, err = run(capsys, "theory", "--gamma", "1", "--sigma", "1")
    assert code == 0 and err == ""
    d = kv(out.strip())
    assert d["alpha_star"] == "0.381966" and d["risk"] == "0.618034" and d["ridge"] == "0.618034"


def test_theory_mu_opt(capsys):
    code, out, _ = run(capsys, "theory", "--gamma", "0.5", "--sigma", "1", "--alpha", "0.5", "--mu", "opt")
    d = kv(out.strip())
    assert code == 0 and d["mu_star"] == "1.166667" and d["risk"] == "0.416667"


def test_theory_finite_k_json(capsys):
    code, out, _ = run(capsys, "theory", "--gamma", "2", "--sigma", "1", "--alpha", "0.25", "--k", "10",
                       "--format", "json")
    assert code == 0
    assert json.loads(out)["finite_k_risk"] == pytest.approx(0.957143, abs=5e-7)


def test_theory_domain_error_is_usage_error(capsys):
    code, out, err = run(capsys, "theory", "--gamma", "2", "--sigma", "1", "--alpha", "0.9", "--k", "3")
    assert code == 2 and out == ""
    assert "error" in err and "usage: ensemble-ols theory" in err


def test_unknown_flag_rejected(capsys):
    code, out, err = run(capsys, "theory", "--gamma", "1", "--sigma", "1", "--bogus", "3")
    assert code == 2 and out == "" and "unrecognized arguments" in err


def test_missing_required_value(capsys):
    code, _, err = run(capsys, "theory", "--gamma", "1")
    assert code == 2 and "--sigma" in err


def test_config_file_with_flag_override(capsys, tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"gamma": 1.0, "sigma": 5.0}))
    code, out, _ = run(capsys, "theory", "--config", str(path), "--sigma", "1")
    assert code == 0 and kv(out.strip())["alpha_star"] == "0.381966"


def test_simulate_csv_deterministic(capsys):
    argv = ["simulate", "--n", "30", "--p", "10", "--k", "1,4", "--trials", "3", "--seed", "5", "--format", "csv"]
    code, out1, _ = run(capsys, *argv)
    _, out2, _ = run(capsys, *argv, "--threads", "2")
    assert code == 0 and out1 == out2
    assert out1.splitlines()[0] == "k,mean_risk,se,alpha,eta,trials,seed"
    assert len(out1.splitlines()) == 3


def test_simulate_infeasible(capsys):
    code, out, err = run(capsys, "simulate", "--n", "10", "--p", "20", "--alpha", "1")
    assert code == 2 and out == "" and "infeasible" in err


def test_figure_output_dir(capsys, tmp_path):
    code, out, _ = run(capsys, "figure", "4", "--sigma-grid", "0.5,1", "--output-dir", str(tmp_path), "--format", "csv")
    assert code == 0
    assert (tmp_path / "fig4.csv").read_text() == out
    assert (tmp_path / "manifest.json").exists()


def test_figure_rejects_foreign_flag(capsys):
    code, _, err = run(capsys, "figure", "4", "--n", "10")
    assert code == 2 and "--n" in err


def test_validate_bad_trials(capsys):
    code, out, err = run(capsys, "validate", "--trials", "0")
    assert code == 2 and out == "" and "trials" in err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "ensemble_ols", "theory", "--gamma", "2", "--sigma", "1"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert "alpha_star=0.219224" in proc.stdout
