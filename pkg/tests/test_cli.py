import json
import subprocess
import sys

import numpy as np
import pytest

from etpower import cli
from etpower.datagen import Dataset


def run_cli(*args):
    return subprocess.run([sys.executable, "-m", "etpower", *args],
                          capture_output=True, text=True)


def test_simulate_twice_identical(tmp_path):
    args = ["simulate", "--iterations", "6", "--seed", "42", "--effects", "0,20", "--workers", "1"]
    assert cli.main([*args, "--out", str(tmp_path / "a")]) == 0
    assert cli.main([*args, "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "summary.json").read_bytes() == \
        (tmp_path / "b" / "summary.json").read_bytes()
    for name in ("curves.csv", "type_s.csv", "strata.csv", "pval_hist.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_validate_angele(capsys):
    assert cli.main(["validate", "--endpoint", "angele", "--seed", "3"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].split() == ["FFD", "GZD", "GPD", "TVT"]
    ffd_gzd = float(out[1].split()[2])
    assert abs(ffd_gzd - 0.65) <= 0.05


def test_validate_failure_exit_code():
    assert cli.main(["validate", "--endpoint", "metzner", "--seed", "3", "--datasets", "5",
                     "--tolerance", "0.0"]) == 1


def test_generate_then_fit(tmp_path, capsys):
    data = tmp_path / "d.csv"
    assert cli.main(["generate", "--endpoint", "angele", "--seed", "9", "--effect", "20",
                     "--out", str(data)]) == 0
    d = Dataset.read_csv(data)
    assert len(d) == 40 * 40
    capsys.readouterr()
    assert cli.main(["fit", "--data", str(data), "--measure", "ffd"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["converged"] is True
    assert doc["loglik"] >= doc["loglik_null"]
    assert 0 <= doc["p_value"] <= 1


def test_generate_to_stdout_is_reproducible():
    a = run_cli("generate", "--seed", "5")
    b = run_cli("generate", "--seed", "5")
    assert a.returncode == 0 and a.stdout == b.stdout
    assert a.stdout.startswith("subject,item,condition,ffd,gzd,gpd,tvt")


def test_seed_printed_when_omitted(tmp_path):
    res = run_cli("generate", "--out", str(tmp_path / "x.csv"))
    assert res.returncode == 0
    assert "seed:" in res.stderr


def test_report_rerenders(tmp_path, capsys):
    out = tmp_path / "r"
    assert cli.main(["simulate", "--iterations", "4", "--seed", "1", "--effects", "0",
                     "--workers", "1", "--out", str(out)]) == 0
    before = (out / "summary.json").read_bytes()
    (out / "curves.csv").unlink()
    capsys.readouterr()
    assert cli.main(["report", "--out", str(out), "--gnuplot"]) == 0
    assert (out / "curves.csv").exists() and (out / "curves.gp").exists()
    assert (out / "summary.json").read_bytes() == before
    fp = json.loads(capsys.readouterr().out)
    assert [r["criterion"] for r in fp][:3] == ["one", "two", "bonferroni"]


def test_simulate_with_config(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"iterations = 3\nseed = 4\neffects = 0,5\ncriteria = one,two\n"
                   f"out = {tmp_path / 'res'}\n")
    assert cli.main(["simulate", "--config", str(cfg), "--workers", "1"]) == 0
    s = json.loads((tmp_path / "res" / "summary.json").read_text())
    assert s["iterations"] == 3 and s["criteria"] == ["one", "two"]


def test_unknown_flag_is_usage_error():
    res = run_cli("simulate", "--bogus")
    assert res.returncode == 2
    assert "usage" in res.stderr
    with pytest.raises(SystemExit) as exc:
        cli.main(["fit", "--nope"])
    assert exc.value.code == 2


def test_bad_input_exit_code(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("not,a,dataset\n")
    res = run_cli("fit", "--data", str(bad))
    assert res.returncode == 1
    assert res.stderr.startswith("etpower: error:")


def test_missing_subcommand():
    assert run_cli().returncode == 2


def test_generated_csv_has_latin_square(tmp_path):
    path = tmp_path / "g.csv"
    assert cli.main(["generate", "--endpoint", "metzner", "--seed", "2", "--out", str(path)]) == 0
    d = Dataset.read_csv(path)
    np.testing.assert_array_equal(d.condition, (d.subject + d.item) % 2)
