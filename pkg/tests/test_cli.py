import csv
import json
import shutil
import subprocess

import numpy as np
import pytest

import oracles
from qpi.cli import main
from qpi.construction import CodeSpec


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def small_spec(tmp_path, capsys):
    path = tmp_path / "spec.json"
    code, _, _ = run(capsys, "construct", "--n", 6, "--k1", 40, "--k2", 40, "--q", 0.1,
                     "--mu", 32, "--out", path)
    assert code == 0
    return path


def test_construct_rm_summary(capsys, tmp_path):
    path = tmp_path / "rm.json"
    code, out, _ = run(capsys, "construct", "--n", 10, "--k1", 638, "--k2", 638,
                       "--method", "rm", "--out", path)
    assert code == 0
    assert out.strip().startswith("valid=true k=252 mixing_factor=")
    spec = CodeSpec.from_json(path)
    assert spec.k == 252 and spec.valid
    manifest = json.loads((tmp_path / "rm.json.manifest.json").read_text())
    assert manifest["command"] == "construct"
    assert manifest["outputs"] == [str(path.resolve())]
    assert manifest["parameters"]["k1"] == 638


def test_construct_single_qubit(capsys):
    code, out, _ = run(capsys, "construct", "--n", 1, "--k1", 2, "--k2", 1, "--q", 0.1)
    assert code == 0
    assert out.strip() == "valid=true k=1 mixing_factor=0"


def test_construct_rejects_nonpositive_rate(capsys):
    code, _, err = run(capsys, "construct", "--n", 3, "--k1", 4, "--k2", 4)
    assert code == 2
    assert "positive" in err


def test_construct_reports_invalid(capsys):
    code, out, _ = run(capsys, "construct", "--n", 10, "--k1", 533, "--k2", 533,
                       "--q", 0.05, "--mu", 64)
    assert code == 0
    assert out.startswith("valid=false")


def test_config_file_and_flag_precedence(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# defaults\nn = 6\nk1=40\nk2=40\nmethod=rm\n")
    code, out, _ = run(capsys, "construct", "--config", cfg)
    assert code == 0 and out.startswith("valid=true k=16")
    code, out, _ = run(capsys, "construct", "--config", cfg, "--k1", 44)
    assert code == 0 and out.startswith("valid=true k=20")


def test_config_errors(capsys, tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("n=6\nbogus=1\n")
    assert run(capsys, "construct", "--config", cfg)[0] == 2
    assert run(capsys, "construct", "--config", tmp_path / "missing.cfg")[0] == 3


def test_simulate_zero_noise(capsys, small_spec):
    code, out, _ = run(capsys, "simulate", "--spec", small_spec, "--q", 0, "--trials", 1,
                       "--list-size", 1)
    assert code == 0
    header, row = out.strip().splitlines()
    values = dict(zip(header.split(","), row.split(",")))
    assert values["failures"] == "0" and float(values["rate"]) == 0.0


def test_simulate_rows_reproducible(capsys, small_spec, tmp_path):
    out_csv = tmp_path / "sim.csv"
    args = ["simulate", "--spec", small_spec, "--trials", 600, "--list-size", 2,
            "--seed", 17, "--out", out_csv]
    assert run(capsys, *args, "--threads", 1)[0] == 0
    assert run(capsys, *args, "--threads", 4)[0] == 0
    lines = out_csv.read_text().splitlines()
    assert lines[0] == "#schema: qpi-sim/1"
    assert len(lines) == 4
    assert lines[2] == lines[3]
    assert (tmp_path / "sim.csv.manifest.json").exists()


def test_simulate_errors(capsys, tmp_path):
    assert run(capsys, "simulate", "--spec", tmp_path / "none.json")[0] == 3
    bad = tmp_path / "bad.json"
    assert run(capsys, "construct", "--n", 10, "--k1", 533, "--k2", 533, "--q", 0.05,
               "--mu", 64, "--out", bad)[0] == 0
    code, _, err = run(capsys, "simulate", "--spec", bad, "--trials", 10)
    assert code == 2 and "valid" in err
    garbage = tmp_path / "garbage.json"
    garbage.write_text("{}")
    assert run(capsys, "simulate", "--spec", garbage)[0] == 2


def test_sweep_random_alphas_reproducible(capsys, tmp_path):
    outs = []
    for name in ("a.csv", "b.csv"):
        path = tmp_path / name
        code, out, _ = run(capsys, "sweep", "--n", 5, "--k1", 20, "--k2", 20, "--q", 0.08,
                           "--random-alphas", 3, "--trials", 200, "--list-size", 2,
                           "--seed", 4, "--mu", 16, "--out", path)
        assert code == 0
        outs.append(path.read_text())
        assert out.startswith("alpha_star=")
    assert outs[0] == outs[1]
    lines = outs[0].splitlines()
    assert lines[0] == "#schema: qpi-sweep/1"
    assert lines[-1].startswith("#alpha_star=")
    rows = list(csv.DictReader(lines[1:-1]))
    assert len(rows) == 3
    assert sum(r["is_alpha_star"] == "True" for r in rows) == (lines[-1] != "#alpha_star=none")


def test_sweep_all_invalid(capsys):
    code, out, _ = run(capsys, "sweep", "--n", 10, "--k1", 533, "--k2", 533, "--q", 0.05,
                       "--alphas", "1.0", "--trials", 10, "--mu", 64)
    assert code == 0
    assert out.strip().splitlines()[-1] == "alpha_star=none"


def test_sweep_needs_one_alpha_source(capsys):
    assert run(capsys, "sweep", "--n", 5, "--k1", 20, "--k2", 20, "--q", 0.08)[0] == 2


def test_analyze_self_reference(capsys, small_spec, tmp_path):
    rm = tmp_path / "rm.json"
    assert run(capsys, "construct", "--n", 6, "--k1", 40, "--k2", 40, "--method", "rm",
               "--out", rm)[0] == 0
    code, out, _ = run(capsys, "analyze", "--spec", small_spec, "--ref-polar", small_spec,
                       "--ref-rm", rm)
    assert code == 0
    header, row = out.strip().splitlines()
    values = dict(zip(header.split(","), row.split(",")))
    assert float(values["f_polar"]) == 1.0
    assert values["decreasing"] == "True"
    assert int(values["aut_size"]) > 0


def test_analyze_threshold_rm_profile(capsys, tmp_path):
    # 42 = 1 + 6 + 15 + 20 keeps every monomial of degree <= 3
    rm = tmp_path / "rm42.json"
    assert run(capsys, "construct", "--n", 6, "--k1", 42, "--k2", 42, "--method", "rm",
               "--out", rm)[0] == 0
    code, out, _ = run(capsys, "analyze", "--spec", rm)
    assert code == 0
    values = dict(zip(*[line.split(",") for line in out.strip().splitlines()]))
    assert values["profile"] == "6" and values["f_polar"] == ""
    assert int(values["aut_size"]) == 64 * 20158709760


def test_analyze_reference_errors(capsys, small_spec, tmp_path):
    assert run(capsys, "analyze", "--spec", small_spec, "--ref-polar", small_spec)[0] == 2
    assert run(capsys, "analyze", "--spec", small_spec, "--fractions")[0] == 2
    code = run(capsys, "analyze", "--spec", small_spec, "--ref-polar", small_spec,
               "--ref-rm", tmp_path / "missing.json")[0]
    assert code != 0


def test_channel_noiseless(capsys):
    code, out, _ = run(capsys, "channel", "--n", 1, "--q", 0)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "#schema: qpi-channel/1"
    rows = list(csv.DictReader(lines[1:]))
    assert [float(r["p_err"]) for r in rows] == [0.0, 0.0]


def test_channel_rejects_large_noise(capsys):
    assert run(capsys, "channel", "--n", 2, "--q", 0.6)[0] == 2
    assert run(capsys, "channel", "--n", 2, "--q", 0.1, "--alpha", 1.5)[0] == 2


def test_channel_matches_enumeration(capsys, tmp_path):
    path = tmp_path / "ch.csv"
    code, _, _ = run(capsys, "channel", "--n", 2, "--q", 0.1, "--mu", 4096,
                     "--bhattacharyya", "--out", path)
    assert code == 0
    rows = list(csv.DictReader(path.read_text().splitlines()[1:]))
    got = np.array([float(r["p_err"]) for r in rows])
    exact = oracles.virtual_channel_error(np.array([[0.9, 0.1], [0.1, 0.9]]), 2)
    assert np.allclose(got, exact, atol=1e-9)
    assert "bhattacharyya" in rows[0]


@pytest.mark.skipif(shutil.which("qpi") is None, reason="console script not installed")
def test_console_script():
    result = subprocess.run(["qpi", "construct", "--n", "2", "--k1", "3", "--k2", "3", "--method", "rm"],
                            capture_output=True, text=True)
    assert result.returncode == 0
    assert result.stdout.startswith("valid=true k=2")
