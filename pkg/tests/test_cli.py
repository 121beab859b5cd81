import re
import subprocess
import sys

import numpy as np
import pytest

from scanb.cli import main


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def values(text):
    return dict(line.split("=", 1) for line in text.splitlines() if "=" in line and " " not in line)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "scanb", "calibrate", "--arl", "5000", "--b0", "20"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    lines = proc.stdout.splitlines()
    assert [l.split("=")[0] for l in lines] == ["threshold", "arl_check"]
    assert float(lines[1].split("=")[1]) == pytest.approx(5000, rel=1e-5)


def test_calibrate_ordering(capsys):
    _, low, _ = run(["calibrate", "--arl", 100], capsys)
    _, high, _ = run(["calibrate", "--arl", 10000], capsys)
    assert float(values(low)["threshold"]) < float(values(high)["threshold"])


@pytest.mark.parametrize("argv", [["calibrate", "--arl", "0.5"], ["calibrate", "--arl", "100", "--b0", "1"]])
def test_calibrate_invalid(argv, capsys):
    code, _, err = run(argv, capsys)
    assert code == 2
    assert "--arl must be > 1" in err or "--b0" in err


def test_calibrate_unreachable_target_is_runtime_error(capsys):
    code, _, err = run(["calibrate", "--arl", 5], capsys)
    assert code == 1 and "below" in err


def test_argparse_usage_error():
    proc = subprocess.run([sys.executable, "-m", "scanb", "calibrate"], capture_output=True)
    assert proc.returncode == 2


def test_generate_shape_and_determinism(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        code, out, _ = run(["generate", "--case", "case5-laplace", "--tau", 100, "--length", 200,
                            "--seed", 7, "--out", path], capsys)
        assert code == 0 and "seed=7" in out
    data = np.loadtxt(a, delimiter=",", ndmin=2)
    assert data.shape == (200, 1)
    assert a.read_bytes() == b.read_bytes()


def test_generate_prints_default_seed(tmp_path, capsys):
    code, out, _ = run(["generate", "--case", "null-only", "--tau", 5, "--length", 5,
                        "--out", tmp_path / "s.csv"], capsys)
    assert code == 0 and "seed=0" in out


def test_generate_bad_tau(tmp_path, capsys):
    code, _, err = run(["generate", "--case", "case1-mean-shift", "--tau", 300, "--length", 200,
                        "--out", tmp_path / "s.csv"], capsys)
    assert code == 2 and "--tau" in err
    assert not (tmp_path / "s.csv").exists()


@pytest.fixture
def pool_file(tmp_path, capsys):
    path = tmp_path / "pool.csv"
    run(["generate", "--case", "case1-mean-shift", "--pool", "--length", 300, "--seed", 1,
         "--out", path], capsys)
    return path


def test_detect_no_alarm_with_huge_threshold(tmp_path, pool_file, capsys):
    stream = tmp_path / "null.csv"
    run(["generate", "--case", "null-only", "--tau", 80, "--length", 80, "--seed", 2, "--out", stream],
        capsys)
    code, out, _ = run(["detect", "--stream", stream, "--pool", pool_file, "--threshold", 1e9,
                        "--tuples", 500], capsys)
    assert code == 0
    assert "seed=0" in out
    assert re.search(r"^no alarm final_statistic=\S+$", out, re.M)


def test_detect_alarm_on_shift(tmp_path, pool_file, capsys):
    stream = tmp_path / "shift.csv"
    run(["generate", "--case", "case1-mean-shift", "--tau", 0, "--length", 60, "--seed", 3,
         "--out", stream], capsys)
    code, out, _ = run(["detect", "--stream", stream, "--pool", pool_file, "--arl", 5000,
                        "--tuples", 500, "--seed", 4], capsys)
    assert code == 0 and "seed=4" in out
    match = re.search(r"alarm at t=(\d+) statistic=(\S+)", out)
    assert match and int(match.group(1)) <= 50


def test_detect_width_mismatch_exits_2(tmp_path, pool_file, capsys):
    stream = tmp_path / "bad.csv"
    stream.write_text(",".join(["0.1"] * 10) + "\n0.1,0.2,0.3\n")
    code, _, err = run(["detect", "--stream", stream, "--pool", pool_file, "--threshold", 3], capsys)
    assert code == 2 and "row 2" in err


def test_detect_malformed_row_exits_1(tmp_path, pool_file, capsys):
    stream = tmp_path / "bad.csv"
    stream.write_text(",".join(["0.1"] * 10) + "\n" + ",".join(["x"] * 10) + "\n")
    code, _, err = run(["detect", "--stream", stream, "--pool", pool_file, "--threshold", 3], capsys)
    assert code == 1 and "row 2" in err


def test_detect_config_and_flag_precedence(tmp_path, pool_file, capsys):
    cfg = tmp_path / "d.toml"
    cfg.write_text("[detector]\nthreshold = 1e9\nseed = 11\ntuple_budget = 300\n")
    stream = tmp_path / "s.csv"
    run(["generate", "--case", "case1-mean-shift", "--tau", 0, "--length", 40, "--seed", 3,
         "--out", stream], capsys)
    _, out, _ = run(["detect", "--stream", stream, "--pool", pool_file, "--config", cfg], capsys)
    assert "seed=11" in out and "no alarm" in out
    _, out, _ = run(["detect", "--stream", stream, "--pool", pool_file, "--config", cfg,
                     "--threshold", 3, "--seed", 12], capsys)
    assert "seed=12" in out and "alarm at t=" in out


@pytest.mark.slow
def test_detect_case1_alarms_within_cap(tmp_path, pool_file, capsys):
    hits = 0
    for seed in range(20):
        stream = tmp_path / f"s{seed}.csv"
        run(["generate", "--case", "case1-mean-shift", "--tau", 0, "--length", 60, "--seed", 100 + seed,
             "--out", stream], capsys)
        _, out, _ = run(["detect", "--stream", stream, "--pool", pool_file, "--arl", 5000,
                         "--seed", seed], capsys)
        m = re.search(r"alarm at t=(\d+)", out)
        hits += bool(m and int(m.group(1)) <= 50)
    assert hits >= 19


MINIMAL = """
[plan]
methods = ["scanB"]
cases = ["case1-mean-shift"]
target_arl = 500
replications = 10
base_seed = 7
reference_pool_size = 200
tuple_budget = 1000
"""


def test_experiment_minimal_and_rerun(tmp_path, capsys):
    cfg = tmp_path / "min.toml"
    cfg.write_text(MINIMAL)
    outputs = []
    for name in ("a", "b"):
        code, out, _ = run(["experiment", "--config", cfg, "--out", tmp_path / name], capsys)
        assert code == 0
        assert "base_seed=7" in out
        assert len([l for l in out.splitlines() if l.startswith("scanB ")]) == 1
        outputs.append([(tmp_path / name / f).read_bytes()
                        for f in ("edd_replications.csv", "edd_summary.csv")])
    assert outputs[0] == outputs[1]
    assert (tmp_path / "a" / "metadata.json").exists()
    assert len(outputs[0][0].decode().splitlines()) == 11


def test_experiment_workers_match(tmp_path, capsys):
    cfg = tmp_path / "min.toml"
    cfg.write_text(MINIMAL)
    run(["experiment", "--config", cfg, "--out", tmp_path / "a"], capsys)
    run(["experiment", "--config", cfg, "--out", tmp_path / "b", "--workers", 2], capsys)
    for f in ("edd_replications.csv", "edd_summary.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


@pytest.mark.parametrize("extra,key", [("[plan]\nreplicatons = 3\n", "plan.replicatons"),
                                       ("[plots]\nx = 1\n", "plots"),
                                       ("[plan.grid]\nbandwidth = [1.0]\n", "plan.grid.bandwidth")])
def test_experiment_unknown_key(tmp_path, capsys, extra, key):
    cfg = tmp_path / "bad.toml"
    cfg.write_text(extra)
    code, _, err = run(["experiment", "--config", cfg, "--out", tmp_path / "o"], capsys)
    assert code == 2 and key in err


def test_experiment_flag_overrides_config(tmp_path, capsys):
    cfg = tmp_path / "min.toml"
    cfg.write_text(MINIMAL)
    code, out, _ = run(["experiment", "--config", cfg, "--out", tmp_path / "o", "--seed", 9,
                        "--replications", 3], capsys)
    assert code == 0 and "base_seed=9" in out and "censored=" in out
    assert len((tmp_path / "o" / "edd_replications.csv").read_text().splitlines()) == 4


def test_experiment_failing_cell_exit_1(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text('[plan]\nmethods = ["hotelling"]\nreplications = 2\ncalibration_horizon = 20\n'
                   'calibration_reps = 5\n')
    code, _, err = run(["experiment", "--config", cfg, "--out", tmp_path / "o"], capsys)
    assert code == 1 and "hotelling case1-mean-shift" in err


def test_set_overrides_any_key(tmp_path, capsys):
    cfg = tmp_path / "min.toml"
    cfg.write_text(MINIMAL)
    code, out, _ = run(["experiment", "--config", cfg, "--out", tmp_path / "o",
                        "--set", "plan.replications=2", "--set", "plan.grid.N=[2, 3]",
                        "--set", "run.sweep=true"], capsys)
    assert code == 0
    assert len([l for l in out.splitlines() if l.startswith("scanB ")]) == 2
    assert len((tmp_path / "o" / "edd_replications.csv").read_text().splitlines()) == 5


@pytest.mark.parametrize("item", ["plan.replicaton=2", "plan", "nosuch.key=1"])
def test_set_rejects_bad_keys(tmp_path, capsys, item):
    cfg = tmp_path / "min.toml"
    cfg.write_text(MINIMAL)
    code, _, err = run(["experiment", "--config", cfg, "--out", tmp_path / "o", "--set", item],
                       capsys)
    assert code == 2 and "error:" in err


def test_detect_set_override(tmp_path, pool_file, capsys):
    stream = tmp_path / "s.csv"
    run(["generate", "--case", "case1-mean-shift", "--tau", 0, "--length", 40, "--seed", 3,
         "--out", stream], capsys)
    _, out, _ = run(["detect", "--stream", stream, "--pool", pool_file, "--set",
                     "detector.threshold=1e9", "--set", "detector.tuple_budget=300"], capsys)
    assert "no alarm" in out
