import json

import pytest

from userldp.cli import main

QUICK_CONFIG = {
    "protocol": "large_m",
    "k": 8,
    "m": 51,
    "n": 16,
    "delta": 0.45,
    "instance": {"kind": "heavy_set", "column": 2, "extra": 0.45},
    "trials": 40,
    "seed": 3,
}


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(QUICK_CONFIG))
    return path


def test_verify_quick(tmp_path):
    out = tmp_path / "report.json"
    code = main(["verify", "--trials-scale", "0.05", "--out", str(out)])
    assert code == 0
    report = json.loads(out.read_text())
    assert report["passed"] is True
    assert {c["name"] for c in report["checks"]} >= {
        "threshold-bias-sweep",
        "norm-preservation-identity",
        "statistic-moment-formulas",
        "randomized-response-privacy",
        "lower-bound-witness",
    }


def test_verify_fails_with_broken_constant(tmp_path):
    out = tmp_path / "report.json"
    code = main([
        "verify", "--trials-scale", "0.05", "--out", str(out),
        "--set", "large_m_threshold_scale=5",
    ])
    assert code == 1
    report = json.loads(out.read_text())
    assert report["passed"] is False


def test_verify_byte_identical_across_threads(tmp_path):
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    assert main(["verify", "--trials-scale", "0.05", "--seed", "9", "--threads", "1",
                 "--out", str(a)]) == 0
    assert main(["verify", "--trials-scale", "0.05", "--seed", "9", "--threads", "4",
                 "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_power_command(config_path, tmp_path):
    out = tmp_path / "power.csv"
    code = main(["power", "--config", str(config_path), "--trials", "20",
                 "--out", str(out), "--plot"])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("protocol,k,m,n,eps,delta,instance,trials")
    assert len(lines) == 2
    assert out.with_suffix(".png").exists()


def test_find_n_command(config_path, tmp_path):
    out = tmp_path / "found.json"
    code = main(["find-n", "--config", str(config_path), "--n-min", "2", "--n-max", "256",
                 "--out", str(out)])
    assert code == 0
    found = json.loads(out.read_text())
    assert found["n_required"] >= 2
    assert found["trace"]


def test_find_n_not_found_exit_code(tmp_path):
    # A bias far below the deviation threshold is invisible to this protocol,
    # so no n in the range can meet the type-II target.
    weak = {**QUICK_CONFIG, "instance": {"kind": "heavy_set", "column": 2, "extra": 0.05}}
    path = tmp_path / "weak.json"
    path.write_text(json.dumps(weak))
    assert main(["find-n", "--config", str(path), "--n-min", "1", "--n-max", "32"]) == 1


def test_scaling_command_deterministic(config_path, tmp_path):
    out1 = tmp_path / "s1.csv"
    out2 = tmp_path / "s2.csv"
    base = ["scaling", "--config", str(config_path), "--m-grid", "11", "51",
            "--protocols", "large_m", "--n-min", "2", "--n-max", "256", "--seed", "3"]
    assert main(base + ["--threads", "1", "--out", str(out1)]) == 0
    assert main(base + ["--threads", "4", "--out", str(out2), "--plot"]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    assert out1.read_text().splitlines()[0] == "protocol,k,m,eps,delta,n_required,ci_low,ci_high,seed"
    assert out2.with_suffix(".png").exists()


def test_config_error_exit_code(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({**QUICK_CONFIG, "protocol": "nope"}))
    assert main(["power", "--config", str(path)]) == 2


def test_lower_bound_demo(tmp_path):
    out = tmp_path / "witness.csv"
    code = main(["lower-bound-demo", "--k", "16", "--bits", "3", "--instances", "4",
                 "--out", str(out)])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "instance,k,bits,tv,channel_residual"
    assert len(lines) == 5


def test_baseline_command(tmp_path):
    # With a real privacy budget the baseline's additive noise needs far more
    # users than this range offers, while the combined tester converges.
    config = {
        "protocol": "combined",
        "k": 8,
        "m": 2,
        "n": 100,
        "delta": 0.45,
        "epsilon": 1.0,
        "instance": {"kind": "paninski", "delta": 0.45},
        "trials": 150,
        "target_error": 0.2,
        "seed": 2,
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    out = tmp_path / "baseline.csv"
    code = main(["baseline", "--config", str(path), "--m-grid", "2", "--n-min", "10",
                 "--n-max", "4096", "--n-step", "16", "--out", str(out)])
    assert code == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 3  # header + one row per protocol
