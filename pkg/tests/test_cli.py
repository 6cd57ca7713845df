import hashlib
import json
import subprocess
import sys
from pathlib import Path

import pytest

from mcflab.cli import main, parse_config, run
from mcflab.errors import UsageError


def test_parse_examples():
    cfg = parse_config(["experiment", "oscillation", "--kMax", "20", "--output", "out"])
    assert cfg.command == "experiment" and cfg.experiment_name == "oscillation"
    assert cfg.params == {"kMax": 20, "f": "simple"}
    assert cfg.output_dir == Path("out") and cfg.seed == 0
    cfg = parse_config(["solve-radial", "--ladder=10,20,40", "--t_end", "0.1"])
    assert cfg.params["ladder"] == [10.0, 20.0, 40.0] and cfg.params["t_end"] == 0.1


def test_unknown_key_is_named():
    with pytest.raises(UsageError, match="bogus"):
        parse_config(["experiment", "oscillation", "--bogus", "1"])


@pytest.mark.parametrize("cmd", [["barrier-check"], ["experiment", "annulus"], ["experiment", "asymptotics"]])
def test_dimension_one_rejected(cmd):
    with pytest.raises(UsageError, match="n >= 2"):
        parse_config(cmd + ["--n", "1"])


def test_bad_command_and_experiment():
    with pytest.raises(UsageError):
        parse_config(["fly"])
    with pytest.raises(UsageError):
        parse_config(["experiment", "comb"])
    with pytest.raises(UsageError, match="integer"):
        parse_config(["experiment", "oscillation", "--kMax", "2.5"])


def test_config_file_with_override(tmp_path):
    f = tmp_path / "c.json"
    f.write_text(json.dumps({"command": "experiment", "experimentName": "oscillation", "kMax": 30, "seed": 4}))
    cfg = parse_config(["--config", str(f), "--kMax", "12"])
    assert cfg.params["kMax"] == 12 and cfg.seed == 4


def test_output_from_environment(monkeypatch):
    monkeypatch.setenv("MCFLAB_OUTPUT", "/tmp/from-env")
    assert parse_config(["geometry-verify"]).output_dir == Path("/tmp/from-env")
    assert parse_config(["geometry-verify", "--output", "x"]).output_dir == Path("x")


def test_oscillation_outputs_and_manifest(tmp_path, capsys):
    assert main(["experiment", "oscillation", "--output", str(tmp_path)]) == 0
    assert "[PASS] oscillation.upper_exponent" in capsys.readouterr().out
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    paths = [e["path"] for e in manifest["files"]]
    assert sorted(paths) == ["oscillation.json", "oscillation/lower_odd.csv", "oscillation/upper_even.csv"]
    for e in manifest["files"]:
        assert hashlib.sha256((tmp_path / e["path"]).read_bytes()).hexdigest() == e["sha256"]


def test_runs_are_byte_identical(tmp_path):
    args = ["solve-radial", "--profile", "complete-ball", "--ladder", "10,20", "--t_end", "0.05",
            "--nodes", "65", "--snapshots", "0.025"]
    assert main(args + ["--output", str(tmp_path / "a")]) == 0
    assert main(args + ["--output", str(tmp_path / "b")]) == 0
    for p in sorted((tmp_path / "a").rglob("*")):
        if p.is_file():
            assert p.read_bytes() == (tmp_path / "b" / p.relative_to(tmp_path / "a")).read_bytes()
    assert (tmp_path / "a" / "run-a20" / "t0.025000.csv").exists()


def test_incomplete_data_is_numeric_failure(tmp_path):
    assert main(["solve-radial", "--profile", "constant", "--ladder", "10,20", "--output", str(tmp_path)]) == 3


def test_usage_error_exit_code(capsys):
    assert main(["experiment", "oscillation", "--nope", "1"]) == 2
    assert "nope" in capsys.readouterr().err
    assert main(["--help"]) == 0


def test_failed_check_exit_code(tmp_path):
    # a tiny comb gives too few teeth for the growth fits to land in range
    cfg = parse_config(["experiment", "oscillation", "--kMax", "6", "--output", str(tmp_path)])
    assert run(cfg) == 1


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "mcflab", "geometry-verify", "--patches", "5",
                           "--output", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "geometry.json").exists()
