import json

import pytest

from adaptiveba.cli import main, parse_inputs, read_config_file
from adaptiveba.simnet import ConfigError


def test_run_ok(capsys):
    assert main(["run", "--protocol", "bb", "--n", "5", "--value", "abcd"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("protocol,") and ",24," in out[1] and "abcd" in out[1]


def test_config_error():
    assert main(["run", "--n", "5", "--t", "2", "--f", "3"]) == 4
    assert main(["run", "--n", "5", "--t", "1"]) == 4
    assert main(["run", "--protocol", "bb", "--n", "3", "--value", "zz"]) == 4


def test_safety_violation_exit_code():
    args = ["run", "--n", "7", "--f", "3", "--strategy", "two-commit-leader"]
    assert main(args + ["--no-commit-lock"]) == 2
    assert main(args) == 0


def test_config_file_and_flag_precedence(tmp_path, capsys):
    conf = tmp_path / "run.conf"
    conf.write_text("# demo\nprotocol = strong-ff\nn = 5\nf = 1\nstrategy = crash\ninputs = uniform:1\n")
    assert main(["run", "--config", str(conf), "--f", "0"]) == 0
    row = capsys.readouterr().out.splitlines()[1].split(",")
    assert row[:4] == ["strong-ff", "5", "2", "0"]
    bad = tmp_path / "bad.conf"
    bad.write_text("colour = red\n")
    with pytest.raises(ConfigError):
        read_config_file(bad)


def test_parse_inputs():
    assert parse_inputs("uniform:1", "strong-ff", 3) == {1: 1, 2: 1, 3: 1}
    assert parse_inputs("00,ff", "weak-ba", 2) == {1: b"\x00", 2: b"\xff"}
    with pytest.raises(ConfigError):
        parse_inputs("0,1", "strong-ff", 3)


def test_jsonl_trace(tmp_path):
    args = ["run", "--protocol", "strong-ff", "--n", "5", "--f", "1", "--strategy", "crash",
            "--format", "jsonl", "--out-dir", str(tmp_path)]
    assert main(args) == 0
    (path,) = tmp_path.iterdir()
    lines = [json.loads(x) for x in path.read_text().splitlines()]
    assert lines[0]["type"] == "config" and lines[-1]["type"] == "summary"
    assert {x["type"] for x in lines} >= {"envelope", "decision"}
    assert lines[-1]["fallback_triggered"] == "true"


def test_sweep_is_byte_identical(tmp_path, capsys):
    args = ["sweep", "--protocol", "weak-ba", "--n", "3", "5", "--seeds", "2",
            "--strategy", "crash", "random-fuzzer"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(args + ["--out-dir", str(a)]) == 0
    report = capsys.readouterr().err
    assert main(args + ["--out-dir", str(b), "--jobs", "2"]) == 0
    assert (a / "sweep.csv").read_bytes() == (b / "sweep.csv").read_bytes()
    assert "PASS agreement" in report and "FAIL" not in report
