import io
import json
import math

import pandas as pd
import pytest
from click.testing import CliRunner

from deloclab.cli import EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION, lab, main

BESSEL_ARGS = ["bessel", "--seed", "3", "--param", "r=0,1", "--param", "r_max=100", "--param", "R=100", "--no-timing"]
DELTA_ARGS = ["capacity", "--profile", "delta", "--n", "16", "--trials", "50", "--eps", "0.5", "--seed", "7"]


@pytest.fixture
def runner():
    return CliRunner()


def test_bessel_run_prints_csv(runner):
    result = runner.invoke(lab, BESSEL_ARGS)
    assert result.exit_code == EXIT_OK
    frame = pd.read_csv(io.StringIO(result.stdout))
    j0 = frame[frame["metric"] == "j0"]
    assert j0["value"].tolist()[0] == 1.0
    assert "wall_time" not in frame.columns
    assert set(frame["seed"]) == {3}


def test_runs_without_timing_are_byte_identical(runner):
    first = runner.invoke(lab, DELTA_ARGS + ["--no-timing"])
    second = runner.invoke(lab, DELTA_ARGS + ["--no-timing"])
    assert first.exit_code == second.exit_code == EXIT_OK
    assert first.stdout == second.stdout


@pytest.mark.parametrize("args", [
    ["capacity", "--profile", "geometric(0.9)", "--n", "16", "--trials", "2048", "--eps", "0.25", "--seed", "11"],
    ["sharpness", "--eps", "0.1,0.2", "--samples", "300000", "--seed", "12"],
])
def test_output_does_not_depend_on_worker_count(runner, args):
    serial = runner.invoke(lab, args + ["--workers", "1", "--no-timing"])
    parallel = runner.invoke(lab, args + ["--workers", "8", "--no-timing"])
    assert serial.exit_code == parallel.exit_code == EXIT_OK
    assert serial.stdout == parallel.stdout


def test_json_output(runner):
    result = runner.invoke(lab, DELTA_ARGS + ["--format", "json"])
    assert result.exit_code == EXIT_OK
    rows = json.loads(result.stdout)
    rate = next(row for row in rows if row["metric"] == "mean_rate")
    assert rate["value"] == pytest.approx(math.log(2), abs=1e-11)
    assert rate["wall_time"] >= 0


def test_config_file_and_flag_override(runner, tmp_path):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"experiment": "bessel", "params": {"r": [2.0], "r_max": 100, "R": [100]}, "seed": 1}))
    out = tmp_path / "result.csv"
    result = runner.invoke(lab, ["--config", str(config), "--param", "r=0", "--out", str(out)])
    assert result.exit_code == EXIT_OK
    frame = pd.read_csv(out)
    assert frame[frame["metric"] == "j0"]["r"].tolist() == [0.0]


@pytest.mark.parametrize("args", [
    ["capacity", "--snr", "-1", "--seed", "1"],
    ["teleport"],
    [],
    ["bessel", "--param", "r_max"],
])
def test_validation_errors_exit_with_one(runner, args):
    result = runner.invoke(lab, args)
    assert result.exit_code == EXIT_VALIDATION


def test_runtime_errors_exit_with_two(runner, tmp_path):
    result = runner.invoke(lab, DELTA_ARGS + ["--out", str(tmp_path / "missing" / "out.csv")])
    assert result.exit_code == EXIT_RUNTIME


def test_list_experiments(runner):
    result = runner.invoke(lab, ["--list"])
    assert result.exit_code == EXIT_OK
    for name in ("capacity", "quadratic", "clt"):
        assert name in result.stdout


def test_main_exit_codes():
    with pytest.raises(SystemExit) as info:
        main(["--list"])
    assert info.value.code == EXIT_OK
    with pytest.raises(SystemExit) as info:
        main(["--no-such-option"])
    assert info.value.code == EXIT_VALIDATION
