from __future__ import annotations

import json

import pytest

from mwgkernels.cli import main
from mwgkernels.config import ENV_PREFIX


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    for name in ("SEED", "NUM_SAMPLES", "CHAINS", "OUTPUT_DIR"):
        monkeypatch.delenv(ENV_PREFIX + name, raising=False)


def _exit_code(argv: list[str]) -> int:
    with pytest.raises(SystemExit) as exc:
        main(argv)
    return exc.value.code


def _small_sir(tmp_path, **extra) -> str:
    path = tmp_path / "sir.json"
    sir = {
        "population_sizes": [60, 60],
        "connectivity": [[0.0, 0.5], [0.5, 0.0]],
        "num_times": 15,
        "init_window": 5,
        "beta1": 0.6,
        "beta2": 0.3,
        "initial_infected": [[0, 3]],
        **extra,
    }
    path.write_text(json.dumps({"sir": sir, "kernels": {"da_scans": 2}}), encoding="utf-8")
    return str(path)


def test_no_command_prints_help(capsys):
    assert _exit_code([]) == 0
    assert "sir-fit" in capsys.readouterr().out


def test_usage_error_exits_one():
    assert _exit_code(["gaussian-mwg", "--num-samples", "lots"]) == 1


def test_sir_simulate_writes_artifacts(tmp_path):
    out = tmp_path / "out"
    code = _exit_code(["sir-simulate", "-c", _small_sir(tmp_path), "-o", str(out), "--seed", "3"])
    assert code == 0
    assert {p.name for p in out.iterdir()} == {"events.csv", "trajectory.csv", "summary.json"}
    summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
    assert summary["experiment"] == "sir-simulate"
    assert summary["seed"] == 3


def test_invalid_config_exits_one(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"kernels": {"rwmh_scale": -1.0}}), encoding="utf-8")
    assert _exit_code(["gaussian-mwg", "-c", str(path), "-o", str(tmp_path / "out")]) == 1
    assert "rwmh_scale" in capsys.readouterr().err
    assert not (tmp_path / "out").exists()


def test_infeasible_events_exit_two(tmp_path, capsys):
    events = tmp_path / "events.csv"
    # a removal in the second population before anyone there can be infected
    events.write_text("time,population,si,ir\n0,1,0,4\n", encoding="utf-8")
    config = _small_sir(tmp_path, events_path=str(events))
    code = _exit_code(["sir-fit", "-c", config, "-o", str(tmp_path / "out"), "-n", "10"])
    assert code == 2
    assert "Error" in capsys.readouterr().err


def test_gaussian_run_is_reproducible(tmp_path):
    args = ["gaussian-mwg", "-n", "300", "--seed", "7"]
    assert _exit_code([*args, "-o", str(tmp_path / "a")]) == 0
    assert _exit_code([*args, "-o", str(tmp_path / "b")]) == 0
    first = (tmp_path / "a" / "trace.csv").read_bytes()
    assert first == (tmp_path / "b" / "trace.csv").read_bytes()
    assert first.startswith(b"iteration,mu_x,mu_y\n")
    assert (tmp_path / "a" / "density-grid.csv").exists()
