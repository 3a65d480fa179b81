from __future__ import annotations

import json

import pytest

from mwgkernels.config import ENV_PREFIX, ExperimentConfig, load_config
from mwgkernels.errors import ConfigError


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    for name in ("SEED", "NUM_SAMPLES", "CHAINS", "OUTPUT_DIR"):
        monkeypatch.delenv(ENV_PREFIX + name, raising=False)


def test_defaults_validate():
    cfg = load_config()
    assert cfg.validate() == []
    assert cfg.experiment == "gaussian-mwg"
    assert cfg.resolved_burn_in == 2000
    assert cfg.gaussian.start == [6.0, 4.0]


def test_json_file(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(
        json.dumps({"seed": 11, "burn_in": 50, "kernels": {"rwmh_scale": 0.5}, "sir": {"num_times": 20}}),
        encoding="utf-8",
    )
    cfg = load_config(config_path=path)
    assert cfg.seed == 11
    assert cfg.resolved_burn_in == 50
    assert cfg.kernels.rwmh_scale == 0.5
    assert cfg.sir.num_times == 20
    assert cfg.sir.gamma == 0.1


def test_toml_file(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(
        'experiment = "sir-fit"\nnum_samples = 300\n\n[sir]\npopulation_sizes = [50, 60]\n'
        "connectivity = [[0.0, 1.0], [1.0, 0.0]]\n",
        encoding="utf-8",
    )
    cfg = load_config(config_path=path)
    assert cfg.experiment == "sir-fit"
    assert cfg.num_samples == 300
    assert cfg.sir.population_sizes == [50, 60]
    assert cfg.validate() == []


def test_unknown_keys_are_rejected(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"kernels": {"rwmh_sclae": 1.0}}), encoding="utf-8")
    with pytest.raises(ConfigError, match="rwmh_sclae"):
        load_config(config_path=path)


def test_file_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(config_path=tmp_path / "missing.json")
    bad = tmp_path / "run.yaml"
    bad.write_text("seed: 1\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(config_path=bad)
    broken = tmp_path / "broken.json"
    broken.write_text("{", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(config_path=broken)


def test_env_overrides_file(tmp_path, monkeypatch):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"seed": 1, "num_samples": 10}), encoding="utf-8")
    monkeypatch.setenv(ENV_PREFIX + "SEED", "5")
    monkeypatch.setenv(ENV_PREFIX + "OUTPUT_DIR", "/tmp/env-out")
    cfg = load_config(config_path=path)
    assert cfg.seed == 5
    assert cfg.num_samples == 10
    assert cfg.output_dir == "/tmp/env-out"


def test_cli_overrides_env(monkeypatch):
    monkeypatch.setenv(ENV_PREFIX + "SEED", "5")
    monkeypatch.setenv(ENV_PREFIX + "CHAINS", "3")
    cfg = load_config(cli_seed=9, cli_experiment="sir-simulate")
    assert cfg.seed == 9
    assert cfg.chains == 3
    assert cfg.experiment == "sir-simulate"


def test_bad_env_integer(monkeypatch):
    monkeypatch.setenv(ENV_PREFIX + "NUM_SAMPLES", "many")
    with pytest.raises(ConfigError):
        load_config()


@pytest.mark.parametrize(
    "change, fragment",
    [
        ({"experiment": "nope"}, "Unknown experiment"),
        ({"seed": -1}, "seed"),
        ({"num_samples": 0}, "num_samples"),
        ({"burn_in": 10_000}, "burn_in"),
        ({"chains": 0}, "chains"),
    ],
)
def test_validate_reports_errors(change, fragment):
    cfg = ExperimentConfig(**change)
    errors = cfg.validate()
    assert any(fragment in e for e in errors)


def test_validate_sections():
    cfg = ExperimentConfig()
    cfg.sir.connectivity = [[0.0, 1.0]]
    cfg.sir.init_window = 100
    cfg.kernels.rwmh_scale = 0.0
    cfg.gaussian.true_mean = [1.0]
    errors = "\n".join(cfg.validate())
    assert "sir.connectivity" in errors
    assert "sir.init_window" in errors
    assert "kernels.rwmh_scale" in errors
    assert "gaussian.true_mean" in errors
