"""Configuration management: JSON/TOML file + env vars + CLI flags (three-tier priority)."""

from __future__ import annotations

import json
import os
import tomllib
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

from mwgkernels.errors import ConfigError

EXPERIMENTS = ("gaussian-mwg", "metropolis-demo", "sir-simulate", "sir-fit")

ENV_PREFIX = "MWG_KERNELS_"

_UINT64_LIMIT = 2**64


# ---------------------------------------------------------------------------
# Sections
# ---------------------------------------------------------------------------

@dataclass
class GaussianSettings:
    true_cov: list[list[float]] = field(default_factory=lambda: [[1.5, 0.3], [0.7, 0.8]])
    true_mean: list[float] = field(default_factory=lambda: [6.0, 4.0])
    num_data: int = 1000
    prior_scale: float = 10.0
    initial_position: list[float] | None = None
    grid_size: int = 101

    @property
    def start(self) -> list[float]:
        return list(self.initial_position if self.initial_position is not None else self.true_mean)


@dataclass
class KernelSettings:
    rwmh_scale: float = 1.8
    adaptive_initial_scale: float = 1.0
    metropolis_tau: float = 0.085
    sir_param_scale: float = 0.1
    da_scans: int = 20
    thin: int = 50


@dataclass
class SirSettings:
    population_sizes: list[int] = field(default_factory=lambda: [200, 200, 200])
    connectivity: list[list[float]] = field(
        default_factory=lambda: [[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]]
    )
    gamma: float = 0.1
    num_times: int = 50
    delta_t: float = 1.0
    init_window: int = 12
    beta1: float = 0.12
    beta2: float = 0.06
    initial_infected: list[list[int]] = field(default_factory=lambda: [[0, 10]])
    events_path: str | None = None


_SECTIONS = {"gaussian": GaussianSettings, "kernels": KernelSettings, "sir": SirSettings}


@dataclass
class ExperimentConfig:
    """Resolved configuration (lowest -> highest priority: file -> env -> CLI)."""

    experiment: str = "gaussian-mwg"
    seed: int = 0
    num_samples: int = 10000
    output_dir: str = "./mwg-output"
    chains: int = 1
    burn_in: int | None = None
    gaussian: GaussianSettings = field(default_factory=GaussianSettings)
    kernels: KernelSettings = field(default_factory=KernelSettings)
    sir: SirSettings = field(default_factory=SirSettings)

    @property
    def resolved_burn_in(self) -> int:
        """Explicit burn-in, or the first fifth of the run."""
        return self.burn_in if self.burn_in is not None else self.num_samples // 5

    @property
    def resolved_output_dir(self) -> Path:
        return Path(self.output_dir)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def validate(self) -> list[str]:
        """Return list of validation errors (empty == OK)."""
        errs: list[str] = []
        if self.experiment not in EXPERIMENTS:
            errs.append(f"Unknown experiment '{self.experiment}'. Choose from: {', '.join(EXPERIMENTS)}")
        if not _is_int(self.seed) or not 0 <= self.seed < _UINT64_LIMIT:
            errs.append(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if not _is_int(self.num_samples) or self.num_samples < 1:
            errs.append(f"num_samples must be a positive integer, got {self.num_samples!r}")
        if not _is_int(self.chains) or self.chains < 1:
            errs.append(f"chains must be a positive integer, got {self.chains!r}")
        if self.burn_in is not None:
            if not _is_int(self.burn_in) or self.burn_in < 0:
                errs.append(f"burn_in must be a non-negative integer, got {self.burn_in!r}")
            elif _is_int(self.num_samples) and self.burn_in >= self.num_samples:
                errs.append(f"burn_in ({self.burn_in}) must be smaller than num_samples ({self.num_samples})")
        if not isinstance(self.output_dir, str) or not self.output_dir:
            errs.append("output_dir must be a non-empty string")
        errs.extend(_validate_gaussian(self.gaussian))
        errs.extend(_validate_kernels(self.kernels))
        errs.extend(_validate_sir(self.sir))
        return errs


# ---------------------------------------------------------------------------
# Validation helpers
# ---------------------------------------------------------------------------

def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _is_matrix(value: Any, rows: int, cols: int) -> bool:
    return (
        isinstance(value, list)
        and len(value) == rows
        and all(isinstance(r, list) and len(r) == cols and all(_is_number(v) for v in r) for r in value)
    )


def _is_vector(value: Any, length: int) -> bool:
    return isinstance(value, list) and len(value) == length and all(_is_number(v) for v in value)


def _positive(errs: list[str], section: str, obj: Any, *names: str) -> None:
    for name in names:
        value = getattr(obj, name)
        if not _is_number(value) or not value > 0:
            errs.append(f"{section}.{name} must be a positive number, got {value!r}")


def _positive_int(errs: list[str], section: str, obj: Any, *names: str) -> None:
    for name in names:
        value = getattr(obj, name)
        if not _is_int(value) or value < 1:
            errs.append(f"{section}.{name} must be a positive integer, got {value!r}")


def _validate_gaussian(g: GaussianSettings) -> list[str]:
    errs: list[str] = []
    if not _is_matrix(g.true_cov, 2, 2):
        errs.append("gaussian.true_cov must be a 2x2 list of numbers")
    if not _is_vector(g.true_mean, 2):
        errs.append("gaussian.true_mean must be a list of two numbers")
    if g.initial_position is not None and not _is_vector(g.initial_position, 2):
        errs.append("gaussian.initial_position must be a list of two numbers")
    _positive_int(errs, "gaussian", g, "num_data")
    _positive(errs, "gaussian", g, "prior_scale")
    if not _is_int(g.grid_size) or g.grid_size < 2:
        errs.append(f"gaussian.grid_size must be an integer >= 2, got {g.grid_size!r}")
    return errs


def _validate_kernels(k: KernelSettings) -> list[str]:
    errs: list[str] = []
    _positive(errs, "kernels", k, "rwmh_scale", "adaptive_initial_scale", "metropolis_tau", "sir_param_scale")
    _positive_int(errs, "kernels", k, "da_scans", "thin")
    return errs


def _validate_sir(s: SirSettings) -> list[str]:
    errs: list[str] = []
    sizes = s.population_sizes
    if not isinstance(sizes, list) or not sizes or not all(_is_int(n) and n > 0 for n in sizes):
        errs.append("sir.population_sizes must be a non-empty list of positive integers")
        return errs
    m = len(sizes)
    if not _is_matrix(s.connectivity, m, m) or any(v < 0 for row in s.connectivity for v in row):
        errs.append(f"sir.connectivity must be a {m}x{m} list of non-negative numbers")
    _positive(errs, "sir", s, "gamma", "delta_t", "beta1", "beta2")
    _positive_int(errs, "sir", s, "num_times", "init_window")
    if _is_int(s.num_times) and _is_int(s.init_window) and s.init_window > s.num_times:
        errs.append(f"sir.init_window ({s.init_window}) must not exceed sir.num_times ({s.num_times})")
    if not isinstance(s.initial_infected, list):
        errs.append("sir.initial_infected must be a list of [population, count] pairs")
    else:
        for pair in s.initial_infected:
            if not (isinstance(pair, list) and len(pair) == 2 and all(_is_int(v) for v in pair)):
                errs.append(f"sir.initial_infected entry {pair!r} is not a [population, count] pair")
            elif not 0 <= pair[0] < m or not 0 <= pair[1] <= sizes[pair[0]]:
                errs.append(f"sir.initial_infected entry {pair!r} is out of range")
    if s.events_path is not None and not isinstance(s.events_path, str):
        errs.append("sir.events_path must be a string")
    return errs


# ---------------------------------------------------------------------------
# Config resolution
# ---------------------------------------------------------------------------

def _load_file(path: Path) -> dict[str, Any]:
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    raw = path.read_text(encoding="utf-8")
    try:
        if path.suffix == ".toml":
            data = tomllib.loads(raw)
        elif path.suffix == ".json":
            data = json.loads(raw)
        else:
            raise ConfigError(f"config file must be .json or .toml, got {path.name}")
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a table/object")
    return data


def _strict_init(cls: type, data: dict[str, Any], where: str) -> Any:
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown {where} key(s): {', '.join(unknown)}")
    return cls(**data)


def _from_dict(data: dict[str, Any]) -> ExperimentConfig:
    top = dict(data)
    sections = {}
    for name, cls in _SECTIONS.items():
        block = top.pop(name, {})
        if not isinstance(block, dict):
            raise ConfigError(f"'{name}' must be a table/object")
        sections[name] = _strict_init(cls, block, f"'{name}'")
    return _strict_init(ExperimentConfig, {**top, **sections}, "top-level")


def _env(name: str, default: str = "") -> str:
    return os.environ.get(ENV_PREFIX + name, default)


def _env_int(name: str) -> int | None:
    raw = _env(name)
    if not raw:
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{ENV_PREFIX}{name} must be an integer, got {raw!r}") from None


def load_config(
    *,
    config_path: str | Path | None = None,
    cli_experiment: str | None = None,
    cli_seed: int | None = None,
    cli_num_samples: int | None = None,
    cli_output_dir: str | None = None,
    cli_chains: int | None = None,
) -> ExperimentConfig:
    """Build an ExperimentConfig by merging file -> env -> CLI flags (not validated)."""

    # 1. File
    file_cfg = _load_file(Path(config_path)) if config_path else {}
    cfg = _from_dict(file_cfg)

    # 2. Env
    env_seed = _env_int("SEED")
    env_num_samples = _env_int("NUM_SAMPLES")
    env_chains = _env_int("CHAINS")

    # 3. CLI over env over file
    if cli_experiment:
        cfg.experiment = cli_experiment
    cfg.seed = _first(cli_seed, env_seed, cfg.seed)
    cfg.num_samples = _first(cli_num_samples, env_num_samples, cfg.num_samples)
    cfg.chains = _first(cli_chains, env_chains, cfg.chains)
    cfg.output_dir = cli_output_dir or _env("OUTPUT_DIR") or cfg.output_dir

    return cfg


def _first(*values: Any) -> Any:
    for value in values:
        if value is not None:
            return value
    return None
