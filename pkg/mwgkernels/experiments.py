"""Experiment runners: 2-D Gaussian MWG, Metropolis demo, SIR simulation and SIR fitting.

Every runner takes a validated :class:`~mwgkernels.config.ExperimentConfig`,
writes its artifacts under ``cfg.output_dir`` and returns the summary that
was written to ``summary.json``.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any

import numpy as np

from mwgkernels import __version__
from mwgkernels.compose import SamplingAlgorithm, mwg_step
from mwgkernels.config import ExperimentConfig
from mwgkernels.diagnostics import geweke_pvalue, ks_against_normal, split_rhat
from mwgkernels.driver import McmcRun, acceptance_rate, mcmc, summarize_chains
from mwgkernels.epi_sir import (
    BETA_NAMES,
    EVENTS,
    IR,
    SI,
    EpiParams,
    MetaPopConfig,
    build_sir_mwg,
    initial_infections,
    initial_state,
    simulate,
    sir_target,
    state_trajectory,
)
from mwgkernels.kernels import adaptive_rwmh, metropolis, rwmh
from mwgkernels.prng import RngKey, fold_in, key_from_seed, split
from mwgkernels.state import Position
from mwgkernels.storage import (
    atomic_write_text,
    columns_to_csv,
    read_events_csv,
    write_events_csv,
    write_summary_json,
    write_trace_csv,
    write_trajectory_csv,
)
from mwgkernels.target import (
    GaussianModelSpec,
    TargetLogDensity,
    conjugate_posterior,
    gaussian_mean_target,
    simulate_gaussian_data,
)

logger = logging.getLogger(__name__)

# reference acceptance rates for the two-stage sampler, reported next to the analytic ones
REFERENCE_ACCEPTANCE = {"mu_x": 0.285, "mu_y": 0.322}

GAUSSIAN_NAMES = ("mu_x", "mu_y")


# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------

def experiment_keys(seed: int) -> tuple[RngKey, RngKey]:
    """``(data_key, chain_key)`` derived from the root seed."""
    data_key, chain_key = split(key_from_seed(seed), 2)
    return data_key, chain_key


def run_chains(
    cfg: ExperimentConfig,
    algorithm: SamplingAlgorithm,
    target: TargetLogDensity,
    initial_position: Position,
    chain_key: RngKey,
) -> list[McmcRun]:
    """Run ``cfg.chains`` independent chains; chain ``c`` uses ``fold_in(chain_key, c)``."""
    keys = [fold_in(chain_key, c) for c in range(cfg.chains)]
    if cfg.chains == 1:
        return [mcmc(cfg.num_samples, algorithm, target, initial_position, keys[0])]
    logger.info("Running %d chains on worker threads", cfg.chains)
    with ThreadPoolExecutor(max_workers=cfg.chains) as pool:
        futures = [
            pool.submit(mcmc, cfg.num_samples, algorithm, target, initial_position, key) for key in keys
        ]
        return [f.result() for f in futures]


def _rhat(runs: list[McmcRun], burn_in: int, labels: tuple[str, ...] | None = None) -> dict[str, float]:
    if len(runs) < 2:
        return {}
    per_chain = [run.samples.flat_columns(burn_in) for run in runs]
    labels = labels or tuple(per_chain[0])
    return {label: split_rhat([cols[label] for cols in per_chain]) for label in labels}


def _geweke(x: np.ndarray) -> float | None:
    # None when the post-burn-in trace is too short to split
    if int(0.1 * len(x)) < 2:
        return None
    return geweke_pvalue(x)


def _write_traces(out: Path, runs: list[McmcRun]) -> list[Path]:
    paths = [write_trace_csv(out / "trace.csv", runs[0].samples)]
    for c, run in enumerate(runs[1:], start=1):
        paths.append(write_trace_csv(out / f"trace-chain{c}.csv", run.samples))
    return paths


def _base_summary(cfg: ExperimentConfig, runs: list[McmcRun]) -> dict[str, Any]:
    return {
        "experiment": cfg.experiment,
        "version": __version__,
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "num_chains": len(runs),
        "wall_time": sum(run.wall_time for run in runs),
        "chain_keys": [repr(run.seed) for run in runs],
    }


# ---------------------------------------------------------------------------
# Gaussian mean model
# ---------------------------------------------------------------------------

def gaussian_problem(cfg: ExperimentConfig) -> tuple[GaussianModelSpec, TargetLogDensity, Position]:
    """Simulate the data set and return ``(spec, target, initial_position)``."""
    g = cfg.gaussian
    data_key, _ = experiment_keys(cfg.seed)
    spec = GaussianModelSpec(true_cov=np.array(g.true_cov), prior_scale=g.prior_scale)
    data = simulate_gaussian_data(spec, g.true_mean, g.num_data, data_key)
    spec = spec.with_data(data)
    x_start, y_start = g.start
    return spec, gaussian_mean_target(spec), Position({"mu_x": x_start, "mu_y": y_start})


def random_walk_acceptance(conditional_sd: float, proposal_sd: float) -> float:
    """Stationary acceptance rate of a Gaussian random walk on a 1-D Gaussian target."""
    return 2.0 / math.pi * math.atan(2.0 * conditional_sd / proposal_sd)


def expected_gaussian_acceptance(spec: GaussianModelSpec, rwmh_scale: float) -> dict[str, float]:
    """Acceptance rates of the two-stage sampler on the exact posterior.

    ``mu_x`` uses a fixed proposal sd; ``mu_y`` uses the adapted sd
    ``2.38 * marginal sd``.
    """
    _, post_cov = conjugate_posterior(spec)
    precision = np.linalg.inv(post_cov)
    cond_x = 1.0 / math.sqrt(precision[0, 0])
    cond_y = 1.0 / math.sqrt(precision[1, 1])
    adapted = 2.38 * math.sqrt(post_cov[1, 1])
    return {
        "mu_x": random_walk_acceptance(cond_x, rwmh_scale),
        "mu_y": random_walk_acceptance(cond_y, adapted),
    }


def gaussian_mwg_algorithm(rwmh_scale: float, adaptive_initial_scale: float) -> SamplingAlgorithm:
    return mwg_step(rwmh(rwmh_scale), ["mu_x"]) >> mwg_step(adaptive_rwmh(adaptive_initial_scale), ["mu_y"])


def density_grid(
    target: TargetLogDensity, centre: np.ndarray, sd: np.ndarray, size: int, width: float = 4.0
) -> dict[str, np.ndarray]:
    """Unnormalised log-density on a ``size x size`` grid spanning ``centre +- width * sd``."""
    xs = np.linspace(centre[0] - width * sd[0], centre[0] + width * sd[0], size)
    ys = np.linspace(centre[1] - width * sd[1], centre[1] + width * sd[1], size)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    values = np.array(
        [target(Position({"mu_x": x, "mu_y": y})) for x, y in zip(gx.ravel(), gy.ravel())]
    )
    return {"mu_x": gx.ravel(), "mu_y": gy.ravel(), "log_density": values}


def _oracle(spec: GaussianModelSpec) -> dict[str, Any]:
    mean, cov = conjugate_posterior(spec)
    return {"mean": mean, "sd": np.sqrt(np.diag(cov)), "cov": cov}


def run_gaussian_mwg(cfg: ExperimentConfig) -> dict[str, Any]:
    """Two-stage MWG on the Gaussian mean: ``rwmh`` on ``mu_x`` then adaptive RWMH on ``mu_y``."""
    out = cfg.resolved_output_dir
    burn_in = cfg.resolved_burn_in
    spec, target, x0 = gaussian_problem(cfg)
    _, chain_key = experiment_keys(cfg.seed)
    algorithm = gaussian_mwg_algorithm(cfg.kernels.rwmh_scale, cfg.kernels.adaptive_initial_scale)

    runs = run_chains(cfg, algorithm, target, x0, chain_key)

    oracle = _oracle(spec)
    rates = [acceptance_rate(run) for run in runs]
    summary = _base_summary(cfg, runs)
    summary.update(
        {
            "model": spec.to_dict(),
            "burn_in": burn_in,
            "parameters": {k: v.to_dict() for k, v in summarize_chains(runs, burn_in).items()},
            "acceptance_rates": {name: rates[0][str(k)] for k, name in enumerate(GAUSSIAN_NAMES)},
            "chain_acceptance_rates": [
                {name: r[str(k)] for k, name in enumerate(GAUSSIAN_NAMES)} for r in rates
            ],
            "expected_acceptance_rates": expected_gaussian_acceptance(spec, cfg.kernels.rwmh_scale),
            "reference_acceptance_rates": REFERENCE_ACCEPTANCE,
            "oracle": {"mean": oracle["mean"], "sd": oracle["sd"]},
            "rhat": _rhat(runs, burn_in),
        }
    )

    paths = _write_traces(out, runs)
    grid = density_grid(target, oracle["mean"], oracle["sd"], cfg.gaussian.grid_size)
    paths.append(atomic_write_text(out / "density-grid.csv", columns_to_csv(grid, index_name="point")))
    paths.append(write_summary_json(out / "summary.json", summary))
    for path in paths:
        logger.info("Wrote %s", path)
    return summary


def run_metropolis_demo(cfg: ExperimentConfig) -> dict[str, Any]:
    """Full-space uniform Metropolis on the Gaussian mean, checked against the exact marginals."""
    out = cfg.resolved_output_dir
    burn_in = cfg.resolved_burn_in
    spec, target, x0 = gaussian_problem(cfg)
    _, chain_key = experiment_keys(cfg.seed)
    algorithm = metropolis(cfg.kernels.metropolis_tau)

    runs = run_chains(cfg, algorithm, target, x0, chain_key)

    oracle = _oracle(spec)
    per_chain = [run.samples.flat_columns(burn_in) for run in runs]
    ks: dict[str, dict[str, float]] = {}
    for k, name in enumerate(GAUSSIAN_NAMES):
        thinned = np.concatenate([columns[name][:: cfg.kernels.thin] for columns in per_chain])
        statistic, pvalue = ks_against_normal(thinned, oracle["mean"][k], oracle["sd"][k])
        ks[name] = {"statistic": statistic, "pvalue": pvalue, "num_samples": int(thinned.size)}

    summary = _base_summary(cfg, runs)
    summary.update(
        {
            "model": spec.to_dict(),
            "burn_in": burn_in,
            "thin": cfg.kernels.thin,
            "parameters": {k: v.to_dict() for k, v in summarize_chains(runs, burn_in).items()},
            "acceptance_rate": acceptance_rate(runs[0])[""],
            "oracle": {"mean": oracle["mean"], "sd": oracle["sd"]},
            "ks": ks,
            "rhat": _rhat(runs, burn_in),
        }
    )

    paths = _write_traces(out, runs)
    paths.append(write_summary_json(out / "summary.json", summary))
    for path in paths:
        logger.info("Wrote %s", path)
    return summary


# ---------------------------------------------------------------------------
# SIR
# ---------------------------------------------------------------------------

def sir_problem(cfg: ExperimentConfig) -> tuple[MetaPopConfig, EpiParams, np.ndarray]:
    s = cfg.sir
    config = MetaPopConfig(
        population_sizes=np.array(s.population_sizes),
        connectivity=np.array(s.connectivity, dtype=float),
        num_times=s.num_times,
        gamma=s.gamma,
        delta_t=s.delta_t,
        init_window=s.init_window,
    )
    x0 = initial_state(config, [(int(p), int(c)) for p, c in s.initial_infected])
    return config, EpiParams(s.beta1, s.beta2), x0


def run_sir_simulate(cfg: ExperimentConfig) -> dict[str, Any]:
    """Simulate one epidemic and write ``events.csv`` and ``trajectory.csv``."""
    out = cfg.resolved_output_dir
    config, params, x0 = sir_problem(cfg)
    data_key, _ = experiment_keys(cfg.seed)
    events = simulate(config, params, x0, data_key)
    trajectory = state_trajectory(config, x0, events)
    assert trajectory is not None

    final = trajectory[-1]
    summary = {
        "experiment": cfg.experiment,
        "version": __version__,
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "model": config.to_dict(),
        "total_infections": events[..., SI].sum(axis=0),
        "total_removals": events[..., IR].sum(axis=0),
        "attack_rate": (config.population_sizes - final[:, 0]) / config.population_sizes,
        "peak_infectious": trajectory[:, :, 1].max(axis=0),
    }
    paths = [
        write_events_csv(out / "events.csv", events),
        write_trajectory_csv(out / "trajectory.csv", trajectory),
        write_summary_json(out / "summary.json", summary),
    ]
    for path in paths:
        logger.info("Wrote %s", path)
    return summary


def _observed_events(
    cfg: ExperimentConfig, config: MetaPopConfig, params: EpiParams, x0: np.ndarray
) -> tuple[np.ndarray, bool]:
    if cfg.sir.events_path:
        # only the removals are data; initial_infections rejects removals nothing can explain
        events = read_events_csv(Path(cfg.sir.events_path), config.num_times, config.num_pops)
        return events, False
    data_key, _ = experiment_keys(cfg.seed)
    return simulate(config, params, x0, data_key), True


def run_sir_fit(cfg: ExperimentConfig) -> dict[str, Any]:
    """Fit ``beta1, beta2`` and the latent infection times given the observed removals."""
    out = cfg.resolved_output_dir
    burn_in = cfg.resolved_burn_in
    config, params, x0 = sir_problem(cfg)
    events, simulated = _observed_events(cfg, config, params, x0)
    removals = events[:, :, IR]
    start_events = initial_infections(config, x0, removals)

    target = sir_target(config, x0)
    initial_position = Position(
        {BETA_NAMES[0]: params.beta1, BETA_NAMES[1]: params.beta2, EVENTS: start_events}
    )
    algorithm = build_sir_mwg(config, cfg.kernels.sir_param_scale, cfg.kernels.da_scans)
    _, chain_key = experiment_keys(cfg.seed)
    runs = run_chains(cfg, algorithm, target, initial_position, chain_key)
    run = runs[0]

    betas = {name: run.samples.column(name) for name in BETA_NAMES}
    stats = summarize_chains(runs, burn_in)
    parameters = {name: stats[name].to_dict() for name in BETA_NAMES}
    rates = acceptance_rate(run)
    si_samples = np.concatenate([r.samples.column(EVENTS)[burn_in:, :, :, SI] for r in runs])
    mean_si = si_samples.mean(axis=0)

    summary = _base_summary(cfg, runs)
    summary.update(
        {
            "model": config.to_dict(),
            "burn_in": burn_in,
            "simulated_data": simulated,
            "parameters": parameters,
            "geweke_pvalue": {name: _geweke(betas[name][burn_in:]) for name in BETA_NAMES},
            "acceptance_rates": {
                "beta": rates["0"],
                "move": rates["1.0"],
                "initial_conditions": rates["1.1"],
            },
            "rhat": _rhat(runs, burn_in, BETA_NAMES),
        }
    )
    if simulated:
        truth = {"beta1": params.beta1, "beta2": params.beta2}
        summary["truth"] = truth
        summary["truth_in_ci"] = {
            name: parameters[name]["q025"] <= truth[name] <= parameters[name]["q975"] for name in BETA_NAMES
        }

    num_times, num_pops = mean_si.shape
    posterior = {
        "time": np.repeat(np.arange(num_times), num_pops),
        "population": np.tile(np.arange(num_pops), num_times),
        "mean_si": mean_si.ravel(),
        "observed_ir": removals.ravel(),
    }
    paths = [
        atomic_write_text(out / "beta-trace.csv", columns_to_csv(betas)),
        atomic_write_text(out / "event-posterior.csv", columns_to_csv(posterior, index_name="cell")),
        write_summary_json(out / "summary.json", summary),
    ]
    if simulated:
        paths.append(write_events_csv(out / "events.csv", events))
    for path in paths:
        logger.info("Wrote %s", path)
    return summary


RUNNERS = {
    "gaussian-mwg": run_gaussian_mwg,
    "metropolis-demo": run_metropolis_demo,
    "sir-simulate": run_sir_simulate,
    "sir-fit": run_sir_fit,
}


def run_experiment(cfg: ExperimentConfig) -> dict[str, Any]:
    return RUNNERS[cfg.experiment](cfg)
