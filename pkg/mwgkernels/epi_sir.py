"""Discrete-time meta-population SIR: simulator, event-tensor likelihood and data-augmentation kernels.

Events are stored as a ``(T, m, 2)`` integer tensor: ``events[t, i, 0]`` is the
number of S->I transitions in population ``i`` during block ``t`` and
``events[t, i, 1]`` the number of I->R transitions. Removals are treated as
observed; the kernels here only ever touch the S->I slice.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Any, NamedTuple

import numpy as np
import scipy.special

from mwgkernels.compose import SamplingAlgorithm, log_transform, multi_scan, mwg_step
from mwgkernels.errors import InfeasibleEventsError, InvalidArgumentError
from mwgkernels.kernels import adaptive_rwmh, metropolis_hastings_step
from mwgkernels.prng import Bernoulli, Binomial, IntegerUniform, RngKey, sample_primitive, split
from mwgkernels.state import ChainAndKernelState, ChainState, Position
from mwgkernels.target import TargetLogDensity, make_target

logger = logging.getLogger(__name__)

SI, IR = 0, 1
S, I, R = 0, 1, 2

EVENTS = "events"
BETA_NAMES = ("beta1", "beta2")

PRIOR_RATE = 1e-3
DEFAULT_DA_SCANS = 20


@dataclass(frozen=True)
class MetaPopConfig:
    """Fixed structure of the meta-population model."""

    population_sizes: np.ndarray
    connectivity: np.ndarray
    num_times: int
    gamma: float = 0.1
    delta_t: float = 1.0
    init_window: int = 12

    def __post_init__(self) -> None:
        sizes = np.asarray(self.population_sizes, dtype=np.int64).reshape(-1)
        conn = np.asarray(self.connectivity, dtype=float)
        object.__setattr__(self, "population_sizes", sizes)
        object.__setattr__(self, "connectivity", conn)
        m = sizes.size
        if m < 1 or np.any(sizes < 1):
            raise InvalidArgumentError("population_sizes must be a non-empty vector of positive integers")
        if conn.shape != (m, m):
            raise InvalidArgumentError(f"connectivity must be {m}x{m}, got {conn.shape}")
        if not np.all(np.isfinite(conn)) or np.any(conn < 0):
            raise InvalidArgumentError("connectivity entries must be finite and non-negative")
        if self.num_times < 1:
            raise InvalidArgumentError(f"num_times must be positive, got {self.num_times}")
        if not self.gamma > 0 or not self.delta_t > 0:
            raise InvalidArgumentError("gamma and delta_t must be positive")
        if not 1 <= self.init_window <= self.num_times:
            raise InvalidArgumentError(
                f"init_window must lie in [1, num_times={self.num_times}], got {self.init_window}"
            )

    @property
    def num_pops(self) -> int:
        return int(self.population_sizes.size)

    @property
    def removal_probability(self) -> float:
        return -math.expm1(-self.gamma * self.delta_t)

    @cached_property
    def log_factorials(self) -> np.ndarray:
        """``log(n!)`` for ``n = 0 .. max(population_sizes)``."""
        return scipy.special.gammaln(np.arange(int(self.population_sizes.max()) + 1) + 1.0)

    def to_dict(self) -> dict[str, Any]:
        return {
            "population_sizes": self.population_sizes.tolist(),
            "connectivity": self.connectivity.tolist(),
            "num_times": self.num_times,
            "gamma": self.gamma,
            "delta_t": self.delta_t,
            "init_window": self.init_window,
        }


@dataclass(frozen=True)
class EpiParams:
    beta1: float
    beta2: float


def initial_state(config: MetaPopConfig, initial_infected: list[tuple[int, int]]) -> np.ndarray:
    """Build ``x0`` (``m x 3``) with everyone susceptible except the listed infectives."""
    x0 = np.zeros((config.num_pops, 3), dtype=np.int64)
    x0[:, S] = config.population_sizes
    for pop, count in initial_infected:
        if not 0 <= pop < config.num_pops:
            raise InvalidArgumentError(f"initial infected population {pop} out of range")
        if not 0 <= count <= x0[pop, S]:
            raise InvalidArgumentError(f"cannot infect {count} of population {pop}")
        x0[pop, S] -= count
        x0[pop, I] += count
    return x0


def _check_x0(config: MetaPopConfig, x0: np.ndarray) -> np.ndarray:
    x0 = np.asarray(x0, dtype=np.int64)
    if x0.shape != (config.num_pops, 3):
        raise InvalidArgumentError(f"x0 must have shape ({config.num_pops}, 3), got {x0.shape}")
    if np.any(x0 < 0) or np.any(x0.sum(axis=1) != config.population_sizes):
        raise InvalidArgumentError("x0 rows must be non-negative and sum to the population sizes")
    return x0


def _check_events(config: MetaPopConfig, events: np.ndarray) -> np.ndarray:
    events = np.asarray(events)
    expected = (config.num_times, config.num_pops, 2)
    if events.shape != expected:
        raise InvalidArgumentError(f"events must have shape {expected}, got {events.shape}")
    return events.astype(np.int64, copy=False)


# ---------------------------------------------------------------------------
# Hazards and trajectories
# ---------------------------------------------------------------------------

def _infection_probability(
    config: MetaPopConfig, beta1: float, beta2: float, infectious: np.ndarray
) -> np.ndarray:
    # infectious has trailing axis m; leading axes are broadcast
    prevalence = infectious / config.population_sizes
    hazard = beta1 * prevalence + beta2 * prevalence @ config.connectivity.T
    return -np.expm1(-hazard * config.delta_t)


def si_hazard(config: MetaPopConfig, params: EpiParams, state_t: np.ndarray) -> np.ndarray:
    """Per-susceptible infection probability for one block, one entry per population."""
    state_t = np.asarray(state_t)
    return _infection_probability(config, params.beta1, params.beta2, state_t[:, I].astype(float))


def _feasible_trajectory(x0: np.ndarray, events: np.ndarray) -> tuple[np.ndarray | None, str | None]:
    # inputs already shape-checked; returns (trajectory, None) or (None, problem)
    if np.any(events < 0):
        t, i, k = np.argwhere(events < 0)[0]
        return None, f"negative {'S->I' if k == SI else 'I->R'} count at time {t}, population {i}"
    trajectory = _unchecked_trajectory(x0, events)
    start = trajectory[:-1]
    over_s = events[:, :, SI] > start[:, :, S]
    over_i = events[:, :, IR] > start[:, :, I]
    bad = over_s | over_i
    if not bad.any():
        return trajectory, None
    # every block before the first bad one is feasible, so its start counts are exact
    t = int(np.argwhere(bad)[0][0])
    if over_s[t].any():
        i = int(np.flatnonzero(over_s[t])[0])
        return None, f"{events[t, i, SI]} S->I events exceed S={start[t, i, S]} at time {t}, population {i}"
    i = int(np.flatnonzero(over_i[t])[0])
    return None, f"{events[t, i, IR]} I->R events exceed I={start[t, i, I]} at time {t}, population {i}"


def find_infeasibility(config: MetaPopConfig, x0: np.ndarray, events: np.ndarray) -> str | None:
    """Describe the first block where ``events`` overdraws a compartment, or ``None``."""
    _, problem = _feasible_trajectory(_check_x0(config, x0), _check_events(config, events))
    return problem


def state_trajectory(config: MetaPopConfig, x0: np.ndarray, events: np.ndarray) -> np.ndarray | None:
    """Compartment counts ``(T + 1, m, 3)`` implied by ``events``, or ``None`` if infeasible."""
    trajectory, _ = _feasible_trajectory(_check_x0(config, x0), _check_events(config, events))
    return trajectory


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------

def simulate(config: MetaPopConfig, params: EpiParams, x0: np.ndarray, key: RngKey) -> np.ndarray:
    """Chain-binomial forward simulation; returns a feasible ``(T, m, 2)`` event tensor."""
    state = _check_x0(config, x0).copy()
    q = config.removal_probability
    events = np.zeros((config.num_times, config.num_pops, 2), dtype=np.int64)
    for t, block_key in enumerate(split(key, config.num_times)):
        si_key, ir_key = split(block_key, 2)
        p = si_hazard(config, params, state)
        si = sample_primitive(si_key, Binomial(state[:, S], p))
        ir = sample_primitive(ir_key, Binomial(state[:, I], q))
        events[t, :, SI] = si
        events[t, :, IR] = ir
        state[:, S] -= si
        state[:, I] += si - ir
        state[:, R] += ir
    logger.debug("Simulated %d infections, %d removals", events[..., SI].sum(), events[..., IR].sum())
    return events


# ---------------------------------------------------------------------------
# Likelihood
# ---------------------------------------------------------------------------

def _binomial_logpmf(
    log_factorials: np.ndarray, k: np.ndarray, n: np.ndarray, p: np.ndarray
) -> np.ndarray:
    # k <= n <= len(log_factorials) - 1, all non-negative integers
    return (
        log_factorials[n]
        - log_factorials[k]
        - log_factorials[n - k]
        + scipy.special.xlogy(k, p)
        + scipy.special.xlog1py(n - k, -p)
    )


def log_prior(params: EpiParams) -> float:
    """Independent exponential priors on both infection rates."""
    if not (params.beta1 > 0 and params.beta2 > 0):
        return -math.inf
    return 2.0 * math.log(PRIOR_RATE) - PRIOR_RATE * (params.beta1 + params.beta2)


def log_density(
    config: MetaPopConfig,
    params: EpiParams,
    x0: np.ndarray,
    events: np.ndarray,
    include_prior: bool = True,
) -> float:
    """Chain-binomial log-likelihood of ``events`` (plus the log-prior); ``-inf`` if infeasible."""
    return _log_density(config, params, _check_x0(config, x0), _check_events(config, events), include_prior)


def _log_density(
    config: MetaPopConfig, params: EpiParams, x0: np.ndarray, events: np.ndarray, include_prior: bool
) -> float:
    if not (params.beta1 >= 0 and params.beta2 >= 0):
        return -math.inf
    trajectory, _ = _feasible_trajectory(x0, events)
    if trajectory is None:
        return -math.inf
    start = trajectory[:-1]
    # both transitions in one pass: slot SI draws from S, slot IR from I
    at_risk = start[:, :, [S, I]]
    p = np.empty(events.shape)
    p[:, :, SI] = _infection_probability(config, params.beta1, params.beta2, start[:, :, I].astype(float))
    p[:, :, IR] = config.removal_probability
    total = float(np.sum(_binomial_logpmf(config.log_factorials, events, at_risk, p)))
    if include_prior:
        total += log_prior(params)
    if math.isnan(total):
        return -math.inf
    return total


def sir_prototype(config: MetaPopConfig) -> Position:
    return Position(
        {
            "beta1": 0.0,
            "beta2": 0.0,
            EVENTS: np.zeros((config.num_times, config.num_pops, 2), dtype=np.int64),
        }
    )


def sir_target(config: MetaPopConfig, x0: np.ndarray) -> TargetLogDensity:
    """Joint posterior over ``{beta1, beta2, events}``."""
    x0 = _check_x0(config, x0)

    def log_prob(position: Position) -> float:
        params = EpiParams(float(position["beta1"]), float(position["beta2"]))
        if not (params.beta1 > 0 and params.beta2 > 0):
            return -math.inf
        return _log_density(config, params, x0, _check_events(config, position[EVENTS]), include_prior=True)

    return make_target(log_prob, sir_prototype(config))


# ---------------------------------------------------------------------------
# Data-augmentation kernels
# ---------------------------------------------------------------------------

class MoveEventInfo(NamedTuple):
    is_accepted: np.bool_
    log_acceptance: np.float64
    source: np.int64
    destination: np.int64
    population: np.int64


class InitialConditionsInfo(NamedTuple):
    is_accepted: np.bool_
    log_acceptance: np.float64
    is_add: np.bool_
    time: np.int64
    population: np.int64
    empty_window: np.bool_


def _pick_event(key: RngKey, counts: np.ndarray) -> tuple[int, ...]:
    """Choose one event uniformly among ``counts.sum()``; return its cell index."""
    total = int(counts.sum())
    r = int(sample_primitive(key, IntegerUniform(0, total)))
    flat = int(np.searchsorted(np.cumsum(counts.ravel()), r, side="right"))
    return tuple(int(v) for v in np.unravel_index(flat, counts.shape))


def _with_si(position: Position, si: np.ndarray) -> Position:
    events = np.array(position[EVENTS])
    events[:, :, SI] = si
    return Position({EVENTS: events})


def _events_init(target: TargetLogDensity, position: Position) -> ChainAndKernelState:
    if EVENTS not in position or len(position) != 1:
        raise InvalidArgumentError(f"event kernels act on a single '{EVENTS}' entry, got {position.names}")
    return ChainAndKernelState(ChainState(position, target(position), ()), ())


def move_event_kernel(config: MetaPopConfig) -> SamplingAlgorithm:
    """Move one S->I event to a different time block of the same population."""
    num_times = config.num_times

    def step_fn(
        target: TargetLogDensity, state: ChainAndKernelState, seed: RngKey
    ) -> tuple[ChainAndKernelState, MoveEventInfo]:
        pick_key, destination_key, acceptance_key = split(seed, 3)
        chain = state.chain
        si = np.asarray(chain.position[EVENTS][:, :, SI])
        if num_times < 2 or si.sum() == 0:
            info = MoveEventInfo(
                is_accepted=np.bool_(False),
                log_acceptance=np.float64(-math.inf),
                source=np.int64(-1),
                destination=np.int64(-1),
                population=np.int64(-1),
            )
            return state, info

        t, i = _pick_event(pick_key, si)
        d = int(sample_primitive(destination_key, IntegerUniform(0, num_times - 1)))
        t_dest = d if d < t else d + 1
        log_correction = math.log(si[t_dest, i] + 1) - math.log(si[t, i])
        new_si = si.copy()
        new_si[t, i] -= 1
        new_si[t_dest, i] += 1
        proposed = _with_si(chain.position, new_si)

        new_chain, mh = metropolis_hastings_step(target, chain, proposed, log_correction, acceptance_key)
        info = MoveEventInfo(
            is_accepted=mh.is_accepted,
            log_acceptance=mh.log_acceptance,
            source=np.int64(t),
            destination=np.int64(t_dest),
            population=np.int64(i),
        )
        return ChainAndKernelState(new_chain, state.kernel), info

    return SamplingAlgorithm(_events_init, step_fn)


def initial_conditions_kernel(config: MetaPopConfig) -> SamplingAlgorithm:
    """Add or delete one S->I event inside the first ``init_window`` blocks."""
    window = config.init_window
    num_cells = window * config.num_pops

    def step_fn(
        target: TargetLogDensity, state: ChainAndKernelState, seed: RngKey
    ) -> tuple[ChainAndKernelState, InitialConditionsInfo]:
        choice_key, cell_key, acceptance_key = split(seed, 3)
        chain = state.chain
        si = np.asarray(chain.position[EVENTS][:, :, SI])
        in_window = si[:window]
        n_window = int(in_window.sum())
        is_add = bool(sample_primitive(choice_key, Bernoulli(0.5)))

        if not is_add and n_window == 0:
            info = InitialConditionsInfo(
                is_accepted=np.bool_(False),
                log_acceptance=np.float64(-math.inf),
                is_add=np.bool_(False),
                time=np.int64(-1),
                population=np.int64(-1),
                empty_window=np.bool_(True),
            )
            return state, info

        new_si = si.copy()
        if is_add:
            cell = int(sample_primitive(cell_key, IntegerUniform(0, num_cells)))
            t, i = divmod(cell, config.num_pops)
            n_cell = int(in_window[t, i])
            new_si[t, i] += 1
            log_correction = math.log((n_cell + 1) * num_cells) - math.log(n_window + 1)
        else:
            t, i = _pick_event(cell_key, in_window)
            n_cell = int(in_window[t, i])
            new_si[t, i] -= 1
            log_correction = math.log(n_window) - math.log(num_cells * n_cell)
        proposed = _with_si(chain.position, new_si)

        new_chain, mh = metropolis_hastings_step(target, chain, proposed, log_correction, acceptance_key)
        info = InitialConditionsInfo(
            is_accepted=mh.is_accepted,
            log_acceptance=mh.log_acceptance,
            is_add=np.bool_(is_add),
            time=np.int64(t),
            population=np.int64(i),
            empty_window=np.bool_(False),
        )
        return ChainAndKernelState(new_chain, state.kernel), info

    return SamplingAlgorithm(_events_init, step_fn)


def build_sir_mwg(
    config: MetaPopConfig,
    param_kernel_scale: float,
    num_da_scans: int = DEFAULT_DA_SCANS,
) -> SamplingAlgorithm:
    """One parameter update followed by ``num_da_scans`` sweeps of (move >> initial-conditions)."""
    parameter_kernel = mwg_step(log_transform(adaptive_rwmh(param_kernel_scale)), list(BETA_NAMES))
    augmentation = mwg_step(move_event_kernel(config), [EVENTS]) >> mwg_step(
        initial_conditions_kernel(config), [EVENTS]
    )
    return parameter_kernel >> multi_scan(num_da_scans, augmentation)


# ---------------------------------------------------------------------------
# Initialisation for fitting
# ---------------------------------------------------------------------------

def _has_pressure(config: MetaPopConfig, infectious: np.ndarray, pop: int) -> bool:
    return bool(infectious[pop] > 0 or np.any(config.connectivity[pop] * infectious > 0))


def initial_infections(
    config: MetaPopConfig,
    x0: np.ndarray,
    removals: np.ndarray,
    lag: int | None = None,
) -> np.ndarray:
    """Build a feasible event tensor for observed ``removals`` (``T x m``).

    Every removal the infectious pool cannot cover gets its infection placed
    about ``lag`` blocks earlier (default ``round(1 / (gamma * delta_t))``),
    at the first block where the population is under infection pressure.
    """
    x0 = _check_x0(config, x0)
    removals = np.asarray(removals, dtype=np.int64)
    if removals.shape != (config.num_times, config.num_pops):
        raise InvalidArgumentError(
            f"removals must have shape ({config.num_times}, {config.num_pops}), got {removals.shape}"
        )
    if np.any(removals < 0):
        raise InfeasibleEventsError("removal counts must be non-negative")
    if lag is None:
        lag = max(1, round(1.0 / (config.gamma * config.delta_t)))

    events = np.zeros((config.num_times, config.num_pops, 2), dtype=np.int64)
    events[:, :, IR] = removals
    while True:
        trajectory = _unchecked_trajectory(x0, events)
        start = trajectory[:-1]
        short_of_i = removals > start[:, :, I]
        over_s = events[:, :, SI] > start[:, :, S]
        if over_s.any():
            t, i = np.argwhere(over_s)[0]
            raise InfeasibleEventsError(
                f"not enough susceptibles in population {i} to explain removals by time {t}"
            )
        if not short_of_i.any():
            break
        t, i = (int(v) for v in np.argwhere(short_of_i)[0])
        shortage = int(removals[t, i] - start[t, i, I])
        block = _infection_block(config, start, t, i, lag)
        if block is None:
            raise InfeasibleEventsError(
                f"{removals[t, i]} removals at time {t}, population {i} cannot be explained by infections"
            )
        if start[block, i, S] < shortage:
            raise InfeasibleEventsError(
                f"not enough susceptibles in population {i} to explain removals at time {t}"
            )
        events[block, i, SI] += shortage

    logger.debug("Initialised %d latent infections", events[..., SI].sum())
    return events


def _unchecked_trajectory(x0: np.ndarray, events: np.ndarray) -> np.ndarray:
    si = events[:, :, SI]
    ir = events[:, :, IR]
    delta = np.stack([-si, si - ir, ir], axis=-1)
    return np.concatenate([x0[None], x0 + np.cumsum(delta, axis=0)], axis=0)


def _infection_block(config: MetaPopConfig, start: np.ndarray, t: int, pop: int, lag: int) -> int | None:
    candidates = list(range(max(0, t - lag), t)) + list(range(max(0, t - lag) - 1, -1, -1))
    for block in candidates:
        if _has_pressure(config, start[block, :, I], pop):
            return block
    return None
