"""Built-in parameter kernels: uniform Metropolis, random-walk MH and adaptive random-walk MH.

Each constructor closes over its hyperparameters and returns a
:class:`~mwgkernels.compose.SamplingAlgorithm`. The kernels act on every
entry of the position they are handed; wrap them with
:func:`~mwgkernels.compose.mwg_step` to update a subset.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
import scipy.linalg

from mwgkernels.compose import SamplingAlgorithm
from mwgkernels.errors import InvalidArgumentError
from mwgkernels.prng import Bernoulli, RngKey, StandardNormal, Uniform, sample_primitive, split
from mwgkernels.state import ChainAndKernelState, ChainState, Position
from mwgkernels.target import TargetLogDensity

ADAPTIVE_WARMUP_STEPS = 100
ADAPTIVE_JITTER = 1e-6
ADAPTIVE_SCALING = 2.38**2


class KernelInfo(NamedTuple):
    is_accepted: np.bool_
    log_acceptance: np.float64
    proposed_state: Position


class MetropolisKernelState(NamedTuple):
    tau: Position  # jump size for the interval centred at the current state


class RwmhKernelState(NamedTuple):
    scale: np.float64


class AdaptiveRwmhKernelState(NamedTuple):
    step_count: np.int64
    running_mean: np.ndarray
    running_cov: np.ndarray
    base_scale: np.float64


def _require_real(position: Position) -> None:
    for name, value in position.items():
        if value.dtype.kind != "f":
            raise InvalidArgumentError(f"'{name}' is not real-valued; random-walk kernels need real entries")


def log_acceptance_ratio(proposed: float, current: float, log_correction: float = 0.0) -> float:
    """``log pi(x*) - log pi(x) + log q(x|x*) - log q(x*|x)``, with ``-inf`` proposals never accepted."""
    if proposed == -math.inf:
        return -math.inf
    value = proposed - current + log_correction
    return -math.inf if math.isnan(value) else value


def metropolis_hastings_step(
    target: TargetLogDensity,
    chain: ChainState,
    proposed: Position,
    log_correction: float,
    key: RngKey,
) -> tuple[ChainState, KernelInfo]:
    """Accept ``proposed`` with probability ``min(1, exp(log_acceptance))``."""
    proposed_log_density = target(proposed)
    log_acceptance = log_acceptance_ratio(proposed_log_density, chain.log_density, log_correction)
    p_accept = math.exp(min(0.0, log_acceptance))
    is_accepted = bool(sample_primitive(key, Bernoulli(p_accept)))
    if is_accepted:
        new_chain = ChainState(proposed, proposed_log_density, ())
    else:
        new_chain = chain
    info = KernelInfo(
        is_accepted=np.bool_(is_accepted),
        log_acceptance=np.float64(log_acceptance),
        proposed_state=proposed,
    )
    return new_chain, info


def _init_chain(target: TargetLogDensity, position: Position) -> ChainState:
    _require_real(position)
    return ChainState(position, target(position), ())


def metropolis(tau: float = 1.0) -> SamplingAlgorithm:
    """Metropolis kernel with a symmetric uniform proposal on ``[x - tau, x + tau]``.

    Args:
        tau: jump size for the interval centred at the current chain state.
    """
    if not tau > 0:
        raise InvalidArgumentError(f"tau must be positive, got {tau}")

    def init_fn(target: TargetLogDensity, position: Position) -> ChainAndKernelState:
        chain = _init_chain(target, position)
        tau_like = Position((name, np.full(value.shape, float(tau))) for name, value in position.items())
        return ChainAndKernelState(chain, MetropolisKernelState(tau=tau_like))

    def step_fn(
        target: TargetLogDensity, state: ChainAndKernelState, seed: RngKey
    ) -> tuple[ChainAndKernelState, KernelInfo]:
        proposal_key, acceptance_key = split(seed, 2)
        chain, kernel_state = state
        x = chain.position.ravel()
        u = sample_primitive(proposal_key, Uniform(-1.0, 1.0, x.shape))
        proposed = chain.position.unravel(x + kernel_state.tau.ravel() * u)
        new_chain, info = metropolis_hastings_step(target, chain, proposed, 0.0, acceptance_key)
        return ChainAndKernelState(new_chain, kernel_state), info

    return SamplingAlgorithm(init_fn, step_fn)


def rwmh(scale: float = 1.0) -> SamplingAlgorithm:
    """Random-walk Metropolis-Hastings with proposal ``x + scale * z``, ``z ~ N(0, I)``."""
    if not scale > 0:
        raise InvalidArgumentError(f"scale must be positive, got {scale}")

    def init_fn(target: TargetLogDensity, position: Position) -> ChainAndKernelState:
        return ChainAndKernelState(_init_chain(target, position), RwmhKernelState(np.float64(scale)))

    def step_fn(
        target: TargetLogDensity, state: ChainAndKernelState, seed: RngKey
    ) -> tuple[ChainAndKernelState, KernelInfo]:
        proposal_key, acceptance_key = split(seed, 2)
        chain, kernel_state = state
        x = chain.position.ravel()
        z = sample_primitive(proposal_key, StandardNormal(x.shape))
        proposed = chain.position.unravel(x + kernel_state.scale * z)
        new_chain, info = metropolis_hastings_step(target, chain, proposed, 0.0, acceptance_key)
        return ChainAndKernelState(new_chain, kernel_state), info

    return SamplingAlgorithm(init_fn, step_fn)


def update_running_moments(
    step_count: int, mean: np.ndarray, cov: np.ndarray, x: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """One-pass update of the (biased) running mean and covariance with a new point ``x``."""
    n = step_count
    delta = x - mean
    new_mean = mean + delta / (n + 1)
    new_cov = cov + (np.outer(delta, x - new_mean) - cov) / (n + 1)
    return new_mean, 0.5 * (new_cov + new_cov.T)


def adaptive_rwmh(
    initial_scale: float = 1.0,
    warmup: int = ADAPTIVE_WARMUP_STEPS,
    jitter: float = ADAPTIVE_JITTER,
) -> SamplingAlgorithm:
    """Adaptive random-walk Metropolis-Hastings (running-covariance proposal).

    For the first ``warmup`` steps proposals are ``N(x, initial_scale^2 I)``;
    afterwards ``N(x, 2.38^2 / d * (C + jitter I))`` where ``C`` is the
    running covariance of the realised chain. The running moments are
    updated with the post-acceptance position at every step.
    """
    if not initial_scale > 0:
        raise InvalidArgumentError(f"initial_scale must be positive, got {initial_scale}")
    if warmup < 0:
        raise InvalidArgumentError(f"warmup must be non-negative, got {warmup}")

    def init_fn(target: TargetLogDensity, position: Position) -> ChainAndKernelState:
        chain = _init_chain(target, position)
        d = position.size
        kernel_state = AdaptiveRwmhKernelState(
            step_count=np.int64(0),
            running_mean=np.zeros(d),
            running_cov=np.zeros((d, d)),
            base_scale=np.float64(initial_scale),
        )
        return ChainAndKernelState(chain, kernel_state)

    def step_fn(
        target: TargetLogDensity, state: ChainAndKernelState, seed: RngKey
    ) -> tuple[ChainAndKernelState, KernelInfo]:
        proposal_key, acceptance_key = split(seed, 2)
        chain, kernel_state = state
        x = chain.position.ravel()
        d = x.size
        z = sample_primitive(proposal_key, StandardNormal((d,)))
        if kernel_state.step_count < warmup:
            increment = kernel_state.base_scale * z
        else:
            proposal_cov = (ADAPTIVE_SCALING / d) * (kernel_state.running_cov + jitter * np.eye(d))
            increment = scipy.linalg.cholesky(proposal_cov, lower=True) @ z
        proposed = chain.position.unravel(x + increment)
        new_chain, info = metropolis_hastings_step(target, chain, proposed, 0.0, acceptance_key)

        running_mean, running_cov = update_running_moments(
            int(kernel_state.step_count),
            kernel_state.running_mean,
            kernel_state.running_cov,
            new_chain.position.ravel(),
        )
        new_kernel_state = AdaptiveRwmhKernelState(
            step_count=np.int64(kernel_state.step_count + 1),
            running_mean=running_mean,
            running_cov=running_cov,
            base_scale=kernel_state.base_scale,
        )
        return ChainAndKernelState(new_chain, new_kernel_state), info

    return SamplingAlgorithm(init_fn, step_fn)
