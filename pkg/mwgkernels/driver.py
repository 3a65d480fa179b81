"""The sampling loop and post-hoc run summaries."""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Sequence
from dataclasses import dataclass, replace
from typing import Any

import numpy as np

from mwgkernels.compose import SamplingAlgorithm
from mwgkernels.diagnostics import effective_sample_size, quantiles
from mwgkernels.errors import (
    IndexRangeError,
    InvalidArgumentError,
    PreconditionError,
    UnsupportedInfoError,
)
from mwgkernels.prng import RngKey, fold_in
from mwgkernels.state import ChainAndKernelState, InfoTrace, Position, TraceBuffer
from mwgkernels.target import TargetLogDensity

logger = logging.getLogger(__name__)

_ACCEPT_LEAF = "is_accepted"


@dataclass(frozen=True)
class McmcRun:
    """Result of one :func:`mcmc` call.

    ``samples`` row ``i`` is the position after ``i + 1`` completed steps; the
    initial position is not stored.
    """

    samples: TraceBuffer
    infos: InfoTrace
    final_state: ChainAndKernelState
    seed: RngKey
    num_samples: int
    wall_time: float

    @property
    def meta(self) -> dict[str, Any]:
        return {
            "seed": repr(self.seed),
            "num_samples": self.num_samples,
            "wall_time": self.wall_time,
        }


def mcmc(
    num_samples: int,
    sampling_algorithm: SamplingAlgorithm,
    target_density_fn: TargetLogDensity,
    initial_position: Position,
    seed: RngKey,
) -> McmcRun:
    """Run ``sampling_algorithm`` for ``num_samples`` steps from ``initial_position``.

    Iteration ``i`` uses the key ``fold_in(seed, i)``. The run is a pure
    function of its arguments.
    """
    if num_samples < 1:
        raise InvalidArgumentError(f"num_samples must be positive, got {num_samples}")
    declared = dict(target_density_fn.structure)
    actual = {name: value.shape for name, value in initial_position.items()}
    if actual != declared:
        raise InvalidArgumentError(
            f"initial position {tuple(actual.items())} does not match target structure "
            f"{target_density_fn.structure}"
        )
    initial_log_density = target_density_fn(initial_position)
    if not math.isfinite(initial_log_density):
        raise PreconditionError(
            f"initial position {initial_position!r} has log-density {initial_log_density}"
        )

    logger.info("Starting MCMC run: %d samples, seed %r", num_samples, seed)
    started = time.perf_counter()

    state = sampling_algorithm.init_fn(target_density_fn, initial_position)
    expected = initial_position.structure()
    samples = TraceBuffer(initial_position, num_samples)
    infos: InfoTrace | None = None
    report_every = max(1, num_samples // 10)

    for i in range(num_samples):
        state, info = sampling_algorithm.step_fn(target_density_fn, state, fold_in(seed, i))
        position = state.chain.position
        if position.structure() != expected:
            raise InvalidArgumentError(
                f"step {i} changed the position structure to {position.structure()}"
            )
        samples.write(i, position)
        if infos is None:
            infos = InfoTrace(info, num_samples)
        infos.write(i, info)
        if (i + 1) % report_every == 0:
            logger.debug("Completed %d/%d steps", i + 1, num_samples)

    wall_time = time.perf_counter() - started
    assert infos is not None
    run = McmcRun(
        samples=samples,
        infos=infos,
        final_state=state,
        seed=seed,
        num_samples=num_samples,
        wall_time=wall_time,
    )
    try:
        rates = acceptance_rate(run)
    except UnsupportedInfoError:
        rates = {}
    logger.info("Finished MCMC run in %.2fs, acceptance %s", wall_time, rates)
    return run


def acceptance_rate(run: McmcRun) -> dict[str, float]:
    """Fraction of accepted proposals per kernel slot.

    Keys are the info path of each kernel (``""`` for a single kernel,
    ``"0"``/``"1"`` for a two-kernel sweep, ``"1.0"`` for a nested slot).
    """
    rates: dict[str, float] = {}
    for path in run.infos.paths:
        parts = path.split(".")
        if parts[-1] != _ACCEPT_LEAF:
            continue
        slot = ".".join(parts[:-1])
        flags = run.infos.leaf(path)
        rates[slot] = float(np.mean(flags))
    if not rates:
        raise UnsupportedInfoError("side information carries no is_accepted flags")
    return rates


@dataclass(frozen=True)
class ParameterSummary:
    mean: float
    sd: float
    q025: float
    q50: float
    q975: float
    ess: float

    def to_dict(self) -> dict[str, float]:
        return {
            "mean": self.mean,
            "sd": self.sd,
            "q025": self.q025,
            "q50": self.q50,
            "q975": self.q975,
            "ess": self.ess,
        }


def summarize_column(x: np.ndarray) -> ParameterSummary:
    x = np.asarray(x, dtype=float)
    q025, q50, q975 = quantiles(x, (0.025, 0.5, 0.975))
    return ParameterSummary(
        mean=float(np.mean(x)),
        sd=float(np.std(x, ddof=1)) if x.size > 1 else 0.0,
        q025=q025,
        q50=q50,
        q975=q975,
        ess=effective_sample_size(x),
    )


def summarize(run: McmcRun, burn_in: int = 0) -> dict[str, ParameterSummary]:
    """Per-column statistics over rows ``[burn_in, num_samples)``."""
    if not 0 <= burn_in < run.num_samples:
        raise IndexRangeError(f"burn_in {burn_in} outside [0, {run.num_samples})")
    return {
        label: summarize_column(column)
        for label, column in run.samples.flat_columns(burn_in).items()
    }


def summarize_chains(runs: Sequence[McmcRun], burn_in: int = 0) -> dict[str, ParameterSummary]:
    """Pool rows ``[burn_in, num_samples)`` of every chain; ESS is summed over chains."""
    if not runs:
        raise InvalidArgumentError("summarize_chains needs at least one run")
    per_chain = [summarize(run, burn_in) for run in runs]
    if len(runs) == 1:
        return per_chain[0]
    columns = [run.samples.flat_columns(burn_in) for run in runs]
    pooled: dict[str, ParameterSummary] = {}
    for label in columns[0]:
        stats = summarize_column(np.concatenate([cols[label] for cols in columns]))
        pooled[label] = replace(stats, ess=float(sum(chain[label].ess for chain in per_chain)))
    return pooled
