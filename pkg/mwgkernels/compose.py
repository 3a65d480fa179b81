"""Composition of sampling algorithms.

A :class:`SamplingAlgorithm` is a pair of pure functions::

    init_fn(target, position)          -> ChainAndKernelState
    step_fn(target, state, seed)       -> (ChainAndKernelState, info)

``a >> b`` runs ``a`` then ``b`` on the chain state ``a`` produced, keeps each
child's kernel state in its own slot and concatenates the side information
in order. Composites are flattened, so ``(a >> b) >> c`` and ``a >> (b >> c)``
are the same three-slot sweep and consume the same keys.

:func:`mwg_step` lifts a kernel written for a local sub-position into the
global space: each step projects the named entries out, builds the
conditional target from the current values of everything else, runs the
child and merges the update back.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np

from mwgkernels.errors import InvalidArgumentError
from mwgkernels.prng import RngKey, split
from mwgkernels.state import (
    ChainAndKernelState,
    ChainState,
    Position,
    merge,
    project,
)
from mwgkernels.target import TargetLogDensity, condition

logger = logging.getLogger(__name__)

InitFn = Callable[[TargetLogDensity, Position], ChainAndKernelState]
StepFn = Callable[[TargetLogDensity, ChainAndKernelState, RngKey], tuple[ChainAndKernelState, Any]]


@dataclass(frozen=True, eq=False)
class SamplingAlgorithm:
    """One MCMC kernel as an ``(init_fn, step_fn)`` pair.

    ``parts`` is non-empty only for sequential composites built by
    :func:`then`; it lists the flattened components in sweep order.
    """

    init_fn: InitFn
    step_fn: StepFn
    parts: tuple[SamplingAlgorithm, ...] = ()

    @property
    def components(self) -> tuple[SamplingAlgorithm, ...]:
        return self.parts or (self,)

    def then(self, other: SamplingAlgorithm) -> SamplingAlgorithm:
        return then(self, other)

    def __rshift__(self, other: SamplingAlgorithm) -> SamplingAlgorithm:
        if not isinstance(other, SamplingAlgorithm):
            return NotImplemented
        return then(self, other)


def then(first: SamplingAlgorithm, second: SamplingAlgorithm) -> SamplingAlgorithm:
    """Sequential composition ``first >> second``."""
    return _sequence(first.components + second.components)


def _sequence(components: tuple[SamplingAlgorithm, ...]) -> SamplingAlgorithm:
    def init_fn(target: TargetLogDensity, position: Position) -> ChainAndKernelState:
        expected = position.structure()
        kernel_states = []
        chain = None
        for index, component in enumerate(components):
            child = component.init_fn(target, position)
            if child.chain.position.structure() != expected:
                raise InvalidArgumentError(
                    f"component {index} initialised a position with structure "
                    f"{child.chain.position.structure()}, expected {expected}"
                )
            kernel_states.append(child.kernel)
            chain = child.chain
        return ChainAndKernelState(chain, tuple(kernel_states))

    def step_fn(
        target: TargetLogDensity, state: ChainAndKernelState, seed: RngKey
    ) -> tuple[ChainAndKernelState, tuple]:
        keys = split(seed, len(components))
        chain = state.chain
        kernel_states = []
        infos = []
        for component, kernel_state, key in zip(components, state.kernel, keys):
            (chain, kernel_state), info = component.step_fn(
                target, ChainAndKernelState(chain, kernel_state), key
            )
            kernel_states.append(kernel_state)
            infos.append(info)
        return ChainAndKernelState(chain, tuple(kernel_states)), tuple(infos)

    return SamplingAlgorithm(init_fn, step_fn, parts=components)


def mwg_step(sampling_algorithm: SamplingAlgorithm, target_names: Sequence[str]) -> SamplingAlgorithm:
    """Lift ``sampling_algorithm`` to act on ``target_names`` of the global position."""
    names = tuple(target_names)
    if not names:
        raise InvalidArgumentError("mwg_step needs at least one target name")
    if len(set(names)) != len(names):
        raise InvalidArgumentError(f"duplicate target names: {names}")

    def init_fn(target: TargetLogDensity, position: Position) -> ChainAndKernelState:
        local, rest = project(position, names)
        local_state = sampling_algorithm.init_fn(condition(target, rest) if rest else target, local)
        chain = ChainState(position, local_state.chain.log_density, ())
        return ChainAndKernelState(chain, local_state.kernel)

    def step_fn(
        target: TargetLogDensity, state: ChainAndKernelState, seed: RngKey
    ) -> tuple[ChainAndKernelState, Any]:
        chain, kernel_state = state
        local, rest = project(chain.position, names)
        conditional = condition(target, rest) if rest else target
        # the other blocks may have moved since this kernel last ran
        local_chain = ChainState(local, conditional(local), ())
        (new_local, new_kernel_state), info = sampling_algorithm.step_fn(
            conditional, ChainAndKernelState(local_chain, kernel_state), seed
        )
        position = merge(new_local.position, rest).reorder(chain.position.names)
        return ChainAndKernelState(ChainState(position, new_local.log_density, ()), new_kernel_state), info

    return SamplingAlgorithm(init_fn, step_fn)


def multi_scan(n: int, sampling_algorithm: SamplingAlgorithm) -> SamplingAlgorithm:
    """Apply ``sampling_algorithm`` ``n`` times per step; report the last inner info."""
    if n < 1:
        raise InvalidArgumentError(f"multi_scan needs n >= 1, got {n}")

    def step_fn(
        target: TargetLogDensity, state: ChainAndKernelState, seed: RngKey
    ) -> tuple[ChainAndKernelState, Any]:
        info = None
        for key in split(seed, n):
            state, info = sampling_algorithm.step_fn(target, state, key)
        return state, info

    return SamplingAlgorithm(sampling_algorithm.init_fn, step_fn)


# ---------------------------------------------------------------------------
# Change of variables
# ---------------------------------------------------------------------------

def _log_position(position: Position) -> Position:
    return Position((name, np.log(value)) for name, value in position.items())


def _exp_position(position: Position) -> Position:
    return Position((name, np.exp(value)) for name, value in position.items())


def _log_scale_target(target: TargetLogDensity) -> TargetLogDensity:
    parent_fn = target.fn

    def fn(log_position: Position) -> float:
        jacobian = float(np.sum(log_position.ravel()))
        return parent_fn(_exp_position(log_position)) + jacobian

    return TargetLogDensity(fn, target.structure)


def log_transform(sampling_algorithm: SamplingAlgorithm) -> SamplingAlgorithm:
    """Run ``sampling_algorithm`` on the logarithm of a strictly positive local position.

    The chain keeps natural-scale values; the child sees the log-scale
    target with the log-Jacobian added.
    """

    def init_fn(target: TargetLogDensity, position: Position) -> ChainAndKernelState:
        if position.size and not np.all(position.ravel() > 0):
            raise InvalidArgumentError(f"log_transform needs a positive position, got {position!r}")
        inner = sampling_algorithm.init_fn(_log_scale_target(target), _log_position(position))
        return ChainAndKernelState(ChainState(position, target(position), ()), inner.kernel)

    def step_fn(
        target: TargetLogDensity, state: ChainAndKernelState, seed: RngKey
    ) -> tuple[ChainAndKernelState, Any]:
        chain, kernel_state = state
        log_target = _log_scale_target(target)
        log_position = _log_position(chain.position)
        inner_chain = ChainState(log_position, log_target(log_position), ())
        (new_inner, new_kernel_state), info = sampling_algorithm.step_fn(
            log_target, ChainAndKernelState(inner_chain, kernel_state), seed
        )
        if new_inner.position == log_position:
            new_chain = chain
        else:
            position = _exp_position(new_inner.position)
            new_chain = ChainState(position, target(position), ())
        if "proposed_state" in getattr(info, "_fields", ()):
            info = info._replace(proposed_state=_exp_position(info.proposed_state))
        return ChainAndKernelState(new_chain, new_kernel_state), info

    return SamplingAlgorithm(init_fn, step_fn)
