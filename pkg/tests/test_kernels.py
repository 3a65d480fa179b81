from __future__ import annotations

import math

import numpy as np
import pytest

from mwgkernels.errors import InvalidArgumentError
from mwgkernels.kernels import (
    KernelInfo,
    adaptive_rwmh,
    log_acceptance_ratio,
    metropolis,
    rwmh,
)
from mwgkernels.prng import StandardNormal, fold_in, key_from_seed, sample_primitive
from mwgkernels.state import Position
from mwgkernels.target import make_target


def _normal_target(sd: float = 1.0):
    return make_target(lambda p: -0.5 * float(np.sum(p.ravel() ** 2)) / sd**2, Position({"x": 0.0}))


def _flat_target():
    return make_target(lambda p: 0.0, Position({"x": 0.0}))


def _point_target():
    # finite only at the origin, so every proposal is rejected
    return make_target(lambda p: 0.0 if float(p["x"]) == 0.0 else -math.inf, Position({"x": 0.0}))


def _walk(algorithm, target, start: Position, steps: int, seed: int = 0):
    state = algorithm.init_fn(target, start)
    key = key_from_seed(seed)
    infos = []
    for i in range(steps):
        state, info = algorithm.step_fn(target, state, fold_in(key, i))
        infos.append(info)
    return state, infos


def test_log_acceptance_ratio_handles_minus_infinity():
    assert log_acceptance_ratio(-math.inf, -math.inf) == -math.inf
    assert log_acceptance_ratio(-1.0, -2.0, 0.5) == pytest.approx(1.5)


@pytest.mark.parametrize("algorithm", [metropolis(0.5), rwmh(0.5), adaptive_rwmh(0.5)])
def test_flat_target_always_accepts(algorithm):
    _, infos = _walk(algorithm, _flat_target(), Position({"x": 0.0}), 50)
    assert all(bool(info.is_accepted) for info in infos)


@pytest.mark.parametrize("algorithm", [metropolis(0.5), rwmh(0.5), adaptive_rwmh(0.5)])
def test_impossible_proposals_always_reject(algorithm):
    state, infos = _walk(algorithm, _point_target(), Position({"x": 0.0}), 50)
    assert not any(bool(info.is_accepted) for info in infos)
    assert state.chain.position == Position({"x": 0.0})
    assert all(info.log_acceptance == -math.inf for info in infos)


def test_info_fields():
    _, infos = _walk(rwmh(1.0), _normal_target(), Position({"x": 0.0}), 1)
    info = infos[0]
    assert isinstance(info, KernelInfo)
    assert isinstance(info.is_accepted, np.bool_)
    assert info.proposed_state.names == ("x",)


def test_metropolis_proposals_stay_in_window():
    tau = 0.25
    algorithm = metropolis(tau)
    target = _flat_target()
    state = algorithm.init_fn(target, Position({"x": 0.0}))
    np.testing.assert_array_equal(state.kernel.tau["x"], 0.25)
    key = key_from_seed(3)
    for i in range(200):
        before = float(state.chain.position["x"])
        state, info = algorithm.step_fn(target, state, fold_in(key, i))
        assert abs(float(info.proposed_state["x"]) - before) <= tau + 1e-12


@pytest.mark.parametrize(
    "make",
    [
        lambda: metropolis(0.0),
        lambda: rwmh(-1.0),
        lambda: adaptive_rwmh(0.0),
        lambda: adaptive_rwmh(1.0, warmup=-1),
    ],
)
def test_invalid_hyperparameters(make):
    with pytest.raises(InvalidArgumentError):
        make()


def test_random_walks_need_real_entries():
    target = make_target(lambda p: 0.0, Position({"k": 0}))
    with pytest.raises(InvalidArgumentError):
        rwmh(1.0).init_fn(target, Position({"k": 0}))


def test_rwmh_acceptance_matches_gaussian_formula():
    sd, scale = 1.0, 1.0
    _, infos = _walk(rwmh(scale), _normal_target(sd), Position({"x": 0.0}), 20_000, seed=5)
    rate = np.mean([bool(info.is_accepted) for info in infos])
    assert rate == pytest.approx(2.0 / math.pi * math.atan(2.0 * sd / scale), abs=0.02)


def test_adaptive_running_moments_match_batch():
    target = make_target(
        lambda p: -0.5 * float(p["v"] @ p["v"]), Position({"v": [0.0, 0.0]})
    )
    algorithm = adaptive_rwmh(0.5)
    state = algorithm.init_fn(target, Position({"v": [0.0, 0.0]}))
    key = key_from_seed(8)
    visited = []
    for i in range(1000):
        state, _ = algorithm.step_fn(target, state, fold_in(key, i))
        visited.append(state.chain.position.ravel())
    visited = np.array(visited)
    kernel = state.kernel
    assert int(kernel.step_count) == 1000
    np.testing.assert_allclose(kernel.running_mean, visited.mean(axis=0), rtol=0, atol=1e-10)
    batch = np.cov(visited.T, bias=True)
    assert np.linalg.norm(kernel.running_cov - batch) < 1e-10


@pytest.mark.parametrize(
    "make", [lambda: metropolis(1.0), lambda: rwmh(1.0), lambda: adaptive_rwmh(1.0)]
)
def test_one_step_preserves_stationary_moments(make):
    algorithm = make()
    target = _normal_target()
    key = key_from_seed(21)
    draws = sample_primitive(key, StandardNormal((5000,)))
    before = np.empty(5000)
    after = np.empty(5000)
    for c, x in enumerate(draws):
        state = algorithm.init_fn(target, Position({"x": float(x)}))
        state, _ = algorithm.step_fn(target, state, fold_in(key, c + 1))
        before[c] = x
        after[c] = float(state.chain.position["x"])
    for moment in (after - before, after**2 - before**2):
        se = moment.std(ddof=1) / math.sqrt(moment.size)
        assert abs(moment.mean()) < 4 * se
