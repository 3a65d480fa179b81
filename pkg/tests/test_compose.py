from __future__ import annotations

import math

import numpy as np
import pytest

from mwgkernels.compose import log_transform, multi_scan, mwg_step
from mwgkernels.driver import mcmc
from mwgkernels.errors import InvalidArgumentError, UnknownNameError
from mwgkernels.kernels import adaptive_rwmh, metropolis, rwmh
from mwgkernels.prng import fold_in, key_from_seed, split
from mwgkernels.state import ChainAndKernelState, Position
from mwgkernels.target import (
    GaussianModelSpec,
    gaussian_mean_target,
    make_target,
    simulate_gaussian_data,
)

START = Position({"mu_x": 6.0, "mu_y": 4.0})


def _target():
    spec = GaussianModelSpec()
    spec = spec.with_data(simulate_gaussian_data(spec, [6.0, 4.0], 100, key_from_seed(0)))
    return gaussian_mean_target(spec)


def _two_stage():
    return mwg_step(rwmh(0.2), ["mu_x"]) >> mwg_step(adaptive_rwmh(0.2), ["mu_y"])


def _assert_same_state(a: ChainAndKernelState, b: ChainAndKernelState) -> None:
    assert a.chain.position == b.chain.position
    assert a.chain.log_density == b.chain.log_density


def test_sequence_is_associative():
    a = mwg_step(rwmh(0.1), ["mu_x"])
    b = mwg_step(rwmh(0.1), ["mu_y"])
    c = metropolis(0.05)
    target = _target()
    seed = key_from_seed(4)
    left = mcmc(100, (a >> b) >> c, target, START, seed)
    right = mcmc(100, a >> (b >> c), target, START, seed)
    for name in ("mu_x", "mu_y"):
        np.testing.assert_array_equal(left.samples.column(name), right.samples.column(name))
    assert left.infos.paths == right.infos.paths
    for path in left.infos.paths:
        np.testing.assert_array_equal(left.infos.leaf(path), right.infos.leaf(path))


def test_sequence_flattens_components():
    a, b, c = rwmh(0.1), rwmh(0.2), rwmh(0.3)
    assert len(((a >> b) >> c).components) == 3
    assert len((a >> (b >> c)).components) == 3
    assert len(a.then(b).components) == 2


def test_sequence_info_is_ordered_tuple():
    target = _target()
    algorithm = _two_stage()
    state = algorithm.init_fn(target, START)
    assert isinstance(state.kernel, tuple) and len(state.kernel) == 2
    _, info = algorithm.step_fn(target, state, key_from_seed(1))
    assert isinstance(info, tuple) and len(info) == 2
    assert info[0].proposed_state.names == ("mu_x",)
    assert info[1].proposed_state.names == ("mu_y",)


def test_mwg_step_only_touches_its_block():
    target = _target()
    algorithm = _two_stage()
    first, second = algorithm.components
    state = algorithm.init_fn(target, START)
    chain, (k1, k2) = state
    key = key_from_seed(2)
    for i in range(1000):
        key_x, key_y = split(fold_in(key, i), 2)
        (chain_x, k1), _ = first.step_fn(target, ChainAndKernelState(chain, k1), key_x)
        assert chain_x.position["mu_y"].tobytes() == chain.position["mu_y"].tobytes()
        (chain_y, k2), _ = second.step_fn(target, ChainAndKernelState(chain_x, k2), key_y)
        assert chain_y.position["mu_x"].tobytes() == chain_x.position["mu_x"].tobytes()
        chain = chain_y


def test_mwg_step_keeps_global_order_and_log_density():
    target = _target()
    algorithm = _two_stage()
    state = algorithm.init_fn(target, START)
    key = key_from_seed(3)
    for i in range(50):
        state, _ = algorithm.step_fn(target, state, fold_in(key, i))
        assert state.chain.position.names == ("mu_x", "mu_y")
        assert state.chain.log_density == target(state.chain.position)


def test_mwg_step_validates_names():
    with pytest.raises(InvalidArgumentError):
        mwg_step(rwmh(1.0), [])
    with pytest.raises(InvalidArgumentError):
        mwg_step(rwmh(1.0), ["mu_x", "mu_x"])
    with pytest.raises(UnknownNameError):
        mwg_step(rwmh(1.0), ["sigma"]).init_fn(_target(), START)


def test_multi_scan_of_one_is_the_kernel():
    target = _target()
    kernel = _two_stage()
    state = kernel.init_fn(target, START)
    key = key_from_seed(5)
    scanned, scanned_info = multi_scan(1, kernel).step_fn(target, state, key)
    direct, direct_info = kernel.step_fn(target, state, split(key, 1)[0])
    _assert_same_state(scanned, direct)
    assert bool(scanned_info[0].is_accepted) == bool(direct_info[0].is_accepted)


def test_multi_scan_reports_last_info():
    target = _target()
    kernel = mwg_step(rwmh(0.05), ["mu_x"])
    state = kernel.init_fn(target, START)
    key = key_from_seed(6)
    scanned, scanned_info = multi_scan(3, kernel).step_fn(target, state, key)
    manual = state
    for sub_key in split(key, 3):
        manual, manual_info = kernel.step_fn(target, manual, sub_key)
    _assert_same_state(scanned, manual)
    assert scanned_info.proposed_state == manual_info.proposed_state
    with pytest.raises(InvalidArgumentError):
        multi_scan(0, kernel)


def test_log_transform_samples_positive_target():
    exponential = make_target(
        lambda p: -float(p["rate"]) if float(p["rate"]) > 0 else -math.inf, Position({"rate": 1.0})
    )
    run = mcmc(20_000, log_transform(rwmh(1.0)), exponential, Position({"rate": 1.0}), key_from_seed(7))
    draws = run.samples.column("rate")
    assert draws.min() > 0
    assert draws[2000:].mean() == pytest.approx(1.0, abs=0.1)


def test_log_transform_rejects_non_positive_start():
    target = make_target(lambda p: 0.0, Position({"rate": 1.0}))
    with pytest.raises(InvalidArgumentError):
        log_transform(rwmh(1.0)).init_fn(target, Position({"rate": 0.0}))


def test_log_transform_keeps_natural_scale_log_density():
    target = make_target(
        lambda p: -float(p["rate"]) if float(p["rate"]) > 0 else -math.inf, Position({"rate": 1.0})
    )
    algorithm = log_transform(rwmh(0.5))
    state = algorithm.init_fn(target, Position({"rate": 2.0}))
    key = key_from_seed(8)
    for i in range(20):
        state, _ = algorithm.step_fn(target, state, fold_in(key, i))
        assert state.chain.log_density == target(state.chain.position)


def test_mwg_step_over_every_name_matches_the_bare_kernel():
    target = _target()
    kernel = rwmh(0.05)
    seed = key_from_seed(10)
    bare = mcmc(100, kernel, target, START, seed)
    lifted = mcmc(100, mwg_step(kernel, ["mu_x", "mu_y"]), target, START, seed)
    np.testing.assert_array_equal(bare.infos.leaf("is_accepted"), lifted.infos.leaf("is_accepted"))
    for name in ("mu_x", "mu_y"):
        np.testing.assert_array_equal(bare.samples.column(name), lifted.samples.column(name))


def test_log_transform_reports_natural_scale_proposals():
    target = make_target(
        lambda p: -float(p["rate"]) if float(p["rate"]) > 0 else -math.inf, Position({"rate": 1.0})
    )
    algorithm = log_transform(rwmh(0.5))
    state = algorithm.init_fn(target, Position({"rate": 2.0}))
    key = key_from_seed(11)
    accepted = 0
    for i in range(200):
        previous = state.chain.position
        state, info = algorithm.step_fn(target, state, fold_in(key, i))
        assert float(info.proposed_state["rate"]) > 0
        if info.is_accepted:
            accepted += 1
            assert state.chain.position == info.proposed_state
        else:
            assert state.chain.position == previous
    assert 0 < accepted < 200
