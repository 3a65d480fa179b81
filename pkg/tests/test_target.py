from __future__ import annotations

import math

import numpy as np
import pytest
import scipy.stats

from mwgkernels.errors import InvalidArgumentError, UnknownNameError
from mwgkernels.prng import key_from_seed
from mwgkernels.state import Position, merge
from mwgkernels.target import (
    GaussianModelSpec,
    condition,
    conjugate_posterior,
    gaussian_mean_target,
    make_target,
    simulate_gaussian_data,
)


def _gaussian_spec(n: int = 200) -> GaussianModelSpec:
    spec = GaussianModelSpec()
    data = simulate_gaussian_data(spec, [6.0, 4.0], n, key_from_seed(0))
    return spec.with_data(data)


def test_effective_covariance_is_symmetric_part():
    spec = GaussianModelSpec()
    np.testing.assert_allclose(spec.effective_cov, [[1.5, 0.5], [0.5, 0.8]])


def test_gaussian_target_matches_scipy():
    spec = _gaussian_spec()
    target = gaussian_mean_target(spec)
    mu = np.array([5.9, 4.2])
    expected = (
        scipy.stats.multivariate_normal(mu, spec.effective_cov).logpdf(spec.data).sum()
        + scipy.stats.norm(0.0, 10.0).logpdf(mu).sum()
    )
    assert target(Position({"mu_x": mu[0], "mu_y": mu[1]})) == pytest.approx(expected, rel=1e-10)


def test_condition_is_exact():
    spec = _gaussian_spec()
    target = gaussian_mean_target(spec)
    rng = np.random.default_rng(1)
    for mx, my in rng.normal([6.0, 4.0], 0.5, size=(1000, 2)):
        free = Position({"mu_x": mx})
        fixed = Position({"mu_y": my})
        assert condition(target, fixed)(free) == target(merge(free, fixed))


def test_condition_errors():
    target = gaussian_mean_target(_gaussian_spec())
    with pytest.raises(UnknownNameError):
        condition(target, Position({"sigma": 1.0}))
    with pytest.raises(InvalidArgumentError):
        condition(target, Position({"mu_x": [1.0, 2.0]}))
    with pytest.raises(InvalidArgumentError):
        condition(target, Position({"mu_x": 1.0, "mu_y": 2.0}))


def test_evaluate_checks_structure_and_maps_nan():
    target = make_target(lambda p: float("nan"), Position({"x": 0.0}))
    assert target(Position({"x": 1.0})) == -math.inf
    with pytest.raises(InvalidArgumentError):
        target(Position({"y": 1.0}))


def test_conjugate_posterior_without_data_is_prior():
    mean, cov = conjugate_posterior(GaussianModelSpec())
    np.testing.assert_array_equal(mean, [0.0, 0.0])
    np.testing.assert_array_equal(cov, 100.0 * np.eye(2))


def test_conjugate_posterior_matches_target_shape():
    spec = _gaussian_spec()
    target = gaussian_mean_target(spec)
    mean, cov = conjugate_posterior(spec)
    oracle = scipy.stats.multivariate_normal(mean, cov)
    rng = np.random.default_rng(2)
    points = rng.multivariate_normal(mean, cov, size=20)
    offsets = [target(Position({"mu_x": x, "mu_y": y})) - oracle.logpdf([x, y]) for x, y in points]
    assert np.ptp(offsets) < 1e-6


def test_non_positive_definite_covariance():
    spec = GaussianModelSpec(true_cov=[[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(InvalidArgumentError):
        gaussian_mean_target(spec)


def test_simulated_data_moments():
    spec = GaussianModelSpec()
    data = simulate_gaussian_data(spec, [6.0, 4.0], 20_000, key_from_seed(9))
    assert data.shape == (20_000, 2)
    np.testing.assert_allclose(data.mean(axis=0), [6.0, 4.0], atol=0.05)
    np.testing.assert_allclose(np.cov(data.T), spec.effective_cov, atol=0.05)


def _three_name_log_prob(p: Position) -> float:
    a, b, c = float(p["a"]), float(p["b"]), float(p["c"])
    return -a * a - 0.5 * a * b + 0.1 * b * c


def test_conditioning_twice_equals_conditioning_on_the_union():
    target = make_target(_three_name_log_prob, Position({"a": 0.0, "b": 0.0, "c": 0.0}))
    rng = np.random.default_rng(3)
    names = ("a", "b", "c")
    for _ in range(200):
        values = dict(zip(names, rng.normal(size=3)))
        first, second, free = (str(n) for n in rng.permutation(names))
        once = condition(target, Position({first: values[first]}))
        twice = condition(once, Position({second: values[second]}))
        union = condition(target, Position({first: values[first], second: values[second]}))
        point = Position({free: values[free]})
        assert twice(point) == union(point)
        assert twice.names == union.names == (free,)
