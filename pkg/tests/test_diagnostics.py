from __future__ import annotations

import numpy as np
import pytest

from mwgkernels.diagnostics import (
    effective_sample_size,
    geweke_pvalue,
    geweke_z,
    ks_against_normal,
    quantiles,
    split_rhat,
)
from mwgkernels.errors import InvalidArgumentError


def _ar1(phi: float, n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    noise = rng.normal(size=n)
    x = np.empty(n)
    x[0] = noise[0] / np.sqrt(1 - phi**2)
    for t in range(1, n):
        x[t] = phi * x[t - 1] + noise[t]
    return x


def test_ess_of_iid_draws_is_close_to_n():
    x = np.random.default_rng(0).normal(size=10_000)
    assert effective_sample_size(x) == pytest.approx(10_000, rel=0.15)


def test_ess_of_autocorrelated_chain():
    phi, n = 0.9, 50_000
    expected = n * (1 - phi) / (1 + phi)
    assert effective_sample_size(_ar1(phi, n, 1)) == pytest.approx(expected, rel=0.25)


def test_ess_edge_cases():
    assert effective_sample_size(np.full(100, 3.0)) == 1.0
    assert effective_sample_size(np.array([1.0, 2.0])) == 2.0
    with pytest.raises(InvalidArgumentError):
        effective_sample_size(np.array([]))


def test_quantiles():
    assert quantiles(np.arange(101), (0.1, 0.5)) == (10.0, 50.0)


def test_geweke_on_stationary_and_drifting_traces():
    rng = np.random.default_rng(2)
    stationary = rng.normal(size=5000)
    assert geweke_pvalue(stationary) > 0.001
    drifting = stationary.copy()
    drifting[:500] += 3.0
    assert abs(geweke_z(drifting)) > 5.0
    with pytest.raises(InvalidArgumentError):
        geweke_z(stationary, first=0.6, last=0.5)


def test_split_rhat():
    rng = np.random.default_rng(3)
    chains = [rng.normal(size=2000) for _ in range(4)]
    assert split_rhat(chains) == pytest.approx(1.0, abs=0.01)
    shifted = chains[:3] + [chains[3] + 2.0]
    assert split_rhat(shifted) > 1.1
    with pytest.raises(InvalidArgumentError):
        split_rhat(chains[:1])


def test_ks_against_normal():
    rng = np.random.default_rng(4)
    stat, _ = ks_against_normal(rng.normal(1.0, 2.0, size=2000), 1.0, 2.0)
    assert stat < 0.05
    _, pvalue = ks_against_normal(rng.normal(1.5, 2.0, size=2000), 1.0, 2.0)
    assert pvalue < 1e-6
