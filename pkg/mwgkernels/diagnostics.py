"""Trace diagnostics: effective sample size, quantiles, Geweke, split R-hat and KS."""

from __future__ import annotations

import math
from collections.abc import Sequence

import numpy as np
import scipy.fft
import scipy.stats

from mwgkernels.errors import InvalidArgumentError


def autocovariance(x: np.ndarray) -> np.ndarray:
    """Biased autocovariance at every lag, via FFT."""
    x = np.asarray(x, dtype=float)
    n = x.size
    centred = x - x.mean()
    size = scipy.fft.next_fast_len(2 * n)
    spectrum = scipy.fft.rfft(centred, n=size)
    acov = scipy.fft.irfft(spectrum * np.conjugate(spectrum), n=size)[:n]
    return acov / n


def effective_sample_size(x: np.ndarray) -> float:
    """ESS with Geyer's initial positive sequence and monotone refinement.

    A constant trace has ESS 1. The result is clipped to ``(0, n]``.
    """
    x = np.asarray(x, dtype=float).ravel()
    n = x.size
    if n == 0:
        raise InvalidArgumentError("effective_sample_size needs at least one sample")
    if n < 4:
        return float(n)
    acov = autocovariance(x)
    if acov[0] <= 0.0:
        return 1.0
    rho = acov / acov[0]

    # pair sums Gamma_k = rho(2k) + rho(2k+1), truncated at the first non-positive one
    num_pairs = n // 2
    gamma = rho[0 : 2 * num_pairs : 2] + rho[1 : 2 * num_pairs : 2]
    positive = gamma > 0.0
    stop = int(np.argmin(positive)) if not positive.all() else num_pairs
    gamma = np.minimum.accumulate(gamma[:stop])
    if gamma.size == 0:
        return float(n)
    tau = -1.0 + 2.0 * float(np.sum(gamma))
    if tau <= 0.0:
        return float(n)
    return float(min(n, n / tau))


def quantiles(x: np.ndarray, probs: Sequence[float] = (0.025, 0.5, 0.975)) -> tuple[float, ...]:
    values = np.quantile(np.asarray(x, dtype=float), probs)
    return tuple(float(v) for v in values)


def geweke_z(x: np.ndarray, first: float = 0.1, last: float = 0.5) -> float:
    """Z-score comparing the means of the first and last segments of a trace.

    Segment variances are scaled by their effective sample size.
    """
    if not (0 < first < 1 and 0 < last < 1 and first + last <= 1):
        raise InvalidArgumentError(f"invalid Geweke fractions first={first}, last={last}")
    x = np.asarray(x, dtype=float).ravel()
    n = x.size
    a = x[: int(first * n)]
    b = x[n - int(last * n) :]
    if a.size < 2 or b.size < 2:
        raise InvalidArgumentError(f"trace of length {n} too short for a Geweke check")
    var_a = float(np.var(a, ddof=1)) / effective_sample_size(a)
    var_b = float(np.var(b, ddof=1)) / effective_sample_size(b)
    if var_a + var_b == 0.0:
        return 0.0 if a.mean() == b.mean() else math.inf
    return float((a.mean() - b.mean()) / math.sqrt(var_a + var_b))


def geweke_pvalue(x: np.ndarray, first: float = 0.1, last: float = 0.5) -> float:
    z = geweke_z(x, first, last)
    return float(2.0 * scipy.stats.norm.sf(abs(z)))


def split_rhat(chains: Sequence[np.ndarray]) -> float:
    """Gelman-Rubin potential scale reduction on chains split in half."""
    if len(chains) < 2:
        raise InvalidArgumentError("split_rhat needs at least two chains")
    length = min(len(c) for c in chains) // 2
    if length < 2:
        raise InvalidArgumentError("chains too short for split R-hat")
    halves = []
    for chain in chains:
        chain = np.asarray(chain, dtype=float).ravel()
        halves.append(chain[:length])
        halves.append(chain[length : 2 * length])
    stacked = np.vstack(halves)
    means = stacked.mean(axis=1)
    within = float(np.mean(stacked.var(axis=1, ddof=1)))
    between = length * float(np.var(means, ddof=1))
    if within == 0.0:
        return 1.0 if between == 0.0 else math.inf
    var_plus = (length - 1) / length * within + between / length
    return float(math.sqrt(var_plus / within))


def ks_against_normal(samples: np.ndarray, mean: float, sd: float) -> tuple[float, float]:
    """Two-sided Kolmogorov-Smirnov test of ``samples`` against ``N(mean, sd^2)``."""
    result = scipy.stats.kstest(np.asarray(samples, dtype=float), "norm", args=(mean, sd))
    return float(result.statistic), float(result.pvalue)
