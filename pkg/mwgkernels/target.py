"""Target log-densities, on-the-fly conditionals and the 2-D Gaussian mean model."""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np
import scipy.linalg

from mwgkernels.errors import InvalidArgumentError, UnknownNameError
from mwgkernels.prng import RngKey, StandardNormal, sample_primitive
from mwgkernels.state import Position, merge

logger = logging.getLogger(__name__)

_LOG_2PI = math.log(2.0 * math.pi)

Structure = tuple[tuple[str, tuple[int, ...]], ...]


@dataclass(frozen=True)
class TargetLogDensity:
    """Unnormalised log-density over a declared set of named, fixed-shape entries.

    ``fn`` must read entries by name and return ``-inf`` (never raise) outside
    the support.
    """

    fn: Callable[[Position], float]
    structure: Structure

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.structure)

    def __call__(self, position: Position) -> float:
        return evaluate(self, position)

    def condition(self, fixed: Position) -> TargetLogDensity:
        return condition(self, fixed)


def make_target(fn: Callable[[Position], float], prototype: Position) -> TargetLogDensity:
    """Declare ``fn`` over the names and shapes of ``prototype``."""
    return TargetLogDensity(fn, tuple((name, value.shape) for name, value in prototype.items()))


def evaluate(target: TargetLogDensity, position: Position) -> float:
    """Evaluate the log-density; NaN is reported as ``-inf``."""
    actual = {name: value.shape for name, value in position.items()}
    if actual != dict(target.structure):
        raise InvalidArgumentError(
            f"position {tuple(actual.items())} does not match target structure {target.structure}"
        )
    value = float(target.fn(position))
    if math.isnan(value):
        return -math.inf
    return value


def condition(target: TargetLogDensity, fixed: Position) -> TargetLogDensity:
    """Fix some entries of ``target``; the result is the unnormalised conditional.

    For every free fragment ``theta``:
    ``condition(target, fixed)(theta) == target(merge(theta, fixed))`` exactly.
    """
    declared = dict(target.structure)
    for name, value in fixed.items():
        if name not in declared:
            raise UnknownNameError(f"cannot condition on '{name}': not a target parameter")
        if value.shape != declared[name]:
            raise InvalidArgumentError(
                f"fixed value for '{name}' has shape {value.shape}, expected {declared[name]}"
            )
    free = tuple((name, shape) for name, shape in target.structure if name not in fixed)
    if not free:
        raise InvalidArgumentError("conditioning on every parameter leaves an empty domain")

    parent_fn = target.fn

    def conditional_fn(position: Position) -> float:
        return parent_fn(merge(position, fixed))

    return TargetLogDensity(conditional_fn, free)


# ---------------------------------------------------------------------------
# 2-D Gaussian mean model
# ---------------------------------------------------------------------------

DEFAULT_TRUE_COV = ((1.5, 0.3), (0.7, 0.8))


@dataclass(frozen=True)
class GaussianModelSpec:
    """Bivariate normal data with unknown mean, known covariance, independent normal priors.

    ``true_cov`` is kept as given; :attr:`effective_cov` is its symmetric part.
    """

    true_cov: np.ndarray = field(default_factory=lambda: np.array(DEFAULT_TRUE_COV))
    prior_mean: np.ndarray = field(default_factory=lambda: np.zeros(2))
    prior_scale: float = 10.0
    data: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))

    def __post_init__(self) -> None:
        object.__setattr__(self, "true_cov", np.asarray(self.true_cov, dtype=float))
        object.__setattr__(self, "prior_mean", np.asarray(self.prior_mean, dtype=float))
        object.__setattr__(self, "data", np.asarray(self.data, dtype=float).reshape(-1, 2))
        if self.true_cov.shape != (2, 2):
            raise InvalidArgumentError(f"true_cov must be 2x2, got {self.true_cov.shape}")
        if self.prior_mean.shape != (2,):
            raise InvalidArgumentError("prior_mean must be a 2-vector")
        if not self.prior_scale > 0:
            raise InvalidArgumentError(f"prior_scale must be positive, got {self.prior_scale}")

    @property
    def effective_cov(self) -> np.ndarray:
        return 0.5 * (self.true_cov + self.true_cov.T)

    @property
    def num_data(self) -> int:
        return int(self.data.shape[0])

    def with_data(self, data: np.ndarray) -> GaussianModelSpec:
        return replace(self, data=data)

    def to_dict(self) -> dict[str, Any]:
        return {
            "true_cov": self.true_cov.tolist(),
            "effective_cov": self.effective_cov.tolist(),
            "prior_mean": self.prior_mean.tolist(),
            "prior_scale": self.prior_scale,
            "num_data": self.num_data,
        }


def _cholesky(cov: np.ndarray) -> np.ndarray:
    try:
        return scipy.linalg.cholesky(cov, lower=True)
    except np.linalg.LinAlgError as exc:
        raise InvalidArgumentError(f"covariance {cov.tolist()} is not positive-definite") from exc


GAUSSIAN_PROTOTYPE = Position({"mu_x": 0.0, "mu_y": 0.0})


def gaussian_mean_target(spec: GaussianModelSpec) -> TargetLogDensity:
    """Log-posterior of the mean ``(mu_x, mu_y)`` given ``spec.data``."""
    cov = spec.effective_cov
    chol = _cholesky(cov)
    precision = scipy.linalg.cho_solve((chol, True), np.eye(2))
    log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))
    data = spec.data
    n = spec.num_data
    datum_norm = -0.5 * (2.0 * _LOG_2PI + log_det)
    prior_mean = spec.prior_mean
    scale = float(spec.prior_scale)
    prior_norm = -0.5 * _LOG_2PI - math.log(scale)

    def log_prob(position: Position) -> float:
        mu = np.array([position["mu_x"], position["mu_y"]], dtype=float)
        z = (mu - prior_mean) / scale
        log_prior = 2.0 * prior_norm - 0.5 * float(z @ z)
        if n == 0:
            return log_prior
        diff = data - mu
        quad = np.einsum("ij,jk,ik->i", diff, precision, diff)
        return log_prior + n * datum_norm - 0.5 * float(np.sum(quad))

    return make_target(log_prob, GAUSSIAN_PROTOTYPE)


def simulate_gaussian_data(
    spec: GaussianModelSpec, true_mean: Any, n: int, key: RngKey
) -> np.ndarray:
    """Draw ``n`` i.i.d. rows from ``MVN(true_mean, effective_cov)``."""
    if n < 1:
        raise InvalidArgumentError(f"n must be positive, got {n}")
    mean = np.asarray(true_mean, dtype=float)
    chol = _cholesky(spec.effective_cov)
    z = sample_primitive(key, StandardNormal((n, 2)))
    return mean + z @ chol.T


def conjugate_posterior(spec: GaussianModelSpec) -> tuple[np.ndarray, np.ndarray]:
    """Exact posterior ``(mean, cov)`` of the Gaussian mean with known covariance."""
    prior_cov = spec.prior_scale**2 * np.eye(2)
    n = spec.num_data
    if n == 0:
        return spec.prior_mean.copy(), prior_cov
    try:
        prior_precision = np.linalg.inv(prior_cov)
        data_precision = np.linalg.inv(spec.effective_cov)
        post_cov = np.linalg.inv(prior_precision + n * data_precision)
    except np.linalg.LinAlgError as exc:
        raise InvalidArgumentError("singular covariance in conjugate update") from exc
    xbar = spec.data.mean(axis=0)
    post_mean = post_cov @ (prior_precision @ spec.prior_mean + n * data_precision @ xbar)
    return post_mean, post_cov
