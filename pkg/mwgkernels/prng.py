"""Splittable, counter-based pseudorandom keys.

A key is a 256-bit value. Deriving children (``split``/``fold_in``) hashes the
parent through :class:`numpy.random.SeedSequence`; drawing variates seeds a
:class:`numpy.random.Philox` bit generator with the key as Philox key and
counter. Nothing here holds mutable state: the same key and the same
distribution always give the same draw.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from mwgkernels.errors import InvalidArgumentError

_UINT64_LIMIT = 2**64

# spawn-key tags keep the three derivations in disjoint hash domains
_SEED_TAG = 0x5EED
_SPLIT_TAG = 0x5B17
_FOLD_TAG = 0xF01D


@dataclass(frozen=True, slots=True)
class RngKey:
    """Opaque 256-bit random key (four unsigned 64-bit words)."""

    words: tuple[int, int, int, int]

    def __post_init__(self) -> None:
        if len(self.words) != 4 or any(not 0 <= int(w) < _UINT64_LIMIT for w in self.words):
            raise InvalidArgumentError("RngKey needs four unsigned 64-bit words")

    def __repr__(self) -> str:
        return "RngKey(" + "".join(f"{w:016x}" for w in self.words) + ")"


def _words(state: np.ndarray) -> tuple[int, int, int, int]:
    return tuple(int(w) for w in state)  # type: ignore[return-value]


def key_from_seed(seed: int) -> RngKey:
    """Map an unsigned 64-bit seed to a key."""
    seed = int(seed)
    if not 0 <= seed < _UINT64_LIMIT:
        raise InvalidArgumentError(f"seed must be an unsigned 64-bit integer, got {seed}")
    state = np.random.SeedSequence(seed, spawn_key=(_SEED_TAG,)).generate_state(4, np.uint64)
    return RngKey(_words(state))


def split(key: RngKey, n: int = 2) -> tuple[RngKey, ...]:
    """Derive ``n`` independent child keys; ``key`` itself is left usable."""
    if n < 1:
        raise InvalidArgumentError(f"split needs n >= 1, got {n}")
    state = np.random.SeedSequence(list(key.words), spawn_key=(_SPLIT_TAG,)).generate_state(
        4 * n, np.uint64
    )
    return tuple(RngKey(_words(state[4 * i : 4 * i + 4])) for i in range(n))


def fold_in(key: RngKey, data: int) -> RngKey:
    """Derive a child key from ``key`` and a non-negative integer (e.g. an iteration index)."""
    if data < 0:
        raise InvalidArgumentError(f"fold_in data must be non-negative, got {data}")
    state = np.random.SeedSequence(
        list(key.words), spawn_key=(_FOLD_TAG, int(data))
    ).generate_state(4, np.uint64)
    return RngKey(_words(state))


def _generator(key: RngKey) -> np.random.Generator:
    w0, w1, w2, w3 = key.words
    bit_generator = np.random.Philox(
        key=np.array([w0, w1], dtype=np.uint64),
        counter=np.array([w2, w3, 0, 0], dtype=np.uint64),
    )
    return np.random.Generator(bit_generator)


# ---------------------------------------------------------------------------
# Distribution specs
# ---------------------------------------------------------------------------

def _shape(shape: Any) -> tuple[int, ...]:
    if shape is None:
        return ()
    if isinstance(shape, int):
        return (shape,)
    return tuple(int(s) for s in shape)


@dataclass(frozen=True)
class Uniform:
    """Uniform on ``[low, high)``; ``low``/``high`` may broadcast against ``shape``."""

    low: Any = 0.0
    high: Any = 1.0
    shape: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if not np.all(np.asarray(self.low) < np.asarray(self.high)):
            raise InvalidArgumentError(f"uniform needs low < high, got {self.low!r}, {self.high!r}")

    def draw(self, gen: np.random.Generator) -> np.ndarray:
        return np.asarray(gen.uniform(self.low, self.high, size=_shape(self.shape)))


@dataclass(frozen=True)
class StandardNormal:
    shape: tuple[int, ...] = ()

    def draw(self, gen: np.random.Generator) -> np.ndarray:
        return np.asarray(gen.standard_normal(size=_shape(self.shape)))


@dataclass(frozen=True)
class Bernoulli:
    p: Any = 0.5
    shape: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        p = np.asarray(self.p, dtype=float)
        if np.any(np.isnan(p)) or np.any(p < 0.0) or np.any(p > 1.0):
            raise InvalidArgumentError(f"bernoulli needs 0 <= p <= 1, got {self.p!r}")

    def draw(self, gen: np.random.Generator) -> np.ndarray:
        return np.asarray(gen.random(size=_shape(self.shape)) < self.p)


@dataclass(frozen=True)
class IntegerUniform:
    """Uniform integers on ``[low, high)``."""

    low: int = 0
    high: int = 2
    shape: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if not int(self.low) < int(self.high):
            raise InvalidArgumentError(
                f"integer_uniform needs low < high, got {self.low!r}, {self.high!r}"
            )

    def draw(self, gen: np.random.Generator) -> np.ndarray:
        return np.asarray(gen.integers(int(self.low), int(self.high), size=_shape(self.shape)))


@dataclass(frozen=True)
class Binomial:
    """Binomial counts; ``shape`` defaults to the broadcast shape of ``n`` and ``p``."""

    n: Any = 1
    p: Any = 0.5
    shape: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        n = np.asarray(self.n)
        p = np.asarray(self.p, dtype=float)
        if np.any(n < 0):
            raise InvalidArgumentError("binomial needs n >= 0")
        if np.any(np.isnan(p)) or np.any(p < 0.0) or np.any(p > 1.0):
            raise InvalidArgumentError(f"binomial needs 0 <= p <= 1, got {self.p!r}")

    def draw(self, gen: np.random.Generator) -> np.ndarray:
        shape = np.broadcast(np.asarray(self.n), np.asarray(self.p)).shape
        if self.shape is not None:
            shape = _shape(self.shape)
        return np.asarray(gen.binomial(self.n, self.p, size=shape), dtype=np.int64)


DistributionSpec = Uniform | StandardNormal | Bernoulli | IntegerUniform | Binomial


def sample_primitive(key: RngKey, spec: DistributionSpec) -> np.ndarray:
    """Draw one tensor from ``spec``; deterministic in ``(key, spec)``."""
    return spec.draw(_generator(key))
