"""Chain positions, chain/kernel state records, state trees and trace buffers."""

from __future__ import annotations

from collections.abc import Iterable, Iterator, Mapping
from typing import Any, NamedTuple

import numpy as np

from mwgkernels.errors import IndexRangeError, InvalidArgumentError, UnknownNameError


def _frozen(value: Any) -> np.ndarray:
    """Return ``value`` as a read-only float64 or int64 array (copied unless already frozen)."""
    if isinstance(value, np.ndarray) and not value.flags.writeable:
        if value.dtype == np.float64 or value.dtype == np.int64:
            return value
    arr = np.asarray(value)
    if arr.dtype.kind == "f":
        arr = np.array(arr, dtype=np.float64, copy=True)
    elif arr.dtype.kind in "iub":
        arr = np.array(arr, dtype=np.int64, copy=True)
    else:
        raise InvalidArgumentError(f"position entries must be real or integer, got dtype {arr.dtype}")
    arr.setflags(write=False)
    return arr


class Position(Mapping[str, np.ndarray]):
    """Ordered, immutable mapping from parameter name to a fixed-shape tensor.

    Iteration follows insertion order. Entries are stored read-only, so a
    Position can be shared freely between chains, kernels and threads.
    """

    __slots__ = ("_entries",)

    def __init__(self, entries: Mapping[str, Any] | Iterable[tuple[str, Any]] = ()) -> None:
        items = entries.items() if isinstance(entries, Mapping) else entries
        store: dict[str, np.ndarray] = {}
        for name, value in items:
            if not isinstance(name, str):
                raise InvalidArgumentError(f"parameter names must be strings, got {name!r}")
            if name in store:
                raise InvalidArgumentError(f"duplicate parameter name '{name}'")
            store[name] = _frozen(value)
        self._entries = store

    @classmethod
    def _wrap(cls, store: dict[str, np.ndarray]) -> Position:
        # caller guarantees unique names and frozen arrays
        obj = cls.__new__(cls)
        obj._entries = store
        return obj

    # -- Mapping protocol -------------------------------------------------

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self._entries[name]
        except KeyError:
            raise UnknownNameError(
                f"unknown parameter name '{name}' (position has: {', '.join(self._entries) or 'none'})"
            ) from None

    def __iter__(self) -> Iterator[str]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, name: object) -> bool:
        return name in self._entries

    def __eq__(self, other: object) -> bool:
        """Bitwise equality by name (entry order is ignored)."""
        if not isinstance(other, Position):
            return NotImplemented
        if self._entries.keys() != other._entries.keys():
            return False
        for name, a in self._entries.items():
            b = other._entries[name]
            if a.shape != b.shape or a.dtype != b.dtype or a.tobytes() != b.tobytes():
                return False
        return True

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        body = ", ".join(f"{k}={v.tolist()!r}" for k, v in self._entries.items())
        return f"Position({body})"

    # -- structure --------------------------------------------------------

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self._entries)

    def structure(self) -> tuple[tuple[str, tuple[int, ...], str], ...]:
        """Names, shapes and element kinds, in entry order."""
        return tuple((k, v.shape, v.dtype.kind) for k, v in self._entries.items())

    @property
    def size(self) -> int:
        return int(sum(v.size for v in self._entries.values()))

    def reorder(self, names: Iterable[str]) -> Position:
        names = tuple(names)
        if set(names) != self._entries.keys() or len(names) != len(self._entries):
            raise InvalidArgumentError(
                f"reorder needs a permutation of {self.names}, got {names}"
            )
        return Position._wrap({k: self._entries[k] for k in names})

    def ravel(self) -> np.ndarray:
        """Concatenate all entries (entry order, row-major) into a float64 vector."""
        if not self._entries:
            return np.zeros(0)
        return np.concatenate([v.ravel().astype(np.float64) for v in self._entries.values()])

    def unravel(self, vector: np.ndarray) -> Position:
        """Inverse of :meth:`ravel`: same names, shapes and dtypes."""
        vector = np.asarray(vector)
        if vector.shape != (self.size,):
            raise InvalidArgumentError(
                f"unravel needs a vector of length {self.size}, got shape {vector.shape}"
            )
        store: dict[str, np.ndarray] = {}
        offset = 0
        for name, value in self._entries.items():
            chunk = vector[offset : offset + value.size].reshape(value.shape)
            store[name] = _frozen(chunk.astype(value.dtype))
            offset += value.size
        return Position._wrap(store)


class ChainState(NamedTuple):
    """User-visible chain state: position with its cached log-density."""

    position: Position
    log_density: float
    log_density_grad: tuple = ()


class ChainAndKernelState(NamedTuple):
    chain: ChainState
    kernel: Any


# ---------------------------------------------------------------------------
# Projection / merge
# ---------------------------------------------------------------------------

def project(position: Position, names: Iterable[str]) -> tuple[Position, Position]:
    """Split ``position`` into the entries named in ``names`` and the rest."""
    names = tuple(names)
    for name in names:
        if name not in position:
            raise UnknownNameError(
                f"cannot project on unknown name '{name}' (position has: {', '.join(position.names)})"
            )
    if len(set(names)) != len(names):
        raise InvalidArgumentError(f"duplicate names in projection: {names}")
    entries = position._entries
    chosen = set(names)
    selected = Position._wrap({k: entries[k] for k in names})
    remainder = Position._wrap({k: v for k, v in entries.items() if k not in chosen})
    return selected, remainder


def merge(selected: Position, remainder: Position) -> Position:
    """Union of two positions with disjoint names (``selected`` entries first)."""
    overlap = selected._entries.keys() & remainder._entries.keys()
    if overlap:
        raise InvalidArgumentError(f"cannot merge positions sharing names: {sorted(overlap)}")
    return Position._wrap({**selected._entries, **remainder._entries})


# ---------------------------------------------------------------------------
# Trees of side information / kernel state
# ---------------------------------------------------------------------------

def _join(prefix: str, key: str) -> str:
    return f"{prefix}.{key}" if prefix else key


def tree_leaves(obj: Any, prefix: str = "") -> list[tuple[str, np.ndarray]]:
    """Flatten nested tuples, NamedTuples and Positions into ``(path, array)`` leaves."""
    leaves: list[tuple[str, np.ndarray]] = []
    if isinstance(obj, Position):
        for name, value in obj.items():
            leaves.append((_join(prefix, name), value))
    elif isinstance(obj, tuple) and hasattr(obj, "_fields"):
        for field_name, value in zip(obj._fields, obj):
            leaves.extend(tree_leaves(value, _join(prefix, field_name)))
    elif isinstance(obj, (tuple, list)):
        for i, value in enumerate(obj):
            leaves.extend(tree_leaves(value, _join(prefix, str(i))))
    elif obj is not None:
        leaves.append((prefix, np.asarray(obj)))
    return leaves


def tree_structure(obj: Any) -> tuple[tuple[str, tuple[int, ...], str], ...]:
    """Hashable signature of a tree: leaf paths, shapes and element kinds."""
    return tuple((path, leaf.shape, leaf.dtype.kind) for path, leaf in tree_leaves(obj))


# ---------------------------------------------------------------------------
# Trace buffers
# ---------------------------------------------------------------------------

def _flat_labels(name: str, shape: tuple[int, ...]) -> list[str]:
    if shape == ():
        return [name]
    return [f"{name}.{k}" for k in range(int(np.prod(shape)))]


class TraceBuffer:
    """Preallocated ``num_samples x Position`` storage; unwritten rows read as zeros."""

    def __init__(self, prototype: Position, num_samples: int) -> None:
        if num_samples < 1:
            raise InvalidArgumentError(f"num_samples must be positive, got {num_samples}")
        self.num_samples = int(num_samples)
        self._structure = prototype.structure()
        self._data: dict[str, np.ndarray] = {
            name: np.zeros((self.num_samples, *value.shape), dtype=value.dtype)
            for name, value in prototype.items()
        }

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self._data)

    def structure(self) -> tuple[tuple[str, tuple[int, ...], str], ...]:
        return self._structure

    def _check_index(self, index: int) -> None:
        if not 0 <= index < self.num_samples:
            raise IndexRangeError(f"trace index {index} outside [0, {self.num_samples})")

    def write(self, index: int, position: Position) -> None:
        self._check_index(index)
        if position.structure() != self._structure:
            raise InvalidArgumentError(
                f"position structure {position.structure()} does not match trace {self._structure}"
            )
        for name, value in position.items():
            self._data[name][index] = value

    def read(self, index: int) -> Position:
        self._check_index(index)
        return Position((name, column[index]) for name, column in self._data.items())

    def column(self, name: str) -> np.ndarray:
        """All samples of one entry, shape ``(num_samples, *entry_shape)``."""
        if name not in self._data:
            raise UnknownNameError(f"trace has no entry '{name}'")
        view = self._data[name].view()
        view.setflags(write=False)
        return view

    def flat_columns(self, start: int = 0) -> dict[str, np.ndarray]:
        """One 1-D column per scalar element, labelled ``name`` or ``name.k``."""
        columns: dict[str, np.ndarray] = {}
        for name, data in self._data.items():
            shape = data.shape[1:]
            flat = data[start:].reshape(data.shape[0] - start, -1)
            for k, label in enumerate(_flat_labels(name, shape)):
                columns[label] = flat[:, k]
        return columns


def trace_allocate(prototype: Position, num_samples: int) -> TraceBuffer:
    return TraceBuffer(prototype, num_samples)


def trace_write(buffer: TraceBuffer, index: int, position: Position) -> None:
    buffer.write(index, position)


def trace_read(buffer: TraceBuffer, index: int) -> Position:
    return buffer.read(index)


class InfoTrace:
    """Preallocated per-leaf storage for the side information of every step."""

    def __init__(self, prototype: Any, num_samples: int) -> None:
        self.num_samples = int(num_samples)
        self._structure = tree_structure(prototype)
        self._data: dict[str, np.ndarray] = {
            path: np.zeros((self.num_samples, *leaf.shape), dtype=leaf.dtype)
            for path, leaf in tree_leaves(prototype)
        }

    @property
    def paths(self) -> tuple[str, ...]:
        return tuple(self._data)

    def write(self, index: int, info: Any) -> None:
        if not 0 <= index < self.num_samples:
            raise IndexRangeError(f"info index {index} outside [0, {self.num_samples})")
        leaves = tree_leaves(info)
        if tuple((p, v.shape, v.dtype.kind) for p, v in leaves) != self._structure:
            raise InvalidArgumentError("side information changed structure between steps")
        for path, value in leaves:
            self._data[path][index] = value

    def leaf(self, path: str) -> np.ndarray:
        if path not in self._data:
            raise UnknownNameError(f"info trace has no leaf '{path}'")
        return self._data[path]
