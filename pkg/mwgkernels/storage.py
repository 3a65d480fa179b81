"""Artifact storage: atomic writes, CSV traces, JSON summaries and a binary trace dump."""

from __future__ import annotations

import csv
import io
import json
import os
import struct
import tempfile
from pathlib import Path
from typing import Any

import numpy as np

from mwgkernels.errors import InvalidArgumentError
from mwgkernels.state import Position, TraceBuffer

TRACE_MAGIC = b"MWGT"
TRACE_VERSION = 1

_DTYPE_CODES = {"f": np.dtype("<f8"), "i": np.dtype("<i8")}

EVENTS_HEADER = ("time", "population", "si", "ir")
TRAJECTORY_HEADER = ("time", "population", "S", "I", "R")


def _ensure_dir(directory: Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)


# ---------------------------------------------------------------------------
# Atomic writes
# ---------------------------------------------------------------------------

def atomic_write_bytes(path: Path, data: bytes) -> Path:
    """Write ``data`` to ``path`` via a temporary file in the same directory."""
    path = Path(path)
    _ensure_dir(path.parent)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp_name, path)
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise
    return path


def atomic_write_text(path: Path, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def _format_value(value: Any) -> str:
    if isinstance(value, (np.integer, int)):
        return str(int(value))
    return repr(float(value))


def columns_to_csv(columns: dict[str, np.ndarray], index_name: str = "iteration") -> str:
    """Render equal-length columns as CSV with a leading 1-based index column."""
    labels = list(columns)
    lengths = {len(col) for col in columns.values()}
    if len(lengths) > 1:
        raise InvalidArgumentError(f"columns have different lengths: {sorted(lengths)}")
    n = lengths.pop() if lengths else 0
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([index_name, *labels])
    for row in range(n):
        writer.writerow([row + 1, *(_format_value(columns[label][row]) for label in labels)])
    return buf.getvalue()


def trace_to_csv(trace: TraceBuffer) -> str:
    """Header ``iteration,<name>[.<k>]...``; row ``i`` is the position after ``i`` steps."""
    return columns_to_csv(trace.flat_columns())


def write_trace_csv(path: Path, trace: TraceBuffer) -> Path:
    return atomic_write_text(path, trace_to_csv(trace))


def read_csv_columns(path: Path) -> dict[str, np.ndarray]:
    """Read a numeric CSV back into float columns keyed by header label."""
    with Path(path).open(encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader if row]
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return {label: data[:, k] for k, label in enumerate(header)}


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------

def _json_default(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def write_summary_json(path: Path, summary: dict[str, Any]) -> Path:
    text = json.dumps(summary, indent=2, sort_keys=True, ensure_ascii=False, default=_json_default)
    return atomic_write_text(path, text + "\n")


# ---------------------------------------------------------------------------
# Binary trace dump
# ---------------------------------------------------------------------------

def dump_trace_binary(trace: TraceBuffer) -> bytes:
    """Little-endian dump: header, entry table, sample count, then row-major entry data."""
    structure = trace.structure()
    parts = [TRACE_MAGIC, struct.pack("<II", TRACE_VERSION, len(structure))]
    for name, shape, kind in structure:
        encoded = name.encode("utf-8")
        code = b"f" if kind == "f" else b"i"
        parts.append(struct.pack("<H", len(encoded)) + encoded + code)
        parts.append(struct.pack("<B", len(shape)) + struct.pack(f"<{len(shape)}I", *shape))
    parts.append(struct.pack("<Q", trace.num_samples))
    for name, _, kind in structure:
        dtype = _DTYPE_CODES["f" if kind == "f" else "i"]
        parts.append(np.ascontiguousarray(trace.column(name), dtype=dtype).tobytes())
    return b"".join(parts)


def load_trace_binary(data: bytes) -> TraceBuffer:
    """Inverse of :func:`dump_trace_binary`."""
    view = memoryview(data)
    if bytes(view[:4]) != TRACE_MAGIC:
        raise InvalidArgumentError("not a trace dump (bad magic)")
    version, count = struct.unpack_from("<II", view, 4)
    if version != TRACE_VERSION:
        raise InvalidArgumentError(f"unsupported trace dump version {version}")
    offset = 12
    entries: list[tuple[str, tuple[int, ...], np.dtype]] = []
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", view, offset)
        offset += 2
        name = bytes(view[offset : offset + name_len]).decode("utf-8")
        offset += name_len
        code = bytes(view[offset : offset + 1]).decode("ascii")
        if code not in _DTYPE_CODES:
            raise InvalidArgumentError(f"unknown dtype code {code!r} for entry '{name}'")
        (ndim,) = struct.unpack_from("<B", view, offset + 1)
        offset += 2
        shape = struct.unpack_from(f"<{ndim}I", view, offset)
        offset += 4 * ndim
        entries.append((name, tuple(shape), _DTYPE_CODES[code]))
    (num_samples,) = struct.unpack_from("<Q", view, offset)
    offset += 8

    prototype = Position((name, np.zeros(shape, dtype=dtype)) for name, shape, dtype in entries)
    trace = TraceBuffer(prototype, num_samples)
    columns = {}
    for name, shape, dtype in entries:
        size = num_samples * int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        columns[name] = np.frombuffer(view[offset : offset + size], dtype=dtype).reshape(num_samples, *shape)
        offset += size
    if offset != len(view):
        raise InvalidArgumentError("trailing bytes after trace dump")
    for i in range(num_samples):
        trace.write(i, Position((name, column[i]) for name, column in columns.items()))
    return trace


# ---------------------------------------------------------------------------
# Epidemic tables
# ---------------------------------------------------------------------------

def events_to_csv(events: np.ndarray) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(EVENTS_HEADER)
    num_times, num_pops, _ = events.shape
    for t in range(num_times):
        for i in range(num_pops):
            writer.writerow([t, i, int(events[t, i, 0]), int(events[t, i, 1])])
    return buf.getvalue()


def write_events_csv(path: Path, events: np.ndarray) -> Path:
    return atomic_write_text(path, events_to_csv(np.asarray(events)))


def read_events_csv(path: Path, num_times: int, num_pops: int) -> np.ndarray:
    """Read ``time,population,si,ir`` rows into a ``(T, m, 2)`` tensor; missing cells are zero."""
    events = np.zeros((num_times, num_pops, 2), dtype=np.int64)
    with Path(path).open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(EVENTS_HEADER) - set(reader.fieldnames or ())
        if missing:
            raise InvalidArgumentError(f"{path}: missing columns {sorted(missing)}")
        for line, row in enumerate(reader, start=2):
            try:
                t, i = int(row["time"]), int(row["population"])
                si, ir = int(row["si"]), int(row["ir"])
            except ValueError as exc:
                raise InvalidArgumentError(f"{path}:{line}: {exc}") from exc
            if not (0 <= t < num_times and 0 <= i < num_pops):
                raise InvalidArgumentError(f"{path}:{line}: cell ({t}, {i}) out of range")
            events[t, i] = (si, ir)
    return events


def write_trajectory_csv(path: Path, trajectory: np.ndarray) -> Path:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRAJECTORY_HEADER)
    num_steps, num_pops, _ = trajectory.shape
    for t in range(num_steps):
        for i in range(num_pops):
            writer.writerow([t, i, *(int(v) for v in trajectory[t, i])])
    return atomic_write_text(path, buf.getvalue())
