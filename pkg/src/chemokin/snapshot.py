"""Binary field snapshots.

Layout (all little-endian)::

    magic   b"CKIN1\\0"
    u32     dim
    u32     cells along each axis            (dim values)
    u32     velocity node count, 0 for densities
    f64     extent along each axis           (dim values)
    f64     time
    f64     eps
    f64     payload, row-major

Fields follow one another; each holds ``prod(cells) * max(nv, 1)`` values
with the space index major and the velocity index minor.  The number of
fields is recovered from the file size.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from chemokin.geometry import SpatialGrid

MAGIC = b"CKIN1\0"
_F64 = np.dtype("<f8")


class SnapshotError(ValueError):
    pass


@dataclass(frozen=True)
class Snapshot:
    grid: SpatialGrid
    velocity_nodes: int
    time: float
    eps: float
    fields: tuple[np.ndarray, ...]


def _header(grid: SpatialGrid, nv: int, time: float, eps: float) -> bytes:
    d = grid.dim
    return (MAGIC + struct.pack(f"<I{d}II", d, *grid.cells, nv)
            + struct.pack(f"<{d}d2d", *grid.extent, time, eps))


def encode(grid: SpatialGrid, fields, velocity_nodes: int = 0, time: float = 0.0, eps: float = 0.0) -> bytes:
    if velocity_nodes < 0:
        raise SnapshotError(f"velocity node count must be >= 0, got {velocity_nodes}")
    shape = grid.cells + ((velocity_nodes,) if velocity_nodes else ())
    parts = [_header(grid, velocity_nodes, float(time), float(eps))]
    for f in fields:
        f = np.asarray(f)
        if f.shape != shape:
            raise SnapshotError(f"field has shape {f.shape}, expected {shape}")
        parts.append(np.ascontiguousarray(f, dtype=_F64).tobytes())
    return b"".join(parts)


def decode(data: bytes) -> Snapshot:
    if not data.startswith(MAGIC):
        raise SnapshotError("not a snapshot file (bad magic bytes)")
    pos = len(MAGIC)
    try:
        (dim,) = struct.unpack_from("<I", data, pos)
        if dim not in (1, 2):
            raise SnapshotError(f"unsupported dim {dim} in snapshot header")
        pos += 4
        *cells, nv = struct.unpack_from(f"<{dim}II", data, pos)
        pos += 4 * (dim + 1)
        *extent, time, eps = struct.unpack_from(f"<{dim}d2d", data, pos)
        pos += 8 * (dim + 2)
    except struct.error as exc:
        raise SnapshotError(f"truncated snapshot header: {exc}") from None
    grid = SpatialGrid(dim, tuple(extent), tuple(cells))
    shape = grid.cells + ((nv,) if nv else ())
    per_field = int(np.prod(shape)) * _F64.itemsize
    payload = len(data) - pos
    if payload % per_field:
        raise SnapshotError(f"payload of {payload} bytes is not a whole number of {per_field}-byte fields")
    values = np.frombuffer(data, dtype=_F64, offset=pos).astype(np.float64)
    fields = tuple(values.reshape((-1,) + shape))
    return Snapshot(grid, nv, time, eps, fields)


def write_snapshot(path, grid: SpatialGrid, fields, velocity_nodes: int = 0, time: float = 0.0,
                   eps: float = 0.0) -> None:
    data = encode(grid, fields, velocity_nodes, time, eps)
    with open(path, "wb") as fh:
        written = fh.write(data)
    if written != len(data):
        raise OSError(f"short write to {path}: {written} of {len(data)} bytes")


def read_snapshot(path) -> Snapshot:
    with open(path, "rb") as fh:
        return decode(fh.read())
