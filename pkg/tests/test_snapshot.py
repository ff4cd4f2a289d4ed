import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from chemokin.geometry import SpatialGrid
from chemokin.snapshot import MAGIC, SnapshotError, decode, encode, read_snapshot, write_snapshot


@given(data=arrays(float, (8, 4), elements=st.floats(allow_nan=False, width=64)),
       time=st.floats(0, 1e3), eps=st.floats(0, 1))
def test_round_trip_bitwise(data, time, eps):
    grid = SpatialGrid(1, 2.5, 8)
    snap = decode(encode(grid, [data, -data], 4, time, eps))
    assert snap.grid == grid and snap.velocity_nodes == 4
    assert snap.time == time and snap.eps == eps
    assert snap.fields[0].tobytes() == np.ascontiguousarray(data).tobytes()
    assert snap.fields[1].tobytes() == np.ascontiguousarray(-data).tobytes()


def test_file_round_trip(tmp_path, rng):
    grid = SpatialGrid(2, (1.0, 3.0), (6, 4))
    rho = rng.random(grid.cells)
    path = tmp_path / "rho.bin"
    write_snapshot(path, grid, [rho], 0, 0.5, 0.0)
    snap = read_snapshot(path)
    assert snap.velocity_nodes == 0
    assert snap.fields[0].tobytes() == rho.tobytes()
    assert snap.grid.extent == (1.0, 3.0)


def test_header_layout_and_payload_length():
    grid = SpatialGrid(1, 3.0, 128)
    f = np.zeros((128, 16))
    data = encode(grid, [f, f], 16, 0.25, 0.125)
    header = len(MAGIC) + 4 + 4 + 4 + 8 + 8 + 8
    assert data[:6] == b"CKIN1\0"
    assert struct.unpack_from("<III", data, 6) == (1, 128, 16)
    assert struct.unpack_from("<3d", data, 18) == (3.0, 0.25, 0.125)
    assert len(data) - header == 2 * 128 * 16 * 8


def test_density_snapshot_sets_zero_velocity_count():
    grid = SpatialGrid(1, 1.0, 4)
    data = encode(grid, [np.ones(4)])
    assert struct.unpack_from("<I", data, 6 + 8)[0] == 0


@pytest.mark.parametrize("mutate", [lambda d: b"XXXXX\0" + d[6:], lambda d: d[:10], lambda d: d[:-3]])
def test_corrupt_files_rejected(mutate):
    grid = SpatialGrid(1, 1.0, 4)
    with pytest.raises(SnapshotError):
        decode(mutate(encode(grid, [np.ones(4)])))


def test_shape_mismatch_rejected():
    with pytest.raises(SnapshotError):
        encode(SpatialGrid(1, 1.0, 4), [np.ones(5)])
