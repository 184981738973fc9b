"""Binary container for space-time fields.

Layout: 16-byte header, then float64 little-endian values in t-major,
row-major spatial order.  Header: magic ``BVF1``, u8 spatial dimension,
3 reserved bytes, u32 little-endian nt, nx, ny (ny = 1 when d = 1).
Velocity files store d interleaved components per node.
"""

import struct

import numpy as np

from .core import Grid, SpaceTimeField, VelocityField

MAGIC = b"BVF1"
_HEADER = struct.Struct("<4sB3xIII")


class FieldFormatError(ValueError):
    pass


def _header_bytes(grid: Grid) -> bytes:
    nx = grid.shape[0]
    ny = grid.shape[1] if grid.d == 2 else 1
    return _HEADER.pack(MAGIC, grid.d, grid.nt, nx, ny)


def _parse_header(data: bytes):
    if len(data) < _HEADER.size:
        raise FieldFormatError("file too short for header")
    magic, d, nt, nx, ny = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FieldFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if d not in (1, 2):
        raise FieldFormatError(f"unsupported spatial dimension {d}")
    if d == 1 and ny != 1:
        raise FieldFormatError("ny must be 1 for d = 1")
    return d, nt, nx, ny


def write_field(path, field: SpaceTimeField) -> None:
    with open(path, "wb") as fh:
        fh.write(_header_bytes(field.grid))
        fh.write(field.values.astype("<f8").tobytes(order="C"))


def write_velocity(path, vel: VelocityField) -> None:
    with open(path, "wb") as fh:
        fh.write(_header_bytes(vel.grid))
        fh.write(vel.values.astype("<f8").tobytes(order="C"))


def _read_payload(path, components_per_node: int):
    with open(path, "rb") as fh:
        data = fh.read()
    d, nt, nx, ny = _parse_header(data)
    shape = (nx,) if d == 1 else (nx, ny)
    nodes = nt * nx * (ny if d == 2 else 1)
    comp = d if components_per_node else 1
    payload = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    if payload.size != nodes * comp:
        raise FieldFormatError(
            f"payload holds {payload.size} values, expected {nodes * comp}"
        )
    return d, nt, shape, payload, comp


def read_field(path, dt: float = 1.0, dx: float = 1.0, boundary=None) -> SpaceTimeField:
    d, nt, shape, payload, _ = _read_payload(path, components_per_node=0)
    grid = Grid(d=d, nt=nt, shape=shape, dt=dt, dx=dx, boundary=boundary)
    return SpaceTimeField(grid, payload.reshape(grid.full_shape))


def read_velocity(path, dt: float = 1.0, dx: float = 1.0, boundary=None) -> VelocityField:
    d, nt, shape, payload, comp = _read_payload(path, components_per_node=1)
    grid = Grid(d=d, nt=nt, shape=shape, dt=dt, dx=dx, boundary=boundary)
    return VelocityField(grid, payload.reshape(grid.full_shape + (comp,)))
