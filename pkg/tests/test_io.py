import struct

import numpy as np
import pytest

from bvflow.core import Grid, SpaceTimeField, VelocityField
from bvflow.fieldio import (
    FieldFormatError,
    read_field,
    read_velocity,
    write_field,
    write_velocity,
)
from bvflow.flowio import (
    FLOW_MAGIC,
    FlowFormatError,
    flow_to_rgb,
    read_flow,
    read_ppm,
    write_flow,
    write_ppm,
)


class TestFieldFormat:
    def test_header_layout(self, tmp_path):
        grid = Grid(2, 3, (4, 5))
        field = SpaceTimeField(grid, np.arange(60.0).reshape(3, 4, 5))
        path = tmp_path / "f.bvf"
        write_field(path, field)
        raw = path.read_bytes()
        assert raw[:4] == b"BVF1"
        assert raw[4] == 2
        assert raw[5:8] == b"\x00\x00\x00"
        assert struct.unpack("<III", raw[8:20]) == (3, 4, 5)
        assert len(raw) == 20 + 60 * 8
        # t-major, row-major: first value is u[0,0,0], second u[0,0,1]
        assert struct.unpack("<d", raw[20:28])[0] == 0.0
        assert struct.unpack("<d", raw[28:36])[0] == 1.0

    def test_roundtrip_1d(self, tmp_path):
        grid = Grid(1, 4, (6,), dt=0.5, dx=0.25)
        field = SpaceTimeField(grid, np.random.default_rng(0).normal(size=(4, 6)))
        path = tmp_path / "f.bvf"
        write_field(path, field)
        back = read_field(path, dt=0.5, dx=0.25)
        assert back.grid == grid
        assert np.array_equal(back.values, field.values)

    def test_velocity_roundtrip_interleaved(self, tmp_path):
        grid = Grid(2, 2, (3, 3))
        vals = np.random.default_rng(1).normal(size=(2, 3, 3, 2))
        path = tmp_path / "v.bvf"
        write_velocity(path, VelocityField(grid, vals))
        back = read_velocity(path)
        assert np.array_equal(back.values, vals)
        raw = path.read_bytes()
        # components interleaved per node
        v0 = struct.unpack("<d", raw[20:28])[0]
        v1 = struct.unpack("<d", raw[28:36])[0]
        assert (v0, v1) == (vals[0, 0, 0, 0], vals[0, 0, 0, 1])

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.bvf"
        path.write_bytes(b"NOPE" + bytes(16) + bytes(64))
        with pytest.raises(FieldFormatError, match="magic"):
            read_field(path)

    def test_truncated_payload(self, tmp_path):
        grid = Grid(1, 4, (6,))
        field = SpaceTimeField(grid, np.zeros((4, 6)))
        path = tmp_path / "f.bvf"
        write_field(path, field)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(FieldFormatError, match="payload"):
            read_field(path)


class TestFlowFormat:
    def test_roundtrip_and_layout(self, tmp_path):
        flow = np.random.default_rng(2).normal(size=(5, 7, 2)).astype(np.float32)
        path = tmp_path / "f.flo"
        write_flow(path, flow)
        raw = path.read_bytes()
        magic, w, h = struct.unpack("<fii", raw[:12])
        assert magic == np.float32(FLOW_MAGIC)
        assert (w, h) == (7, 5)
        back = read_flow(path)
        assert np.allclose(back, flow)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "f.flo"
        path.write_bytes(struct.pack("<fii", 1.0, 2, 2) + bytes(32))
        with pytest.raises(FlowFormatError, match="magic"):
            read_flow(path)

    def test_rgb_wheel_properties(self):
        flow = np.zeros((3, 3, 2))
        rgb = flow_to_rgb(flow, max_magnitude=1.0)
        assert np.all(rgb == 255)  # zero flow renders white
        flow[1, 1] = (1.0, 0.0)
        rgb = flow_to_rgb(flow, max_magnitude=1.0)
        assert rgb.dtype == np.uint8
        assert tuple(rgb[1, 1]) != (255, 255, 255)

    def test_ppm_roundtrip(self, tmp_path):
        rgb = np.random.default_rng(3).integers(0, 256, size=(4, 6, 3), dtype=np.uint8)
        path = tmp_path / "img.ppm"
        write_ppm(path, rgb)
        assert path.read_bytes().startswith(b"P6\n6 4\n255\n")
        assert np.array_equal(read_ppm(path), rgb)
