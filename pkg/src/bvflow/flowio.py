"""Flow-field files and raster output.

Flow files use the common interchange layout: float32 magic 202021.25,
int32 width and height, then row-major interleaved float32 (horizontal,
vertical) components.  Rasters are written as binary P6 pixmaps with the
usual hue-by-angle, saturation-by-magnitude color wheel.
"""

import struct

import numpy as np

FLOW_MAGIC = 202021.25


class FlowFormatError(ValueError):
    pass


def write_flow(path, flow: np.ndarray) -> None:
    """Write a (height, width, 2) float array as a flow file."""
    flow = np.asarray(flow, dtype=np.float32)
    if flow.ndim != 3 or flow.shape[2] != 2:
        raise FlowFormatError("flow must have shape (height, width, 2)")
    if not np.all(np.isfinite(flow)):
        raise FlowFormatError("flow values must be finite")
    h, w = flow.shape[:2]
    with open(path, "wb") as fh:
        fh.write(struct.pack("<fii", FLOW_MAGIC, w, h))
        fh.write(flow.astype("<f4").tobytes(order="C"))


def read_flow(path) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(12)
        if len(head) < 12:
            raise FlowFormatError("file too short for a flow header")
        magic, w, h = struct.unpack("<fii", head)
        if abs(magic - FLOW_MAGIC) > 1e-3:
            raise FlowFormatError(f"bad flow magic {magic!r}")
        data = np.frombuffer(fh.read(), dtype="<f4")
    if data.size != 2 * w * h:
        raise FlowFormatError("flow payload size mismatch")
    return data.reshape(h, w, 2).astype(np.float64)


# ---------------------------------------------------------------------------
# color wheel (piecewise-linear hue transitions, after the standard scheme)

_RY, _YG, _GC, _CB, _BM, _MR = 15, 6, 4, 11, 13, 6


def _color_wheel() -> np.ndarray:
    total = _RY + _YG + _GC + _CB + _BM + _MR
    wheel = np.zeros((total, 3))
    col = 0
    wheel[col : col + _RY, 0] = 1.0
    wheel[col : col + _RY, 1] = np.arange(_RY) / _RY
    col += _RY
    wheel[col : col + _YG, 0] = 1.0 - np.arange(_YG) / _YG
    wheel[col : col + _YG, 1] = 1.0
    col += _YG
    wheel[col : col + _GC, 1] = 1.0
    wheel[col : col + _GC, 2] = np.arange(_GC) / _GC
    col += _GC
    wheel[col : col + _CB, 1] = 1.0 - np.arange(_CB) / _CB
    wheel[col : col + _CB, 2] = 1.0
    col += _CB
    wheel[col : col + _BM, 2] = 1.0
    wheel[col : col + _BM, 0] = np.arange(_BM) / _BM
    col += _BM
    wheel[col : col + _MR, 2] = 1.0 - np.arange(_MR) / _MR
    wheel[col : col + _MR, 0] = 1.0
    return wheel


_WHEEL = _color_wheel()


def flow_to_rgb(flow: np.ndarray, max_magnitude=None) -> np.ndarray:
    """Colorize a (h, w, 2) flow field; returns uint8 (h, w, 3)."""
    fx = flow[..., 0]
    fy = flow[..., 1]
    mag = np.sqrt(fx ** 2 + fy ** 2)
    if max_magnitude is None:
        max_magnitude = float(np.max(mag))
    scale = max(max_magnitude, 1e-12)
    sat = np.clip(mag / scale, 0.0, 1.0)
    angle = np.arctan2(-fy, -fx) / np.pi  # in (-1, 1]
    total = _WHEEL.shape[0]
    fk = (angle + 1.0) / 2.0 * (total - 1)
    k0 = np.floor(fk).astype(int) % total
    k1 = (k0 + 1) % total
    frac = fk - np.floor(fk)
    rgb = np.empty(flow.shape[:2] + (3,))
    for c in range(3):
        col = (1.0 - frac) * _WHEEL[k0, c] + frac * _WHEEL[k1, c]
        rgb[..., c] = 1.0 - sat * (1.0 - col)  # fade to white at zero flow
    return (255.0 * np.clip(rgb, 0.0, 1.0) + 0.5).astype(np.uint8)


def write_ppm(path, rgb: np.ndarray) -> None:
    """Binary P6 pixmap, 8 bits per channel."""
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.dtype != np.uint8:
        raise ValueError("expected a uint8 (h, w, 3) image")
    h, w = rgb.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(rgb.tobytes(order="C"))


def read_ppm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P6":
        raise ValueError("not a binary P6 pixmap")
    w, h = (int(x) for x in parts[1].split())
    if parts[2] != b"255":
        raise ValueError("expected 8-bit channels")
    img = np.frombuffer(parts[3][: w * h * 3], dtype=np.uint8)
    return img.reshape(h, w, 3)
