"""Space-time grids, fields, model weights and the discrete energies.

The model couples an image sequence u(t, x) with a velocity field v(t, x)
through the integrand

    alpha_F |du/dt + v . grad_x u|  +  alpha_v |Dv|  +  alpha_u |Du|

summed over a regular (time x space) grid and weighted by the cell volume.
All gradients are forward differences.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

NEUMANN = "neumann"
PERIODIC = "periodic"
_BOUNDARY_KINDS = (NEUMANN, PERIODIC)


def stable_sum(values) -> float:
    """Sum of an array that is deterministic and permutation invariant.

    Sorting first makes the pairwise summation independent of the memory
    layout, so energies of translated periodic fields agree bitwise.
    """
    arr = np.asarray(values, dtype=np.float64)
    return float(np.sum(np.sort(arr, axis=None)))


@dataclass(frozen=True)
class Weights:
    """Model constants: transport, flow-TV and intensity-TV weights, the
    velocity sup bound M and the fidelity exponent p."""

    alpha_F: float
    alpha_v: float
    alpha_u: float
    M: float = 4.0
    p: float = 1.0

    def __post_init__(self):
        if not (self.alpha_F >= 0.0):
            raise ValueError("alpha_F must be nonnegative")
        if not (self.alpha_v > 0.0 and self.alpha_u > 0.0):
            raise ValueError("alpha_v and alpha_u must be positive")
        if not (self.M > 0.0):
            raise ValueError("M must be positive")
        if not (self.p >= 1.0):
            raise ValueError("fidelity exponent p must be >= 1")

    def check_fidelity_exponent(self, d: int) -> None:
        # admissible range depends on the spatial dimension: 1 <= p < (d+1)/d
        limit = (d + 1) / d
        if not (1.0 <= self.p < limit):
            raise ValueError(
                f"fidelity exponent p={self.p} outside [1, {limit}) for d={d}"
            )


@dataclass(frozen=True)
class Grid:
    """Regular discretization of the space-time domain (0,T) x Omega.

    ``shape`` holds the d spatial extents; axis 0 of every field is time.
    ``boundary`` gives one condition per axis (time first).
    """

    d: int
    nt: int
    shape: tuple
    dt: float = 1.0
    dx: float = 1.0
    boundary: tuple = None

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError("spatial dimension must be 1 or 2")
        shape = tuple(int(s) for s in self.shape)
        object.__setattr__(self, "shape", shape)
        if len(shape) != self.d:
            raise ValueError("shape must list d spatial extents")
        if self.nt < 2 or any(s < 2 for s in shape):
            raise ValueError("need nt >= 2 and all spatial extents >= 2")
        if not (self.dt > 0 and self.dx > 0):
            raise ValueError("dt and dx must be positive")
        bnd = self.boundary
        if bnd is None:
            bnd = (NEUMANN,) * (self.d + 1)
        bnd = tuple(bnd)
        if len(bnd) != self.d + 1 or any(b not in _BOUNDARY_KINDS for b in bnd):
            raise ValueError(f"boundary must be {_BOUNDARY_KINDS} per axis")
        object.__setattr__(self, "boundary", bnd)

    @property
    def full_shape(self) -> tuple:
        return (self.nt,) + self.shape

    @property
    def num_nodes(self) -> int:
        return int(np.prod(self.full_shape))

    @property
    def cell_volume(self) -> float:
        return self.dt * self.dx ** self.d

    @property
    def axis_scales(self) -> tuple:
        return (1.0 / self.dt,) + (1.0 / self.dx,) * self.d


@dataclass(frozen=True)
class SpaceTimeField:
    """Scalar intensity u sampled at the nodes of a grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", vals)
        if vals.shape != self.grid.full_shape:
            raise ValueError(
                f"field shape {vals.shape} does not match grid {self.grid.full_shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")


@dataclass(frozen=True)
class VelocityField:
    """d-vector velocity v sampled at the nodes of a grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", vals)
        expected = self.grid.full_shape + (self.grid.d,)
        if vals.shape != expected:
            raise ValueError(f"velocity shape {vals.shape}, expected {expected}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("velocity values must be finite")

    def max_speed(self) -> float:
        return float(np.sqrt(np.max(np.sum(self.values ** 2, axis=-1))))


@dataclass(frozen=True)
class JumpDatum:
    """One-sided traces (u, v) and the space-time unit normal at a jump point.

    Component 0 of ``n`` is temporal; ``n`` points towards the plus side.
    """

    u_plus: float
    u_minus: float
    v_plus: np.ndarray
    v_minus: np.ndarray
    n: np.ndarray

    def __post_init__(self):
        vp = np.atleast_1d(np.asarray(self.v_plus, dtype=np.float64))
        vm = np.atleast_1d(np.asarray(self.v_minus, dtype=np.float64))
        n = np.atleast_1d(np.asarray(self.n, dtype=np.float64))
        object.__setattr__(self, "v_plus", vp)
        object.__setattr__(self, "v_minus", vm)
        object.__setattr__(self, "n", n)
        if vp.shape != vm.shape or vp.ndim != 1:
            raise ValueError("v_plus and v_minus must be d-vectors of equal length")
        if n.shape != (vp.size + 1,):
            raise ValueError("n must be a (d+1)-vector")
        if abs(np.linalg.norm(n) - 1.0) > 1e-12:
            raise ValueError("|n| must equal 1 within 1e-12")

    @property
    def d(self) -> int:
        return self.v_plus.size

    @property
    def jump_u(self) -> float:
        return float(self.u_plus - self.u_minus)

    @property
    def jump_v(self) -> np.ndarray:
        return self.v_plus - self.v_minus

    @property
    def w_plus(self) -> np.ndarray:
        return np.concatenate(([1.0], self.v_plus))

    @property
    def w_minus(self) -> np.ndarray:
        return np.concatenate(([1.0], self.v_minus))


def _forward_diff(values: np.ndarray, axis: int, kind: str, scale: float) -> np.ndarray:
    out = np.empty_like(values)
    if kind == PERIODIC:
        out[...] = (np.roll(values, -1, axis=axis) - values) * scale
    else:
        lo = [slice(None)] * values.ndim
        hi = [slice(None)] * values.ndim
        lo[axis] = slice(0, -1)
        hi[axis] = slice(1, None)
        diff = (values[tuple(hi)] - values[tuple(lo)]) * scale
        last = [slice(None)] * values.ndim
        last[axis] = slice(-1, None)
        out[tuple(lo)] = diff
        out[tuple(last)] = 0.0
    return out


def gradient(field: SpaceTimeField) -> np.ndarray:
    """Space-time gradient (d/dt, grad_x) by forward differences.

    Returns an array of shape grid.full_shape + (d+1,); the outermost
    forward difference is zero on Neumann axes and wraps on periodic axes.
    """
    g = field.grid
    out = np.empty(g.full_shape + (g.d + 1,))
    for axis, (kind, scale) in enumerate(zip(g.boundary, g.axis_scales)):
        out[..., axis] = _forward_diff(field.values, axis, kind, scale)
    return out


def velocity_jacobian(vel: VelocityField) -> np.ndarray:
    """Forward-difference Jacobian of v, shape full_shape + (d, d+1)."""
    g = vel.grid
    out = np.empty(g.full_shape + (g.d, g.d + 1))
    for comp in range(g.d):
        for axis, (kind, scale) in enumerate(zip(g.boundary, g.axis_scales)):
            out[..., comp, axis] = _forward_diff(
                vel.values[..., comp], axis, kind, scale
            )
    return out


@dataclass(frozen=True)
class EnergyTerms:
    """Per-term breakdown of the discrete energy (already volume weighted)."""

    transport: float
    flow_tv: float
    intensity_tv: float
    fidelity: float = 0.0

    @property
    def total(self) -> float:
        return self.transport + self.flow_tv + self.intensity_tv + self.fidelity


def _check_pair(u: SpaceTimeField, v: VelocityField, w: Weights) -> None:
    if u.grid != v.grid:
        raise ValueError("intensity and velocity fields live on different grids")
    speed = v.max_speed()
    if speed > w.M + 1e-9:
        raise ValueError(f"velocity bound violated: max |v| = {speed:.6g} > M = {w.M:.6g}")


def energy(u: SpaceTimeField, v: VelocityField, w: Weights) -> EnergyTerms:
    """Discrete space-time energy of the pair (u, v).

    transport    alpha_F sum |du/dt + v . grad_x u| * vol
    flow_tv      alpha_v sum |Dv|_F * vol
    intensity_tv alpha_u sum |Du| * vol
    """
    _check_pair(u, v, w)
    g = u.grid
    vol = g.cell_volume
    du = gradient(u)
    residual = du[..., 0] + np.sum(v.values * du[..., 1:], axis=-1)
    dv = velocity_jacobian(v)
    transport = w.alpha_F * stable_sum(np.abs(residual)) * vol
    flow_tv = w.alpha_v * stable_sum(np.sqrt(np.sum(dv ** 2, axis=(-2, -1)))) * vol
    intensity_tv = w.alpha_u * stable_sum(np.sqrt(np.sum(du ** 2, axis=-1))) * vol
    return EnergyTerms(transport=transport, flow_tv=flow_tv, intensity_tv=intensity_tv)


def fidelity(u: SpaceTimeField, u0: SpaceTimeField, w: Weights) -> float:
    """Cell-volume weighted p-th power misfit ||u - u0||_p^p."""
    if u.grid != u0.grid:
        raise ValueError("fields live on different grids")
    w.check_fidelity_exponent(u.grid.d)
    diff = np.abs(u.values - u0.values)
    if w.p != 1.0:
        diff = diff ** w.p
    return stable_sum(diff) * u.grid.cell_volume


def full_objective(
    u: SpaceTimeField, v: VelocityField, u0: SpaceTimeField, w: Weights
) -> EnergyTerms:
    """Fidelity plus the space-time energy; .total is the full objective."""
    terms = energy(u, v, w)
    fid = fidelity(u, u0, w)
    return EnergyTerms(
        transport=terms.transport,
        flow_tv=terms.flow_tv,
        intensity_tv=terms.intensity_tv,
        fidelity=fid,
    )


def constant_velocity(grid: Grid, value) -> VelocityField:
    vals = np.zeros(grid.full_shape + (grid.d,))
    vals[...] = np.asarray(value, dtype=np.float64)
    return VelocityField(grid, vals)
