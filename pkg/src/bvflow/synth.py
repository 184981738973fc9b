"""Ground-truth synthetic space-time sequences: rigidly moving textured
shapes over a moving background, painter's-algorithm occlusion, analytic
edge normals, and seeded noise.

Velocities in a SceneSpec are given in cells per frame; generated fields
carry the corresponding physical velocity (cells/frame * dx / dt).
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import Grid, SpaceTimeField, VelocityField

_SHAPES = ("interval", "disk", "square")


@dataclass(frozen=True)
class Texture:
    """constant(c) | ramp(g . x + c) | sinusoid(c + A prod_i sin(k_i x_i))."""

    kind: str
    c: float = 0.0
    g: tuple = ()
    A: float = 0.0
    k: tuple = ()

    def sample(self, pts: np.ndarray) -> np.ndarray:
        if self.kind == "constant":
            return np.full(pts.shape[0], self.c)
        if self.kind == "ramp":
            return pts @ np.asarray(self.g) + self.c
        if self.kind == "sinusoid":
            out = np.full(pts.shape[0], self.A)
            for i, ki in enumerate(self.k):
                if ki != 0.0:
                    out = out * np.sin(ki * pts[:, i])
            return out + self.c
        raise ValueError(f"unknown texture kind {self.kind!r}")


@dataclass(frozen=True)
class ObjectSpec:
    shape: str
    center0: tuple
    size: float
    velocity: tuple  # cells per frame
    texture: Texture

    def __post_init__(self):
        if self.shape not in _SHAPES:
            raise ValueError(f"shape must be one of {_SHAPES}")
        if self.size <= 0:
            raise ValueError("size must be positive")

    def contains(self, pts: np.ndarray) -> np.ndarray:
        c = np.asarray(self.center0)
        if self.shape == "interval":
            return np.abs(pts[:, 0] - c[0]) <= 0.5 * self.size
        if self.shape == "disk":
            return np.sum((pts - c) ** 2, axis=1) <= self.size ** 2
        return np.max(np.abs(pts - c), axis=1) <= 0.5 * self.size

    def reach(self) -> float:
        if self.shape == "disk":
            return self.size
        return 0.5 * self.size * (math.sqrt(2.0) if self.shape == "square" else 1.0)


@dataclass(frozen=True)
class SceneSpec:
    grid: Grid
    objects: tuple  # frontmost first
    background: Texture
    background_velocity: tuple = None
    noise: tuple = ("none",)
    seed: int = 0
    M: float = 4.0
    allow_clipping: bool = False

    def __post_init__(self):
        if self.background_velocity is None:
            object.__setattr__(self, "background_velocity", (0.0,) * self.grid.d)
        for obj in self.objects:
            if len(obj.center0) != self.grid.d or len(obj.velocity) != self.grid.d:
                raise ValueError("object center/velocity dimension mismatch")
            if np.linalg.norm(obj.velocity) > self.M:
                raise ValueError(
                    f"object velocity {obj.velocity} exceeds the bound M = {self.M}"
                )
        if np.linalg.norm(self.background_velocity) > self.M:
            raise ValueError("background velocity exceeds the bound M")
        if self.noise[0] not in ("none", "gaussian", "salt_pepper"):
            raise ValueError(f"unknown noise kind {self.noise[0]!r}")
        if not self.allow_clipping:
            g = self.grid
            extent = np.asarray(g.shape) * g.dx
            tmax = (g.nt - 1) * g.dt
            for obj in self.objects:
                v_phys = np.asarray(obj.velocity) * g.dx / g.dt
                for t in (0.0, tmax):
                    c = np.asarray(obj.center0) + t * v_phys
                    if np.any(c - obj.reach() < 0.0) or np.any(c + obj.reach() > extent):
                        raise ValueError(
                            f"object leaves the domain at t = {t} (set allow_clipping)"
                        )


@dataclass(frozen=True)
class EdgeSample:
    frame: int
    position: np.ndarray
    n: np.ndarray
    object_id: int


def _phys_velocity(vel, grid: Grid) -> np.ndarray:
    return np.asarray(vel, dtype=np.float64) * grid.dx / grid.dt


def _visible_id(spec: SceneSpec, pts: np.ndarray, t: float) -> np.ndarray:
    """Index of the frontmost object at each point (-1 = background)."""
    out = np.full(pts.shape[0], -1, dtype=np.int64)
    undecided = np.ones(pts.shape[0], dtype=bool)
    for i, obj in enumerate(spec.objects):
        v = _phys_velocity(obj.velocity, spec.grid)
        inside = obj.contains(pts - t * v)
        take = undecided & inside
        out[take] = i
        undecided &= ~inside
        if not np.any(undecided):
            break
    return out


def _intensity(spec: SceneSpec, pts: np.ndarray, t: float) -> np.ndarray:
    ids = _visible_id(spec, pts, t)
    bg_v = _phys_velocity(spec.background_velocity, spec.grid)
    out = spec.background.sample(pts - t * bg_v)
    for i, obj in enumerate(spec.objects):
        mask = ids == i
        if np.any(mask):
            v = _phys_velocity(obj.velocity, spec.grid)
            out[mask] = obj.texture.sample(pts[mask] - t * v)
    return out


def _edge_normal(v_phys: np.ndarray, nu: np.ndarray) -> np.ndarray:
    speed = float(v_phys @ nu)
    n = np.concatenate(([-speed], nu))
    return n / np.linalg.norm(n)


def _boundary_samples(obj: ObjectSpec, grid: Grid):
    """(material point, outward spatial normal) samples along the boundary."""
    c = np.asarray(obj.center0, dtype=np.float64)
    if obj.shape == "interval":
        h = 0.5 * obj.size
        return [
            (c + np.array([-h]), np.array([-1.0])),
            (c + np.array([h]), np.array([1.0])),
        ]
    out = []
    if obj.shape == "disk":
        count = max(16, int(math.ceil(4.0 * math.pi * obj.size / grid.dx)))
        for k in range(count):
            th = 2.0 * math.pi * (k + 0.5) / count
            nu = np.array([math.cos(th), math.sin(th)])
            out.append((c + obj.size * nu, nu))
        return out
    h = 0.5 * obj.size
    per_side = max(4, int(math.ceil(2.0 * obj.size / grid.dx)))
    ticks = (np.arange(per_side) + 0.5) / per_side * obj.size - h
    for nu, along in (
        (np.array([1.0, 0.0]), np.array([0.0, 1.0])),
        (np.array([-1.0, 0.0]), np.array([0.0, 1.0])),
        (np.array([0.0, 1.0]), np.array([1.0, 0.0])),
        (np.array([0.0, -1.0]), np.array([1.0, 0.0])),
    ):
        for s in ticks:
            out.append((c + h * nu + s * along, nu))
    return out


def _cell_centers(grid: Grid) -> np.ndarray:
    axes = [(np.arange(s) + 0.5) * grid.dx for s in grid.shape]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


_SUB_OFFSETS = (np.arange(4) + 0.5) / 4.0 - 0.5


def generate(spec: SceneSpec):
    """Render the scene.

    Returns (u0, v_true, edges): the intensity sequence sampled at cell
    centers (4^d supersampling where a boundary crosses the cell), the
    per-node velocity of the visible entity, and the analytic edge list with
    space-time unit normals satisfying w_obj . n = 0.
    """
    grid = spec.grid
    pts = _cell_centers(grid)
    npts = pts.shape[0]
    u_vals = np.empty((grid.nt,) + grid.shape)
    v_vals = np.empty((grid.nt,) + grid.shape + (grid.d,))
    corner_offsets = np.stack(
        np.meshgrid(*[np.array([-0.5, 0.5]) * grid.dx] * grid.d, indexing="ij"),
        axis=-1,
    ).reshape(-1, grid.d)
    sub_axes = np.meshgrid(*[_SUB_OFFSETS * grid.dx] * grid.d, indexing="ij")
    sub_offsets = np.stack([m.ravel() for m in sub_axes], axis=1)

    bg_v = _phys_velocity(spec.background_velocity, grid)
    for it in range(grid.nt):
        t = it * grid.dt
        base = _intensity(spec, pts, t)
        ids = _visible_id(spec, pts, t)
        corner_ids = np.stack(
            [_visible_id(spec, pts + off, t) for off in corner_offsets]
        )
        mixed = np.any(corner_ids != corner_ids[0], axis=0)
        if np.any(mixed):
            mixed_pts = pts[mixed]
            acc = np.zeros(mixed_pts.shape[0])
            for off in sub_offsets:
                acc += _intensity(spec, mixed_pts + off, t)
            base[mixed] = acc / sub_offsets.shape[0]
        u_vals[it] = base.reshape(grid.shape)
        vel = np.tile(bg_v, (npts, 1))
        for i, obj in enumerate(spec.objects):
            mask = ids == i
            vel[mask] = _phys_velocity(obj.velocity, grid)
        v_vals[it] = vel.reshape(grid.shape + (grid.d,))

    edges = []
    extent = np.asarray(grid.shape) * grid.dx
    for it in range(grid.nt):
        t = it * grid.dt
        for i, obj in enumerate(spec.objects):
            v_phys = _phys_velocity(obj.velocity, grid)
            for mat_pt, nu in _boundary_samples(obj, grid):
                pos = mat_pt + t * v_phys
                if np.any(pos < 0.0) or np.any(pos >= extent):
                    continue
                covered = False
                for kfront in range(i):
                    front = spec.objects[kfront]
                    fv = _phys_velocity(front.velocity, grid)
                    if bool(front.contains((pos - t * fv)[None, :])[0]):
                        covered = True
                        break
                if not covered:
                    edges.append(
                        EdgeSample(it, pos.copy(), _edge_normal(v_phys, nu), i)
                    )

    if spec.noise[0] == "gaussian":
        rng = np.random.default_rng(spec.seed)
        u_vals = u_vals + rng.normal(0.0, spec.noise[1], size=u_vals.shape)
    elif spec.noise[0] == "salt_pepper":
        rng = np.random.default_rng(spec.seed)
        rho = spec.noise[1]
        mask = rng.random(u_vals.shape) < rho
        salt = rng.random(u_vals.shape) < 0.5
        lo, hi = float(np.min(u_vals)), float(np.max(u_vals))
        u_vals = np.where(mask, np.where(salt, hi, lo), u_vals)

    return (
        SpaceTimeField(grid, u_vals),
        VelocityField(grid, v_vals),
        edges,
    )


# ---------------------------------------------------------------------------
# scene configuration files


def _parse_texture(tokens):
    kind = tokens[0]
    vals = [float(x) for x in tokens[1:]]
    if kind == "constant":
        return Texture("constant", c=vals[0])
    if kind == "ramp":
        # g components then offset
        return Texture("ramp", g=tuple(vals[:-1]), c=vals[-1])
    if kind == "sinusoid":
        # amplitude, wave numbers..., offset
        return Texture("sinusoid", A=vals[0], k=tuple(vals[1:-1]), c=vals[-1])
    raise ValueError(f"unknown texture {kind!r}")


def parse_scene(text: str) -> SceneSpec:
    """Parse the key/value scene format (one [object] block per object)."""
    globals_kv = {}
    objects = []
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line == "[object]":
            current = {}
            objects.append(current)
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        (current if current is not None else globals_kv)[key] = (val, lineno)

    def need(kv, key, where):
        if key not in kv:
            raise ValueError(f"missing key {key!r} in {where}")
        return kv[key][0]

    try:
        d = int(need(globals_kv, "d", "scene"))
        nt = int(need(globals_kv, "nt", "scene"))
        if d == 1:
            shape = (int(need(globals_kv, "nx", "scene")),)
        else:
            shape = (
                int(need(globals_kv, "nx", "scene")),
                int(need(globals_kv, "ny", "scene")),
            )
        dt = float(globals_kv.get("dt", ("1.0", 0))[0])
        dx = float(globals_kv.get("dx", ("1.0", 0))[0])
        boundary = globals_kv.get("boundary", ("neumann", 0))[0]
        grid = Grid(d, nt, shape, dt, dx, (boundary,) * (d + 1))
        objs = []
        for idx, kv in enumerate(objects):
            where = f"object {idx}"
            objs.append(
                ObjectSpec(
                    shape=need(kv, "shape", where),
                    center0=tuple(float(x) for x in need(kv, "center0", where).split()),
                    size=float(need(kv, "size", where)),
                    velocity=tuple(
                        float(x) for x in need(kv, "velocity", where).split()
                    ),
                    texture=_parse_texture(need(kv, "texture", where).split()),
                )
            )
        noise_tokens = globals_kv.get("noise", ("none", 0))[0].split()
        if noise_tokens[0] == "none":
            noise = ("none",)
        else:
            noise = (noise_tokens[0], float(noise_tokens[1]))
        return SceneSpec(
            grid=grid,
            objects=tuple(objs),
            background=_parse_texture(
                globals_kv.get("background_texture", ("constant 0.0", 0))[0].split()
            ),
            background_velocity=tuple(
                float(x)
                for x in globals_kv.get(
                    "background_velocity", (" ".join(["0.0"] * d), 0)
                )[0].split()
            ),
            noise=noise,
            seed=int(globals_kv.get("seed", ("0", 0))[0]),
            M=float(globals_kv.get("M", ("4.0", 0))[0]),
            allow_clipping=globals_kv.get("allow_clipping", ("0", 0))[0]
            in ("1", "true", "yes"),
        )
    except ValueError:
        raise
    except Exception as exc:  # malformed numbers etc.
        raise ValueError(f"invalid scene file: {exc}") from exc


def load_scene(path) -> SceneSpec:
    with open(path) as fh:
        return parse_scene(fh.read())


def write_edge_list(path, edges) -> None:
    """Edge list as text: frame, position components, n components, id."""
    with open(path, "w") as fh:
        fh.write("# frame position... n... object_id\n")
        for e in edges:
            pos = " ".join(f"{x:.9g}" for x in e.position)
            nvec = " ".join(f"{x:.12g}" for x in e.n)
            fh.write(f"{e.frame} {pos} {nvec} {e.object_id}\n")
