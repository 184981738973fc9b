"""Alternating convex minimization of the full space-time objective.

At fixed v the objective is convex in u (fidelity + TV + transport) and at
fixed u it is convex in v (TV + weighted L1 with a ball constraint), so the
solver alternates two first-order primal-dual subproblems.  Outer iterations
are accepted only if the total energy does not increase.
"""

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import (
    Grid,
    JumpDatum,
    PERIODIC,
    SpaceTimeField,
    VelocityField,
    Weights,
    full_objective,
    gradient,
    stable_sum,
)
from . import jump as jump_mod


@dataclass(frozen=True)
class SolverConfig:
    outer_iters: int = 30
    inner_iters: int = 300
    pd_step_ratio: float = 1.0
    tol_energy: float = 1e-5
    pyramid_levels: int = 1

    def __post_init__(self):
        if self.outer_iters < 1 or self.inner_iters < 1 or self.pyramid_levels < 1:
            raise ValueError("iteration and level counts must be positive")
        if self.pd_step_ratio <= 0 or self.tol_energy <= 0:
            raise ValueError("step ratio and tolerance must be positive")


@dataclass
class SolveReport:
    """One row per outer iteration: the four energy terms, total, accepted."""

    rows: list = field(default_factory=list)
    converged: bool = False
    aborted: bool = False
    wall_time: float = 0.0

    def add(self, index, terms, accepted):
        self.rows.append(
            (
                index,
                terms.fidelity,
                terms.transport,
                terms.flow_tv,
                terms.intensity_tv,
                terms.total,
                accepted,
            )
        )

    def totals(self):
        return [r[5] for r in self.rows if r[6]]

    def to_text(self) -> str:
        lines = ["iter fidelity transport flow_tv intensity_tv total accepted"]
        for r in self.rows:
            lines.append(
                f"{r[0]} {r[1]:.9g} {r[2]:.9g} {r[3]:.9g} {r[4]:.9g} {r[5]:.9g} {int(r[6])}"
            )
        lines.append(f"converged {int(self.converged)}")
        lines.append(f"aborted {int(self.aborted)}")
        lines.append(f"wall_time {self.wall_time:.3f}")
        return "\n".join(lines)


@dataclass(frozen=True)
class SolveResult:
    u: SpaceTimeField
    v: VelocityField
    report: SolveReport


# ---------------------------------------------------------------------------
# difference operators on the solver grid


def _fdiff(values, axis, kind, scale):
    if kind == PERIODIC:
        return (np.roll(values, -1, axis=axis) - values) * scale
    out = np.empty_like(values)
    lo = [slice(None)] * values.ndim
    hi = [slice(None)] * values.ndim
    lo[axis] = slice(0, -1)
    hi[axis] = slice(1, None)
    out[tuple(lo)] = (values[tuple(hi)] - values[tuple(lo)]) * scale
    last = [slice(None)] * values.ndim
    last[axis] = slice(-1, None)
    out[tuple(last)] = 0.0
    return out


def _fdiff_adjoint(dual, axis, kind, scale):
    if kind == PERIODIC:
        return (np.roll(dual, 1, axis=axis) - dual) * scale
    out = np.empty_like(dual)
    n = dual.shape[axis]
    idx = lambda s: tuple(s if a == axis else slice(None) for a in range(dual.ndim))
    out[idx(slice(1, n - 1))] = dual[idx(slice(0, n - 2))] - dual[idx(slice(1, n - 1))]
    out[idx(slice(0, 1))] = -dual[idx(slice(0, 1))]
    out[idx(slice(n - 1, n))] = dual[idx(slice(n - 2, n - 1))]
    return out * scale


def _grad(values, grid: Grid):
    out = np.empty(values.shape + (grid.d + 1,))
    for axis, (kind, scale) in enumerate(zip(grid.boundary, grid.axis_scales)):
        out[..., axis] = _fdiff(values, axis, kind, scale)
    return out


def _grad_adjoint(p, grid: Grid):
    out = np.zeros(p.shape[:-1])
    for axis, (kind, scale) in enumerate(zip(grid.boundary, grid.axis_scales)):
        out += _fdiff_adjoint(p[..., axis], axis, kind, scale)
    return out


def _grad_norm(grid: Grid) -> float:
    rng = np.random.default_rng(0)
    x = rng.standard_normal(grid.full_shape)
    x /= np.linalg.norm(x)
    lam = 1.0
    for _ in range(50):
        y = _grad_adjoint(_grad(x, grid), grid)
        nrm = np.linalg.norm(y)
        if nrm == 0.0:
            break
        lam = math.sqrt(nrm)
        x = y / nrm
    return lam


def _project_ball(vec, radius):
    nrm = np.sqrt(np.sum(vec ** 2, axis=-1, keepdims=True))
    return vec * (radius / np.maximum(nrm, radius))


def _project_ball2(mat, radius):
    nrm = np.sqrt(np.sum(mat ** 2, axis=(-2, -1), keepdims=True))
    return mat * (radius / np.maximum(nrm, radius))


def _fidelity_prox(values, data, tau, p):
    if p == 1.0:
        diff = values - data
        return data + np.sign(diff) * np.maximum(np.abs(diff) - tau, 0.0)
    # pointwise Newton for min_x |x - u0|^p + (x - z)^2 / (2 tau)
    x = values.copy()
    for _ in range(25):
        diff = x - data
        mag = np.abs(diff)
        grad_fid = p * np.sign(diff) * np.maximum(mag, 1e-30) ** (p - 1.0)
        grad = grad_fid + (x - values) / tau
        hess = p * (p - 1.0) * np.maximum(mag, 1e-12) ** (p - 2.0) + 1.0 / tau
        x = x - grad / hess
    return x


class _USubproblem:
    """min_u ||u - u0||_p^p + alpha_u TV(u) + alpha_F sum|w . grad u|."""

    def __init__(self, grid, w, grad_norm):
        self.grid, self.w = grid, w
        self.grad_norm = grad_norm
        self.xi = np.zeros(grid.full_shape + (grid.d + 1,))
        self.q = np.zeros(grid.full_shape)

    def objective(self, u, u0, rows):
        du = _grad(u, self.grid)
        diff = np.abs(u - u0)
        if self.w.p != 1.0:
            diff = diff ** self.w.p
        return (
            stable_sum(diff)
            + self.w.alpha_u * stable_sum(np.sqrt(np.sum(du ** 2, axis=-1)))
            + self.w.alpha_F * stable_sum(np.abs(np.sum(du * rows, axis=-1)))
        )

    def run(self, u, u0, v, iters, tol, step_ratio):
        grid, w = self.grid, self.w
        rows = np.concatenate([np.ones(v.shape[:-1] + (1,)), v], axis=-1)
        wmax = math.sqrt(float(np.max(np.sum(rows ** 2, axis=-1))))
        L = self.grad_norm * math.sqrt(1.0 + wmax ** 2) + 1e-12
        sigma = step_ratio / L
        tau = 1.0 / (step_ratio * L)
        xi, q = self.xi, self.q
        ubar = u.copy()
        best_u = u.copy()
        best_obj = self.objective(u, u0, rows)
        prev_obj = best_obj
        for it in range(iters):
            g = _grad(ubar, grid)
            xi += sigma * g
            xi[:] = _project_ball(xi, w.alpha_u)
            q += sigma * np.sum(g * rows, axis=-1)
            np.clip(q, -w.alpha_F, w.alpha_F, out=q)
            u_old = u.copy()
            u -= tau * _grad_adjoint(xi + q[..., None] * rows, grid)
            u[:] = _fidelity_prox(u, u0, tau, w.p)
            ubar = 2.0 * u - u_old
            if (it + 1) % 25 == 0 or it == iters - 1:
                obj = self.objective(u, u0, rows)
                if obj < best_obj:
                    best_obj = obj
                    best_u = u.copy()
                if abs(prev_obj - obj) <= tol * max(1.0, abs(obj)):
                    break
                prev_obj = obj
        return best_u, best_obj


class _VSubproblem:
    """min_v alpha_v TV(v) + alpha_F sum|a + b . v|, |v| <= M pointwise."""

    def __init__(self, grid, w, grad_norm):
        self.grid, self.w = grid, w
        self.grad_norm = grad_norm
        self.xi = np.zeros(grid.full_shape + (grid.d, grid.d + 1))
        self.q = np.zeros(grid.full_shape)

    def objective(self, v, a, b):
        dv = np.empty(v.shape + (self.grid.d + 1,))
        for k in range(self.grid.d):
            dv[..., k, :] = _grad(v[..., k], self.grid)
        return self.w.alpha_v * stable_sum(
            np.sqrt(np.sum(dv ** 2, axis=(-2, -1)))
        ) + self.w.alpha_F * stable_sum(np.abs(a + np.sum(b * v, axis=-1)))

    def run(self, v, u, iters, tol, step_ratio):
        grid, w = self.grid, self.w
        du = _grad(u, grid)
        a = du[..., 0]
        b = du[..., 1:]
        bmax = math.sqrt(float(np.max(np.sum(b ** 2, axis=-1))))
        L = math.sqrt(self.grad_norm ** 2 + bmax ** 2) + 1e-12
        sigma = step_ratio / L
        tau = 1.0 / (step_ratio * L)
        xi, q = self.xi, self.q
        vbar = v.copy()
        best_v = v.copy()
        best_obj = self.objective(v, a, b)
        prev_obj = best_obj
        for it in range(iters):
            for k in range(grid.d):
                xi[..., k, :] += sigma * _grad(vbar[..., k], grid)
            xi[:] = _project_ball2(xi, w.alpha_v)
            q += sigma * (a + np.sum(b * vbar, axis=-1))
            np.clip(q, -w.alpha_F, w.alpha_F, out=q)
            v_old = v.copy()
            for k in range(grid.d):
                v[..., k] -= tau * _grad_adjoint(xi[..., k, :], grid)
            v -= tau * q[..., None] * b
            v[:] = _project_ball(v, w.M)
            vbar = 2.0 * v - v_old
            if (it + 1) % 25 == 0 or it == iters - 1:
                obj = self.objective(v, a, b)
                if obj < best_obj:
                    best_obj = obj
                    best_v = v.copy()
                if abs(prev_obj - obj) <= tol * max(1.0, abs(obj)):
                    break
                prev_obj = obj
        return best_v, best_obj


# ---------------------------------------------------------------------------
# pyramid helpers


def _downsample(field: SpaceTimeField) -> SpaceTimeField:
    g = field.grid
    vals = field.values
    slices = [slice(None)]
    shape = []
    for s in g.shape:
        shape.append(s // 2)
    out = vals
    for axis, s in enumerate(shape, start=1):
        take = [slice(None)] * out.ndim
        take[axis] = slice(0, 2 * s)
        out = out[tuple(take)]
        a = [slice(None)] * out.ndim
        b = [slice(None)] * out.ndim
        a[axis] = slice(0, None, 2)
        b[axis] = slice(1, None, 2)
        out = 0.5 * (out[tuple(a)] + out[tuple(b)])
    grid = Grid(g.d, g.nt, tuple(shape), g.dt, g.dx * 2.0, g.boundary)
    return SpaceTimeField(grid, out)


def _upsample_velocity(v: np.ndarray, coarse: Grid, fine: Grid) -> np.ndarray:
    out = v
    for axis in range(1, coarse.d + 1):
        out = np.repeat(out, 2, axis=axis)
        want = fine.full_shape[axis]
        if out.shape[axis] > want:
            take = [slice(None)] * out.ndim
            take[axis] = slice(0, want)
            out = out[tuple(take)]
        elif out.shape[axis] < want:
            pad = [(0, 0)] * out.ndim
            pad[axis] = (0, want - out.shape[axis])
            out = np.pad(out, pad, mode="edge")
    return out


def solve(u0: SpaceTimeField, cfg: SolverConfig, w: Weights) -> SolveResult:
    """Jointly restore the sequence and estimate the motion field.

    Returns the restored intensity, the velocity field (|v| <= M pointwise)
    and a report with per-iteration energies; the accepted total energies are
    non-increasing by construction.
    """
    if not np.all(np.isfinite(u0.values)):
        raise ValueError("input sequence contains non-finite values")
    w.check_fidelity_exponent(u0.grid.d)

    levels = [u0]
    for _ in range(cfg.pyramid_levels - 1):
        nxt = levels[-1]
        if min(nxt.grid.shape) < 8:
            break
        levels.append(_downsample(nxt))

    t_start = time.time()
    v_vals: Optional[np.ndarray] = None
    report = SolveReport()
    u_field = None
    v_field = None
    for level in reversed(range(len(levels))):
        u0_l = levels[level]
        grid = u0_l.grid
        if v_vals is None:
            v_vals = np.zeros(grid.full_shape + (grid.d,))
        else:
            v_vals = _upsample_velocity(v_vals, levels[level + 1].grid, grid)
            v_vals = _project_ball(v_vals, w.M)
        u_vals = u0_l.values.copy()
        report = _solve_level(u_vals, v_vals, u0_l, cfg, w)
        u_field = SpaceTimeField(grid, u_vals)
        v_field = VelocityField(grid, v_vals)
    report.wall_time = time.time() - t_start
    return SolveResult(u_field, v_field, report)


def _solve_level(u_vals, v_vals, u0: SpaceTimeField, cfg: SolverConfig, w: Weights) -> SolveReport:
    grid = u0.grid
    gnorm = _grad_norm(grid)
    usub = _USubproblem(grid, w, gnorm)
    vsub = _VSubproblem(grid, w, gnorm)
    report = SolveReport()

    def evaluate(u, v):
        return full_objective(
            SpaceTimeField(grid, u), VelocityField(grid, v), u0, w
        )

    terms = evaluate(u_vals, v_vals)
    total = terms.total
    report.add(0, terms, True)
    inner_tol = cfg.tol_energy * 0.1
    for outer in range(1, cfg.outer_iters + 1):
        u_prev = u_vals.copy()
        v_prev = v_vals.copy()
        attempts = 0
        while True:
            v_new, _ = vsub.run(
                v_vals.copy(), u_vals, cfg.inner_iters, inner_tol, cfg.pd_step_ratio
            )
            u_new, _ = usub.run(
                u_vals.copy(), u0.values, v_new, cfg.inner_iters, inner_tol, cfg.pd_step_ratio
            )
            terms_new = evaluate(u_new, v_new)
            if not math.isfinite(terms_new.total) or terms_new.total > 10.0 * max(
                total, 1e-12
            ):
                report.aborted = True
                report.add(outer, terms_new, False)
                u_vals[:], v_vals[:] = u_prev, v_prev
                return report
            if terms_new.total <= total:
                break
            attempts += 1
            if attempts > 1:
                break
            inner_tol *= 0.1  # tighten once and retry the step
        if terms_new.total > total:
            # keep the previous iterate and stop
            u_vals[:], v_vals[:] = u_prev, v_prev
            report.add(outer, terms_new, False)
            report.converged = True
            break
        u_vals[:], v_vals[:] = u_new, v_new
        report.add(outer, terms_new, True)
        if abs(total - terms_new.total) <= cfg.tol_energy * max(1.0, abs(total)):
            total = terms_new.total
            report.converged = True
            break
        total = terms_new.total
    return report


# ---------------------------------------------------------------------------
# a-posteriori jump analysis


def estimate_jump_data(
    u: SpaceTimeField, v: VelocityField, site, n, radius: int
) -> JumpDatum:
    """One-sided half-ball averages of u and v around a node.

    The hyperplane through ``site`` with space-time normal ``n`` splits the
    ball of the given radius (in cells); nodes on the plane are skipped.
    """
    if radius < 1:
        raise ValueError("radius must be at least one cell")
    grid = u.grid
    n = np.asarray(n, dtype=np.float64)
    n = n / np.linalg.norm(n)
    site = np.asarray([int(s) for s in site])
    shape = np.asarray(grid.full_shape)
    if np.any(site < 0) or np.any(site >= shape):
        raise ValueError("site outside the grid")
    axes = [np.arange(-radius, radius + 1)] * (grid.d + 1)
    offs = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, grid.d + 1)
    offs = offs[np.sum(offs ** 2, axis=1) <= radius * radius]
    scales = np.concatenate(([grid.dt], [grid.dx] * grid.d))
    sides = (offs * scales) @ n
    nodes = site[None, :] + offs
    valid = np.all((nodes >= 0) & (nodes < shape[None, :]), axis=1)
    plus = nodes[valid & (sides > 0)]
    minus = nodes[valid & (sides < 0)]
    if plus.size == 0 or minus.size == 0:
        raise ValueError("half-ball empty: site too near the boundary")
    pidx = tuple(plus.T)
    midx = tuple(minus.T)
    u_plus = float(np.mean(u.values[pidx]))
    u_minus = float(np.mean(u.values[midx]))
    v_plus = np.mean(v.values[pidx], axis=0)
    v_minus = np.mean(v.values[midx], axis=0)
    return JumpDatum(u_plus, u_minus, v_plus, v_minus, n)


def aposteriori_scan(
    u: SpaceTimeField,
    v: VelocityField,
    w: Weights,
    edge_threshold: float,
    radius: int = 3,
    consistent_tol: float = 0.05,
    max_sites: Optional[int] = None,
):
    """Classify the jump datum at every strong edge node.

    Edges are nodes where |grad u| exceeds edge_threshold times the 95th
    percentile of |grad u|; the edge normal is the normalized space-time
    gradient.  Returns a list of (site, JumpDatum, JumpBracket).
    """
    grid = u.grid
    g = gradient(u)
    mag = np.sqrt(np.sum(g ** 2, axis=-1))
    ref = float(np.percentile(mag, 95.0))
    threshold = edge_threshold * ref
    sites = np.argwhere(mag > threshold)
    results = []
    for site in sites:
        site_t = tuple(int(x) for x in site)
        if any(
            site_t[a] < radius or site_t[a] >= grid.full_shape[a] - radius
            for a in range(grid.d + 1)
        ):
            continue
        nvec = g[site_t] / mag[site_t]
        try:
            datum = estimate_jump_data(u, v, site_t, nvec, radius)
        except ValueError:
            continue
        bracket = jump_mod.classify(datum, w, consistent_tol=consistent_tol)
        results.append((site_t, datum, bracket))
        if max_sites is not None and len(results) >= max_sites:
            break
    return results
