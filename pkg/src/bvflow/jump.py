"""Jump energies at a moving edge: closed forms, bounds and regimes.

The per-area cost of a joint (u, v) jump with space-time normal n is defined
by a microscopic cell problem.  It is known exactly when the interface motion
is consistent with one of the one-sided velocities, and in a "simple slip"
regime where the optimal microscopic profile is planar.  Outside those
regimes this module brackets the cost between a zig-zag (two-normal) /
laminate upper bound and convex lower bounds, and can certify that a
laminated microstructure strictly beats every planar profile.

Sign conventions: n points towards the plus side, component 0 is temporal,
w = (1, v) is the space-time velocity.
"""

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import JumpDatum, Weights
from .search import (
    golden_min,
    pattern_search,
    pattern_search_scalar,
    refine_candidates,
    refine_scalar,
)

_NSUM_TOL = 1e-10  # laminate normals must sum to n this tightly


class Regime(enum.Enum):
    CONSISTENT = "Consistent"
    SIMPLE_SLIP = "SimpleSlip"
    MICROSTRUCTURE = "MicrostructureCertified"
    UNDETERMINED = "Undetermined"


@dataclass(frozen=True)
class Laminate:
    """Weighted interface normals with attached velocities.

    ``pieces`` is a tuple of (N, v) pairs; the N are (d+1)-vectors summing to
    the macroscopic normal, each v is the velocity carried on that facet set.
    """

    pieces: tuple

    def __post_init__(self):
        pieces = tuple(
            (np.asarray(N, dtype=np.float64), np.atleast_1d(np.asarray(v, dtype=np.float64)))
            for N, v in self.pieces
        )
        if not pieces:
            raise ValueError("laminate needs at least one piece")
        object.__setattr__(self, "pieces", pieces)

    def normal_sum(self) -> np.ndarray:
        return np.sum([N for N, _ in self.pieces], axis=0)


@dataclass(frozen=True)
class Certificate:
    """Evidence that a laminate strictly beats the best simple profile."""

    direction: np.ndarray
    delta: float
    gap: float
    upper_value: float
    gain: float


@dataclass(frozen=True)
class JumpBracket:
    """Lower/upper bounds, best simple-profile energy and the regime label."""

    lower: float
    upper: float
    simple: float
    regime: Regime
    value: Optional[float] = None
    certificate: Optional[Certificate] = None

    def __post_init__(self):
        if self.lower > self.upper + 1e-9:
            raise ValueError("bracket inverted: lower > upper")
        if self.simple < self.lower - 1e-9:
            raise ValueError("simple-profile energy below the lower bound")
        if self.regime is Regime.MICROSTRUCTURE:
            cert = self.certificate
            if cert is None or not (self.upper <= self.simple - cert.gap + 1e-9):
                raise ValueError("microstructure regime requires a certified gap")


# ---------------------------------------------------------------------------
# basic quantities and orientation normalization


def _norm(x) -> float:
    return float(np.linalg.norm(x))


def signed_normal_speeds(j: JumpDatum):
    """(w- . n, w+ . n): signed normal speeds of the two sides."""
    return float(j.w_minus @ j.n), float(j.w_plus @ j.n)


def _swap_sides(j: JumpDatum) -> JumpDatum:
    return JumpDatum(j.u_minus, j.u_plus, j.v_minus, j.v_plus, j.n)


def _negate_normal(j: JumpDatum) -> JumpDatum:
    return JumpDatum(j.u_plus, j.u_minus, j.v_plus, j.v_minus, -j.n)


_VARIANTS = ("identity", "swap", "negate", "swapnegate")


def canonicalize(j: JumpDatum):
    """Normalize a datum with the invariances of the jump energy.

    Returns (datum, variant) where the datum has u- = 0, u+ = |[u]| and
    normal speeds ordered so that w+ . n >= |w- . n|.  In particular
    same-sign data end up with 0 <= w- . n <= w+ . n.
    """
    sm, sp = signed_normal_speeds(j)
    pairs = {
        "identity": (sm, sp),
        "swap": (sp, sm),
        "negate": (-sm, -sp),
        "swapnegate": (-sp, -sm),
    }
    variant = "identity"
    for name in _VARIANTS:
        a, b = pairs[name]
        if b >= a and b >= -a:
            variant = name
            break
    out = j
    if variant in ("swap", "swapnegate"):
        out = _swap_sides(out)
    if variant in ("negate", "swapnegate"):
        out = _negate_normal(out)
    out = JumpDatum(abs(out.jump_u), 0.0, out.v_plus, out.v_minus, out.n)
    return out, variant


def _map_back_two_normal(n_plus: np.ndarray, n_orig: np.ndarray, variant: str) -> np.ndarray:
    if variant == "identity":
        return n_plus
    if variant == "swap":
        return n_orig - n_plus
    if variant == "negate":
        return -n_plus
    return n_orig + n_plus  # swapnegate


def _map_back_laminate(lam: Laminate, variant: str) -> Laminate:
    if variant in ("negate", "swapnegate"):
        return Laminate(tuple((-N, v) for N, v in lam.pieces))
    return lam


def transport_cost_ratio(j: JumpDatum, w: Weights) -> float:
    """Relative weight of the transport penalty at this jump,
    alpha_F |[u]| / (alpha_u |[u]| + alpha_v |[v]|)."""
    ju = abs(j.jump_u)
    jv = _norm(j.jump_v)
    if ju == 0.0 and jv == 0.0:
        raise ValueError("degenerate jump: [u] = [v] = 0")
    return w.alpha_F * ju / (w.alpha_u * ju + w.alpha_v * jv)


def consistent_jump_energy(j: JumpDatum, w: Weights) -> float:
    """Exact jump energy when (w+ . n)(w- . n) <= 0 (or nothing jumps)."""
    if j.jump_u == 0.0 and _norm(j.jump_v) == 0.0:
        return 0.0
    sm, sp = signed_normal_speeds(j)
    if sm * sp > 0.0:
        raise ValueError("not in consistent regime: (w+ . n)(w- . n) > 0")
    return w.alpha_u * abs(j.jump_u) + w.alpha_v * _norm(j.jump_v)


# ---------------------------------------------------------------------------
# best simple (planar) profile


def _simple_min_1d(ju, vp, vm, n0, n1, w):
    # piecewise linear in a: the minimum sits on a kink
    c = w.alpha_F * ju
    cands = [vm, vp]
    if n1 != 0.0:
        cands.append(-n0 / n1)
    best_a = vm
    best = math.inf
    for a in cands:
        val = w.alpha_v * (abs(vp - a) + abs(vm - a)) + c * abs(n0 + a * n1)
        if val < best:
            best, best_a = val, a
    return best, np.array([best_a])


def _simple_value_1d(vp, vm, n0, n1, av, c):
    # candidate a = v-; a = v+; the transport kink -n0/n1
    jv = abs(vp - vm)
    best = av * jv + c * abs(n0 + vm * n1)
    alt = av * jv + c * abs(n0 + vp * n1)
    if alt < best:
        best = alt
    if n1 != 0.0:
        a = -n0 / n1
        alt = av * (abs(vp - a) + abs(vm - a))
        if alt < best:
            best = alt
    return best


def _simple_value_2d(vp0, vp1, vm0, vm1, n0, n1, n2, av, c):
    jvn = math.hypot(vp0 - vm0, vp1 - vm1)
    sm = n0 + vm0 * n1 + vm1 * n2
    sp = n0 + vp0 * n1 + vp1 * n2
    best = av * jvn + c * abs(sm)  # a = v-
    alt = av * jvn + c * abs(sp)  # a = v+
    if alt < best:
        best = alt
    if sp != sm:
        t = -sm / (sp - sm)
        if 0.0 <= t <= 1.0 and av * jvn < best:
            best = av * jvn  # transport-free crossing on the segment
    nn = n1 * n1 + n2 * n2
    if nn > 0.0 and sm * sp > 0.0:
        f = 2.0 * sp / nn
        r0, r1 = vp0 - f * n1, vp1 - f * n2  # v+ mirrored across the zero plane
        den = (r0 - vm0) * n1 + (r1 - vm1) * n2
        if den != 0.0:
            s = -sm / den
            if 0.0 <= s <= 1.0:
                a0, a1 = vm0 + s * (r0 - vm0), vm1 + s * (r1 - vm1)
                alt = av * (math.hypot(vp0 - a0, vp1 - a1) + math.hypot(vm0 - a0, vm1 - a1))
                if alt < best:
                    best = alt
    return best


def _simple_min(ju, v_plus, v_minus, n, w, polish: bool):
    """min over a of alpha_v(|v+ - a| + |v- - a|) + alpha_F |[u]| |n.(1,a)|."""
    if v_plus.size == 1:
        return _simple_min_1d(ju, float(v_plus[0]), float(v_minus[0]), float(n[0]), float(n[1]), w)
    c = w.alpha_F * ju
    av = w.alpha_v
    n0, n1, n2 = float(n[0]), float(n[1]), float(n[2])
    vp0, vp1 = float(v_plus[0]), float(v_plus[1])
    vm0, vm1 = float(v_minus[0]), float(v_minus[1])

    def phi(a):
        a0, a1 = a
        return av * (math.hypot(vp0 - a0, vp1 - a1) + math.hypot(vm0 - a0, vm1 - a1)) + c * abs(
            n0 + a0 * n1 + a1 * n2
        )

    cands = [(vm0, vm1), (vp0, vp1)]
    sm = n0 + vm0 * n1 + vm1 * n2
    sp = n0 + vp0 * n1 + vp1 * n2
    if sp != sm:
        t = -sm / (sp - sm)
        if 0.0 <= t <= 1.0:
            cands.append((vm0 + t * (vp0 - vm0), vm1 + t * (vp1 - vm1)))
    nn = n1 * n1 + n2 * n2
    if nn > 0.0 and sm * sp > 0.0:
        # mirror v+ across the plane n.(1,a) = 0; the reflected segment hits it
        f = 2.0 * sp / nn
        r0, r1 = vp0 - f * n1, vp1 - f * n2
        den = (r0 - vm0) * n1 + (r1 - vm1) * n2
        if den != 0.0:
            s = -sm / den
            if 0.0 <= s <= 1.0:
                cands.append((vm0 + s * (r0 - vm0), vm1 + s * (r1 - vm1)))
    if not polish:
        fx, x = min((phi(a), a) for a in cands)
        return fx, np.array(x)
    scale = 0.25 * (1.0 + math.hypot(vp0 - vm0, vp1 - vm1))
    fx, x = min((phi(a), a) for a in cands)
    # a few subgradient steps to escape a bad candidate basin
    for k in range(60):
        g0 = g1 = 0.0
        r0, r1 = x[0] - vp0, x[1] - vp1
        rn = math.hypot(r0, r1)
        if rn > 1e-14:
            g0 += av * r0 / rn
            g1 += av * r1 / rn
        r0, r1 = x[0] - vm0, x[1] - vm1
        rn = math.hypot(r0, r1)
        if rn > 1e-14:
            g0 += av * r0 / rn
            g1 += av * r1 / rn
        t = n0 + x[0] * n1 + x[1] * n2
        if t != 0.0:
            cs = c if t > 0 else -c
            g0 += cs * n1
            g1 += cs * n2
        gn = math.hypot(g0, g1)
        if gn < 1e-14:
            break
        step = scale / ((k + 2.0) * gn)
        cand = (x[0] - step * g0, x[1] - step * g1)
        fc = phi(cand)
        if fc < fx:
            x, fx = cand, fc
    x, fx = refine_scalar(phi, cands + [x], step=scale, step_min=1e-10)
    return fx, np.array(x)


def simple_profile_energy(j: JumpDatum, w: Weights):
    """Energy of the best planar microscopic profile and its velocity.

    Minimizes alpha_u |[u]| + alpha_v(|v+ - a| + |v- - a|)
    + alpha_F |[u]| |n.(1,a)| over the interface velocity a.
    """
    ju = abs(j.jump_u)
    val, a = _simple_min(ju, j.v_plus, j.v_minus, j.n, w, polish=True)
    return w.alpha_u * ju + val, a


# ---------------------------------------------------------------------------
# two-normal (zig-zag) bounds, d = 1


def _require_two_normal(j: JumpDatum, w: Weights) -> None:
    if j.d != 1:
        raise ValueError("two-normal bounds are established for d = 1 only")
    if abs(j.jump_u) > 2.0 * w.alpha_v / w.alpha_F + 1e-12:
        raise ValueError(
            "hypothesis |[u]| <= 2 alpha_v / alpha_F violated; bound not established"
        )


def two_normal_upper_bound(j: JumpDatum, w: Weights, n_plus) -> float:
    """Upper bound from a zig-zag interface with facet normals N+ and n - N+."""
    _require_two_normal(j, w)
    N_plus = np.asarray(n_plus, dtype=np.float64)
    N_minus = j.n - N_plus
    s = w.alpha_u * abs(j.jump_u) + w.alpha_v * _norm(j.jump_v)
    c = w.alpha_F * abs(j.jump_u)
    return s * (_norm(N_plus) + _norm(N_minus)) + c * (
        abs(float(N_plus @ j.w_plus)) + abs(float(N_minus @ j.w_minus))
    )


def _two_normal_lower_value(j: JumpDatum, w: Weights, pts: np.ndarray) -> np.ndarray:
    s = w.alpha_u * abs(j.jump_u) + w.alpha_v * _norm(j.jump_v)
    c = w.alpha_F * abs(j.jump_u)
    Nm = j.n[None, :] - pts
    return s * (np.linalg.norm(pts, axis=1) + np.linalg.norm(Nm, axis=1)) + c * np.abs(
        pts @ j.w_plus + Nm @ j.w_minus
    )


def _two_normal_upper_value(j: JumpDatum, w: Weights, pts: np.ndarray) -> np.ndarray:
    s = w.alpha_u * abs(j.jump_u) + w.alpha_v * _norm(j.jump_v)
    c = w.alpha_F * abs(j.jump_u)
    Nm = j.n[None, :] - pts
    return s * (np.linalg.norm(pts, axis=1) + np.linalg.norm(Nm, axis=1)) + c * (
        np.abs(pts @ j.w_plus) + np.abs(Nm @ j.w_minus)
    )


def _search_box_radius(j: JumpDatum, w: Weights) -> float:
    ju = abs(j.jump_u)
    jv = _norm(j.jump_v)
    s = w.alpha_u * ju + w.alpha_v * jv
    if s == 0.0:
        return 2.0
    sm, sp = signed_normal_speeds(j)
    zeta = w.alpha_F * ju / s
    return min(8.0, max(2.0, 1.0 + zeta * max(abs(sm), abs(sp))))


def _two_normal_min(j: JumpDatum, w: Weights, upper: bool):
    """Coarse grid in the (time, space) plane plus pattern refinement."""
    value_fn = _two_normal_upper_value if upper else _two_normal_lower_value
    r = _search_box_radius(j, w)
    axis = np.arange(-r, r + 1e-9, 0.05)
    gx, gy = np.meshgrid(axis, axis, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    vals = value_fn(j, w, pts)
    order = np.argsort(vals, kind="stable")[:3]
    cands = [tuple(pts[i]) for i in order]
    cands += [(0.0, 0.0), (float(j.n[0]), float(j.n[1]))]
    sm, sp = signed_normal_speeds(j)
    # transport-free crossings are natural kinks of both bound functions
    mat = np.stack([j.w_plus, j.w_minus])
    det = float(np.linalg.det(mat))
    if abs(det) > 1e-12:
        cands.append(tuple(np.linalg.solve(mat, np.array([0.0, sm]))))
    if sp != sm:
        t = -sm / (sp - sm)
        cands.append((t * float(j.n[0]), t * float(j.n[1])))

    s = w.alpha_u * abs(j.jump_u) + w.alpha_v * _norm(j.jump_v)
    c = w.alpha_F * abs(j.jump_u)
    n0, n1 = float(j.n[0]), float(j.n[1])
    vp, vm = float(j.v_plus[0]), float(j.v_minus[0])

    if upper:

        def f(x):
            a0, a1 = x
            b0, b1 = n0 - a0, n1 - a1
            return s * (math.hypot(a0, a1) + math.hypot(b0, b1)) + c * (
                abs(a0 + a1 * vp) + abs(b0 + b1 * vm)
            )

    else:

        def f(x):
            a0, a1 = x
            b0, b1 = n0 - a0, n1 - a1
            return s * (math.hypot(a0, a1) + math.hypot(b0, b1)) + c * abs(
                a0 + a1 * vp + b0 + b1 * vm
            )

    x, fx = refine_scalar(f, cands, step=0.05, step_min=1e-9, top=4)
    return np.array(x), fx


def two_normal_upper_bound_min(j: JumpDatum, w: Weights):
    """Minimize the zig-zag upper bound over N+; returns (value, N+)."""
    _require_two_normal(j, w)
    jc, variant = canonicalize(j)
    x, fx = _two_normal_min(jc, w, upper=True)
    return fx, _map_back_two_normal(x, j.n, variant)


def two_normal_lower_bound(j: JumpDatum, w: Weights) -> float:
    """Lower bound for d = 1 under |[u]| <= 2 alpha_v / alpha_F."""
    _require_two_normal(j, w)
    jc, _ = canonicalize(j)
    _, fx = _two_normal_min(jc, w, upper=False)
    return fx


# ---------------------------------------------------------------------------
# laminate upper bound, any d


def laminate_upper_bound(j: JumpDatum, w: Weights, lam: Laminate) -> float:
    """Energy of a laminate: sum over pieces of
    (alpha_u |[u]| + alpha_v |v+ - v_j| + alpha_v |v- - v_j|) |N_j|
    + alpha_F |[u]| |N_j . (1, v_j)|."""
    total_n = lam.normal_sum()
    if _norm(total_n - j.n) > _NSUM_TOL:
        raise ValueError(
            f"laminate normals sum to {total_n}, expected n = {j.n} (tol {_NSUM_TOL})"
        )
    ju = abs(j.jump_u)
    total = 0.0
    for N, v in lam.pieces:
        if v.shape != j.v_plus.shape:
            raise ValueError("laminate velocity dimension mismatch")
        if _norm(v) > w.M + 1e-9:
            raise ValueError("laminate velocity exceeds the bound M")
        wv = np.concatenate(([1.0], v))
        total += (
            w.alpha_u * ju
            + w.alpha_v * (_norm(j.v_plus - v) + _norm(j.v_minus - v))
        ) * _norm(N) + w.alpha_F * ju * abs(float(N @ wv))
    return total


def _piece_cost(jc: JumpDatum, w: Weights, N: np.ndarray, polish: bool):
    ln = _norm(N)
    if ln < 1e-13:
        return 0.0, jc.v_minus
    m = N / ln
    val, a = _simple_min(abs(jc.jump_u), jc.v_plus, jc.v_minus, m, w, polish=polish)
    return ln * (w.alpha_u * abs(jc.jump_u) + val), a


def _certificate_direction(jc: JumpDatum, w: Weights):
    """Direction of steepest first-order gain for a zig-zag tilt, if any."""
    try:
        zeta = transport_cost_ratio(jc, w)
    except ValueError:
        return None
    if jc.d == 1:
        n2, wp2, wm2 = jc.n, jc.w_plus, jc.w_minus
        embed = None
    else:
        red = _planar_reduction(jc)
        if red is None:
            return None
        n2, wp2, wm2, embed = red
    theta = np.linspace(0.0, 2.0 * np.pi, 720, endpoint=False)
    dirs = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    gains = (
        1.0
        - dirs @ n2
        + zeta * (np.abs(dirs @ wp2) - dirs @ wm2)
    )
    i = int(np.argmin(gains))
    if gains[i] >= -1e-9:
        return None
    direction = dirs[i]
    if embed is not None:
        direction = embed(direction)
    return direction, float(gains[i])


def best_laminate_upper_bound(j: JumpDatum, w: Weights, max_l: int = 3):
    """Minimize the laminate bound over at most max_l pieces.

    Alternates closed-form piece velocities with a pattern search over the
    free normals; returns (value, Laminate) in the original orientation.
    """
    if max_l < 1:
        raise ValueError("max_l must be >= 1")
    jc, variant = canonicalize(j)
    n = jc.n
    dim = jc.d + 1

    val1, a1 = _piece_cost(jc, w, n, polish=True)
    best_val = val1
    best_normals = [n.copy()]

    # scalar piece cost: fast enough to sit inside a pattern search
    ju = abs(jc.jump_u)
    au, av, c = w.alpha_u * ju, w.alpha_v, w.alpha_F * ju
    if dim == 2:
        vp, vm = float(jc.v_plus[0]), float(jc.v_minus[0])

        def piece(p0, p1):
            ln = math.hypot(p0, p1)
            if ln < 1e-13:
                return 0.0
            return ln * (au + _simple_value_1d(vp, vm, p0 / ln, p1 / ln, av, c))

        def psi2(x):
            return piece(x[0], x[1]) + piece(n[0] - x[0], n[1] - x[1])

        def psi3(x):
            return (
                piece(x[0], x[1])
                + piece(x[2], x[3])
                + piece(n[0] - x[0] - x[2], n[1] - x[1] - x[3])
            )

    else:
        vp0, vp1 = float(jc.v_plus[0]), float(jc.v_plus[1])
        vm0, vm1 = float(jc.v_minus[0]), float(jc.v_minus[1])

        def piece(p0, p1, p2):
            ln = math.sqrt(p0 * p0 + p1 * p1 + p2 * p2)
            if ln < 1e-13:
                return 0.0
            return ln * (
                au
                + _simple_value_2d(vp0, vp1, vm0, vm1, p0 / ln, p1 / ln, p2 / ln, av, c)
            )

        def psi2(x):
            return piece(x[0], x[1], x[2]) + piece(n[0] - x[0], n[1] - x[1], n[2] - x[2])

        def psi3(x):
            return (
                piece(x[0], x[1], x[2])
                + piece(x[3], x[4], x[5])
                + piece(
                    n[0] - x[0] - x[3], n[1] - x[1] - x[4], n[2] - x[2] - x[5]
                )
            )

    if max_l >= 2:
        inits = [(0.0,) * dim]
        for ax in range(dim):
            e = [0.0] * dim
            e[ax] = 0.15
            inits.append(tuple(e))
            inits.append(tuple(-v for v in e))
        cert = _certificate_direction(jc, w)
        if cert is not None:
            d0 = cert[0]
            inits += [tuple(t * d0) for t in (0.05, 0.1, 0.2, 0.4)]
        if jc.d == 1 and ju <= 2.0 * w.alpha_v / w.alpha_F + 1e-12:
            nplus, _ = _two_normal_min(jc, w, upper=True)
            inits.append(tuple(nplus))
        x2, f2v = refine_scalar(psi2, inits, step=0.1, step_min=1e-7, top=4)
        if f2v < best_val - 1e-12:
            best_val = f2v
            x2 = np.array(x2)
            best_normals = [x2, n - x2]

        if max_l >= 3 and len(best_normals) == 2:
            a, b = best_normals
            inits3 = [
                tuple(np.concatenate([a, 0.5 * b])),
                tuple(np.concatenate([0.5 * a, b])),
                tuple(np.concatenate([0.5 * a, 0.5 * a + 0.5 * b])),
            ]
            x3, f3v = refine_scalar(psi3, inits3, step=0.05, step_min=1e-6, top=2)
            if f3v < best_val - 1e-9:
                best_val = f3v
                y, z = np.array(x3[:dim]), np.array(x3[dim:])
                best_normals = [y, z, n - y - z]

    # drop vanishing pieces, then recompute velocities with full polish
    normals = [N for N in best_normals if _norm(N) > 1e-10]
    if not normals:
        normals = [n.copy()]
    residual = n - np.sum(normals, axis=0)
    normals[-1] = normals[-1] + residual
    pieces = []
    total = 0.0
    for N in normals:
        cost, a = _piece_cost(jc, w, N, polish=True)
        total += cost
        pieces.append((N, a))
    if val1 < total:
        total = val1
        pieces = [(n.copy(), a1)]
    lam = _map_back_laminate(Laminate(tuple(pieces)), variant)
    return total, lam


# ---------------------------------------------------------------------------
# flux lower bound, any d


def _flux_bound_orientation(j: JumpDatum, w: Weights) -> float:
    ju = abs(j.jump_u)
    d = j.d
    if w.alpha_F * ju * math.sqrt(d) > 2.0 * w.alpha_v - 1e-12:
        # the flux objective is not coercive; no finite minimum to report
        return -math.inf
    A = np.outer(j.v_minus, j.n).ravel()
    B = np.outer(j.v_plus, j.n).ravel()
    L = np.zeros((d, d + 1))
    for k in range(d):
        L[k, k + 1] = w.alpha_F * ju
    L = L.ravel()
    m = L.size
    La, Lb = tuple(L), (tuple(A), tuple(B))

    def f(vec):
        lin = 0.0
        da = 0.0
        db = 0.0
        for i in range(m):
            vi = vec[i]
            lin += La[i] * vi
            ra = Lb[0][i] - vi
            rb = Lb[1][i] - vi
            da += ra * ra
            db += rb * rb
        return lin + w.alpha_v * (math.sqrt(da) + math.sqrt(db))

    cands = [tuple(A), tuple(B), tuple(0.5 * (A + B))]
    _, fmin = refine_scalar(f, cands, step=0.25 * (1.0 + _norm(B - A)), step_min=1e-10)
    return w.alpha_F * ju * float(j.n[0]) + w.alpha_u * ju + fmin


def flux_lower_bound(j: JumpDatum, w: Weights) -> float:
    """Lower bound built from the averaged velocity flux over the jump set.

    Also valid is the universal floor alpha_u |[u]| + alpha_v |[v]|; the
    maximum of the applicable bounds (both orientations of n) is returned.
    """
    ju = abs(j.jump_u)
    best = w.alpha_u * ju + w.alpha_v * _norm(j.jump_v)
    for jj in (j, _negate_normal(j)):
        best = max(best, _flux_bound_orientation(jj, w))
    return best


def lower_bound(j: JumpDatum, w: Weights) -> float:
    """Best available lower bound for the jump energy."""
    best = flux_lower_bound(j, w)
    if j.d == 1 and abs(j.jump_u) <= 2.0 * w.alpha_v / w.alpha_F + 1e-12:
        best = max(best, two_normal_lower_bound(j, w))
    return best


def upper_bound(j: JumpDatum, w: Weights, max_l: int = 3) -> float:
    """Best available upper bound for the jump energy."""
    best = simple_profile_energy(j, w)[0]
    best = min(best, best_laminate_upper_bound(j, w, max_l=max_l)[0])
    if j.d == 1 and abs(j.jump_u) <= 2.0 * w.alpha_v / w.alpha_F + 1e-12:
        best = min(best, two_normal_upper_bound_min(j, w)[0])
    return best


# ---------------------------------------------------------------------------
# microstructure certificate


def laminate_gain(j: JumpDatum, w: Weights, N) -> float:
    """First-order rate |N| - n.N + zeta(|N.w+| - N.w-) of the upper bound
    under a small zig-zag tilt along N.

    Meaningful for data oriented so that 0 < w- . n <= w+ . n.
    """
    zeta = transport_cost_ratio(j, w)
    N = np.asarray(N, dtype=np.float64)
    return (
        _norm(N)
        - float(N @ j.n)
        + zeta * (abs(float(N @ j.w_plus)) - float(N @ j.w_minus))
    )


def _planar_reduction(jc: JumpDatum):
    """Reduce a planar d >= 2 datum (v+, v-, spatial n all collinear) to an
    equivalent d = 1 datum; returns (n2, w2+, w2-, embed) or None."""
    ns = jc.n[1:]
    vectors = [ns, jc.jump_v, jc.v_plus, jc.v_minus]
    e = None
    for vec in vectors:
        if _norm(vec) > 1e-12:
            e = vec / _norm(vec)
            break
    if e is None:
        e = np.zeros(jc.d)
        e[0] = 1.0
    for vec in vectors:
        if _norm(vec - (vec @ e) * e) > 1e-10:
            return None
    n2 = np.array([jc.n[0], float(ns @ e)])
    nn = _norm(n2)
    if abs(nn - 1.0) > 1e-9:
        return None
    n2 = n2 / nn
    wp2 = np.array([1.0, float(jc.v_plus @ e)])
    wm2 = np.array([1.0, float(jc.v_minus @ e)])

    def embed(N2):
        return np.concatenate(([N2[0]], N2[1] * e))

    return n2, wp2, wm2, embed


def microstructure_certificate(j: JumpDatum, w: Weights) -> Optional[Certificate]:
    """Search for a zig-zag tilt that strictly beats every simple profile.

    Returns a Certificate (direction in the normalized orientation with
    0 < w- . n <= w+ . n, the optimal tilt size delta, and the gap to the
    simple-profile energy), or None when no certificate exists.
    """
    jc, _ = canonicalize(j)
    sm, sp = signed_normal_speeds(jc)
    if sm * sp <= 0.0:
        return None
    if jc.d == 1 and abs(jc.jump_u) > 2.0 * w.alpha_v / w.alpha_F + 1e-12:
        return None
    found = _certificate_direction(jc, w)
    if found is None:
        return None
    direction, gain = found
    simple_val, _ = simple_profile_energy(jc, w)

    def along(delta):
        lam = Laminate(((delta * direction, jc.v_plus), (jc.n - delta * direction, jc.v_minus)))
        return laminate_upper_bound(jc, w, lam)

    radius = _search_box_radius(jc, w)
    dmax = radius / max(_norm(direction), 1e-12)
    delta, val = golden_min(along, 0.0, dmax, tol=1e-12)
    if delta <= 0.0 or val >= simple_val - 1e-12:
        return None
    return Certificate(
        direction=direction,
        delta=float(delta),
        gap=float(simple_val - val),
        upper_value=float(val),
        gain=float(gain),
    )


# ---------------------------------------------------------------------------
# classification


def _is_simple_slip(j: JumpDatum, w: Weights) -> bool:
    sm, sp = signed_normal_speeds(j)
    if sm * sp <= 0.0:
        return False
    ju = abs(j.jump_u)
    jv = _norm(j.jump_v)
    if j.d == 1:
        if ju > 2.0 * w.alpha_v / w.alpha_F:
            return False
        n1 = abs(float(j.n[1]))
        return 2.0 * (w.alpha_u * ju + w.alpha_v * jv) * n1 >= w.alpha_F * ju * jv
    jump_w_dot_n = abs(float(j.jump_v @ j.n[1:]))
    return 2.0 * w.alpha_v * jump_w_dot_n >= j.d * w.alpha_F * ju * jv


def simple_slip_energy(j: JumpDatum, w: Weights) -> float:
    """Closed-form jump energy in the simple-slip regime:
    alpha_F min(|w- . n|, |w+ . n|) |[u]| + alpha_v |[v]| + alpha_u |[u]|."""
    sm, sp = signed_normal_speeds(j)
    ju = abs(j.jump_u)
    return (
        w.alpha_F * min(abs(sm), abs(sp)) * ju
        + w.alpha_v * _norm(j.jump_v)
        + w.alpha_u * ju
    )


def classify(j: JumpDatum, w: Weights, consistent_tol: float = 0.0) -> JumpBracket:
    """Classify a jump datum and bracket its energy.

    With the default consistent_tol = 0 the consistent test is the exact
    sign condition (w+ . n)(w- . n) <= 0; a positive tolerance additionally
    accepts data whose normal-speed cosines are both below it, which absorbs
    measurement noise in estimated data.
    """
    sm, sp = signed_normal_speeds(j)
    prod = sm * sp
    near = False
    if consistent_tol > 0.0 and prod > 0.0:
        cm = abs(sm) / _norm(j.w_minus)
        cp = abs(sp) / _norm(j.w_plus)
        near = cm * cp <= consistent_tol ** 2
    simple_val, _ = simple_profile_energy(j, w)
    lo = lower_bound(j, w)
    up = min(upper_bound(j, w), simple_val)

    if prod <= 0.0 or near:
        exact = w.alpha_u * abs(j.jump_u) + w.alpha_v * _norm(j.jump_v)
        return JumpBracket(lo, up, simple_val, Regime.CONSISTENT, value=exact)

    if _is_simple_slip(j, w):
        exact = simple_slip_energy(j, w)
        return JumpBracket(lo, up, simple_val, Regime.SIMPLE_SLIP, value=exact)

    cert = microstructure_certificate(j, w)
    if cert is not None:
        up = min(up, cert.upper_value)
        return JumpBracket(lo, up, simple_val, Regime.MICROSTRUCTURE, certificate=cert)
    return JumpBracket(lo, up, simple_val, Regime.UNDETERMINED)


# ---------------------------------------------------------------------------
# depth ordering


def depth_order_energy(edges, w: Weights) -> float:
    """Total jump energy of a depth-ordering hypothesis.

    ``edges`` lists (length, n, v_obj, v_opp, u_obj, u_opp) per visible edge:
    the owning object's velocity/intensity and the values on the far side.
    """
    total = 0.0
    for length, n, v_obj, v_opp, u_obj, u_opp in edges:
        if not length > 0.0:
            raise ValueError("edge lengths must be positive")
        n = np.asarray(n, dtype=np.float64)
        if abs(_norm(n) - 1.0) > 1e-9:
            raise ValueError("edge normals must be unit space-time vectors")
        v_obj = np.atleast_1d(np.asarray(v_obj, dtype=np.float64))
        v_opp = np.atleast_1d(np.asarray(v_opp, dtype=np.float64))
        w_obj = np.concatenate(([1.0], v_obj))
        total += float(length) * (
            w.alpha_F * abs(float(w_obj @ n))
            + w.alpha_v * _norm(v_obj - v_opp)
            + w.alpha_u * abs(float(u_obj) - float(u_opp))
        )
    return total


# ---------------------------------------------------------------------------
# report serialization


def _fmt_vec(x) -> str:
    return " ".join(f"{float(v):.12g}" for v in np.atleast_1d(x))


def format_jump_report(j: JumpDatum, w: Weights, bracket: JumpBracket) -> str:
    """Key/value record for one datum (one field per line)."""
    lines = [
        f"u_plus = {j.u_plus:.12g}",
        f"u_minus = {j.u_minus:.12g}",
        f"v_plus = {_fmt_vec(j.v_plus)}",
        f"v_minus = {_fmt_vec(j.v_minus)}",
        f"n = {_fmt_vec(j.n)}",
        f"alpha_F = {w.alpha_F:.12g}",
        f"alpha_v = {w.alpha_v:.12g}",
        f"alpha_u = {w.alpha_u:.12g}",
        f"M = {w.M:.12g}",
        f"regime = {bracket.regime.value}",
        f"lower = {bracket.lower:.12g}",
        f"upper = {bracket.upper:.12g}",
        f"simple = {bracket.simple:.12g}",
    ]
    if bracket.value is not None:
        lines.append(f"value = {bracket.value:.12g}")
    cert = bracket.certificate
    if cert is not None:
        lines.append(f"certificate_N = {_fmt_vec(cert.direction)}")
        lines.append(f"certificate_delta = {cert.delta:.12g}")
        lines.append(f"certificate_gap = {cert.gap:.12g}")
    return "\n".join(lines)
