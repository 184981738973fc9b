"""Small deterministic derivative-free minimizers.

The jump-energy bounds are convex but non-smooth, so all searches here are
plain coordinate/pattern methods with fixed grids and step schedules; two
runs on the same input are bit-identical.
"""

import numpy as np


def _directions(dim: int) -> np.ndarray:
    dirs = []
    for i in range(dim):
        e = np.zeros(dim)
        e[i] = 1.0
        dirs.append(e.copy())
        dirs.append(-e)
    if dim <= 3:
        # add the diagonals; helps compass search through non-smooth valleys
        for signs in np.ndindex(*(2,) * dim):
            v = np.array([1.0 if s else -1.0 for s in signs])
            dirs.append(v / np.linalg.norm(v))
    else:
        v = np.ones(dim) / np.sqrt(dim)
        dirs.append(v.copy())
        dirs.append(-v)
    return np.array(dirs)


def pattern_search(f, x0, step: float, step_min: float = 1e-9, max_iter: int = 4000):
    """Compass/pattern search with step halving; returns (x, f(x))."""
    x = np.asarray(x0, dtype=np.float64).copy()
    fx = f(x)
    dirs = _directions(x.size)
    s = float(step)
    it = 0
    while s > step_min and it < max_iter:
        improved = False
        for d in dirs:
            it += 1
            cand = x + s * d
            fc = f(cand)
            if fc < fx - 1e-15 * (1.0 + abs(fx)):
                x, fx = cand, fc
                improved = True
                break
        if not improved:
            s *= 0.5
    return x, fx


def golden_min(f, lo: float, hi: float, tol: float = 1e-10, max_iter: int = 200):
    """Golden-section search for a unimodal function on [lo, hi]."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = float(lo), float(hi)
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a < tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    if fc < fd:
        return c, fc
    return d, fd


def refine_candidates(f, candidates, step: float, step_min: float = 1e-9, top: int = 3):
    """Pattern-polish the best few candidate points; returns (x, f(x))."""
    cands = [np.asarray(c, dtype=np.float64) for c in candidates]
    scored = sorted(((f(c), i) for i, c in enumerate(cands)), key=lambda t: t[0])
    best_x, best_f = cands[scored[0][1]], scored[0][0]
    for fc, i in scored[:top]:
        x, fx = pattern_search(f, cands[i], step, step_min)
        if fx < best_f:
            best_x, best_f = x, fx
    return best_x, best_f


def _scalar_directions(k: int):
    dirs = []
    for i in range(k):
        for sgn in (1.0, -1.0):
            d = [0.0] * k
            d[i] = sgn
            dirs.append(tuple(d))
    if k <= 3:
        import itertools

        r = 1.0 / np.sqrt(k)
        for signs in itertools.product((1.0, -1.0), repeat=k):
            dirs.append(tuple(s * r for s in signs))
    return tuple(dirs)


def pattern_search_scalar(f, x0, step: float, step_min: float = 1e-8, max_iter: int = 8000):
    """Pattern search over tuples of floats (no array overhead).

    ``f`` maps a tuple to a float; returns (tuple, value).
    """
    x = tuple(float(v) for v in x0)
    fx = f(x)
    k = len(x)
    dirs = _scalar_directions(k)
    s = float(step)
    it = 0
    while s > step_min and it < max_iter:
        improved = False
        for d in dirs:
            it += 1
            cand = tuple(x[i] + s * d[i] for i in range(k))
            fc = f(cand)
            if fc < fx - 1e-15 * (1.0 + abs(fx)):
                x, fx = cand, fc
                improved = True
                break
        if not improved:
            s *= 0.5
    return x, fx


def refine_scalar(f, candidates, step: float, step_min: float = 1e-8, top: int = 3):
    """Scalar-tuple version of refine_candidates."""
    cands = [tuple(float(v) for v in c) for c in candidates]
    scored = sorted(((f(c), i) for i, c in enumerate(cands)), key=lambda t: t[0])
    best_x, best_f = cands[scored[0][1]], scored[0][0]
    for fc, i in scored[:top]:
        x, fx = pattern_search_scalar(f, cands[i], step, step_min)
        if fx < best_f:
            best_x, best_f = x, fx
    return best_x, best_f
