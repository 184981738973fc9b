"""Command-line surface: scene synthesis, the joint solver, and jump-energy
queries.

Exit codes: 0 success, 1 internal numeric failure, 2 usage or input error.
``BVFLOW_THREADS`` caps the thread pools of the numerics libraries.
"""

import argparse
import os
import sys
from pathlib import Path

import numpy as np


class UsageError(Exception):
    pass


def _apply_thread_cap() -> None:
    cap = os.environ.get("BVFLOW_THREADS")
    if cap:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, cap)


def _parse_floats(text: str, what: str):
    try:
        return [float(x) for x in text.split(",") if x.strip() != ""]
    except ValueError as exc:
        raise UsageError(f"could not parse {what}: {exc}") from exc


def _parse_weights(text: str):
    from .core import Weights

    vals = _parse_floats(text, "--weights")
    if len(vals) not in (3, 4, 5):
        raise UsageError("--weights takes aF,aV,aU[,M[,p]]")
    try:
        return Weights(*vals)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _parse_datum(text: str):
    from .core import JumpDatum

    vals = _parse_floats(text, "--datum")
    if len(vals) == 6:
        d = 1
    elif len(vals) == 9:
        d = 2
    else:
        raise UsageError(
            "--datum takes u+,u-,v+...,v-...,n... (6 values for d=1, 9 for d=2)"
        )
    u_plus, u_minus = vals[0], vals[1]
    v_plus = vals[2 : 2 + d]
    v_minus = vals[2 + d : 2 + 2 * d]
    n = np.asarray(vals[2 + 2 * d :])
    norm = float(np.linalg.norm(n))
    if norm < 1e-12:
        raise UsageError("normal must be nonzero")
    try:
        return JumpDatum(u_plus, u_minus, v_plus, v_minus, n / norm)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _cmd_synth(args) -> int:
    from . import synth
    from .fieldio import write_field, write_velocity

    try:
        spec = synth.load_scene(args.spec)
    except OSError as exc:
        raise UsageError(f"cannot read scene file: {exc}") from exc
    except ValueError as exc:
        raise UsageError(f"bad scene file: {exc}") from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    u0, v_true, edges = synth.generate(spec)
    write_field(out / "u0.bvf", u0)
    write_velocity(out / "v_true.bvf", v_true)
    synth.write_edge_list(out / "edges.txt", edges)
    print(f"wrote {out / 'u0.bvf'}, {out / 'v_true.bvf'}, {out / 'edges.txt'}")
    return 0


def _flow_frames(v_field):
    """Per frame-pair (h, w, 2) flow arrays in cells per frame."""
    g = v_field.grid
    factor = g.dt / g.dx  # physical velocity -> cells per frame
    frames = []
    for t in range(g.nt - 1):
        vals = v_field.values[t] * factor
        if g.d == 1:
            flow = np.zeros((1, g.shape[0], 2))
            flow[0, :, 0] = vals[:, 0]
        else:
            flow = np.zeros((g.shape[0], g.shape[1], 2))
            flow[..., 0] = vals[..., 1]  # horizontal = second spatial axis
            flow[..., 1] = vals[..., 0]
        frames.append(flow)
    return frames


def _cmd_solve(args) -> int:
    from .fieldio import FieldFormatError, read_field, write_field, write_velocity
    from .flowio import flow_to_rgb, write_flow, write_ppm
    from .solver import SolverConfig, solve

    w = _parse_weights(args.weights)
    try:
        u0 = read_field(args.input, dt=args.dt, dx=args.dx)
    except (OSError, FieldFormatError) as exc:
        raise UsageError(f"cannot read input field: {exc}") from exc
    try:
        cfg = SolverConfig(
            outer_iters=args.outer,
            inner_iters=args.inner,
            pd_step_ratio=args.step_ratio,
            tol_energy=args.tol,
            pyramid_levels=args.pyramid,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = solve(u0, cfg, w)
    if result.report.aborted:
        (out / "report.txt").write_text(result.report.to_text() + "\n")
        print("solver aborted; report written", file=sys.stderr)
        return 1
    write_field(out / "u.bvf", result.u)
    write_velocity(out / "v.bvf", result.v)
    frames = _flow_frames(result.v)
    peak = max((float(np.max(np.hypot(f[..., 0], f[..., 1]))) for f in frames), default=0.0)
    for t, flow in enumerate(frames):
        write_flow(out / f"flow_{t:04d}.flo", flow)
        write_ppm(out / f"flow_{t:04d}.ppm", flow_to_rgb(flow, peak))
    (out / "report.txt").write_text(result.report.to_text() + "\n")
    print(f"wrote restored sequence, {len(frames)} flow frames and report to {out}")
    return 0


def _cmd_jump(args) -> int:
    from . import jump

    w = _parse_weights(args.weights)
    datum = _parse_datum(args.datum)
    bracket = jump.classify(datum, w)
    print(jump.format_jump_report(datum, w, bracket))
    return 0


def _cmd_cell_k(args) -> int:
    from . import jump
    from .cell import estimate_jump_energy, make_cell_grid

    w = _parse_weights(args.weights)
    datum = _parse_datum(args.datum)
    if args.res < 8:
        raise UsageError("--res must be at least 8")
    _, lam = jump.best_laminate_upper_bound(datum, w)
    grid = make_cell_grid(datum.n, args.res, align=lam.pieces[0][0])
    result = estimate_jump_energy(
        datum, w, grid, max_outer=args.max_outer, inner_iters=args.inner
    )
    print(f"value = {result.value:.12g}")
    print(f"res = {args.res}")
    print(f"converged = {int(result.converged)}")
    print(f"outer_iterations = {result.outer_iterations}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bvflow",
        description="Joint image-sequence restoration and optical flow on space-time grids",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render a synthetic scene")
    p.add_argument("--spec", required=True, help="scene description file")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("solve", help="run the joint restoration/flow solver")
    p.add_argument("--input", required=True, help="input sequence (.bvf)")
    p.add_argument("--weights", required=True, help="aF,aV,aU[,M[,p]]")
    p.add_argument("--out", required=True)
    p.add_argument("--dt", type=float, default=1.0)
    p.add_argument("--dx", type=float, default=1.0)
    p.add_argument("--outer", type=int, default=30)
    p.add_argument("--inner", type=int, default=300)
    p.add_argument("--pyramid", type=int, default=1)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--step-ratio", type=float, default=1.0)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("jump", help="classify a jump datum and print its bracket")
    p.add_argument("--datum", required=True, help="u+,u-,v+...,v-...,n...")
    p.add_argument("--weights", required=True)
    p.set_defaults(func=_cmd_jump)

    p = sub.add_parser("cell-k", help="cell-problem estimate of the jump energy")
    p.add_argument("--datum", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--res", type=int, default=64)
    p.add_argument("--max-outer", type=int, default=60)
    p.add_argument("--inner", type=int, default=400)
    p.set_defaults(func=_cmd_cell_k)
    return parser


def main(argv=None) -> int:
    _apply_thread_cap()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
