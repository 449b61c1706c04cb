"""Command line front end.

    mvfield eval     --polygon P.json --function saddle --x 0.5 --y 0.5
    mvfield grid     --polygon P.json --function tanhridge --nx 200 --out DIR
    mvfield probe    --polygon P.json --function saddle --target edge:0:0.5 --out DIR
    mvfield selftest

Exit status: 0 on success, 1 for usage errors, 2 for invalid input, 3 when
quadrature did not converge and ``--strict`` is set, 4 when a self-test check
fails.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import geometry as geo
from . import harness, mvcore
from .errors import InputError, MVError, QuadratureNotConverged
from .quadrature import QuadratureConfig

EXIT_USAGE, EXIT_INPUT, EXIT_NUMERIC, EXIT_SELFTEST = 1, 2, 3, 4
ERR_MIN = 1e-12


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--polygon", required=True, help="JSON file with a 'vertices' list")
    common.add_argument("--function", required=True, metavar="SPEC",
                        help="one | saddle | tanhridge | linear:a,b,c | pwl:v0,v1,... | table:PATH")
    common.add_argument("--backend", choices=mvcore.BACKENDS, default="angular")
    common.add_argument("--order", type=int, default=16, help="Gauss-Legendre points per panel")
    common.add_argument("--tol", type=float, default=1e-10, help="relative quadrature tolerance")
    common.add_argument("--strict", action="store_true",
                        help="treat quadrature non-convergence as fatal (exit 3)")

    parser = _Parser(prog="mvfield", description="Transfinite mean value interpolation on polygons.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("eval", parents=[common], help="evaluate the interpolant at one point")
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--y", type=float, required=True)

    p = sub.add_parser("grid", parents=[common], help="sample g and |f - g| on a grid")
    p.add_argument("--nx", type=int, default=100)
    p.add_argument("--ny", type=int, default=None, help="defaults to --nx")
    p.add_argument("--out", type=Path, default=Path("."))

    p = sub.add_parser("probe", parents=[common], help="approach a boundary point")
    p.add_argument("--target", required=True, help="edge:I:T or vertex:I")
    p.add_argument("--steps", type=int, default=4, help="number of distances")
    p.add_argument("--d0", type=float, default=0.1, help="first distance")
    p.add_argument("--base", type=float, default=0.1, help="ratio between distances")
    p.add_argument("--absolute", action="store_true",
                   help="distances in polygon units instead of fractions of the diameter")
    p.add_argument("--out", type=Path, default=Path("."))

    p = sub.add_parser("selftest", help="run the invariant checks on the standard polygons")
    p.add_argument("--seed", type=int, default=0)
    return parser


def _config(args) -> QuadratureConfig:
    return QuadratureConfig(order=args.order, tol_rel=args.tol)


def _load(args):
    path = Path(args.polygon)
    if not path.is_file():
        raise InputError(f"polygon file {path} does not exist")
    polygon = geo.load_polygon(path)
    return polygon, mvcore.parse_function_spec(args.function, polygon)


def _convergence(ok, args, what):
    if ok:
        return
    msg = f"quadrature did not converge for {what}"
    if args.strict:
        raise QuadratureNotConverged(msg)
    print(f"warning: {msg}", file=sys.stderr)


def cmd_eval(args) -> int:
    polygon, f = _load(args)
    out = mvcore.evaluate(polygon, f, (args.x, args.y), _config(args), args.backend)
    _convergence(out.converged, args, "this point")
    print(f"g = {out.value!r}")
    print(f"phi = {out.phi!r}")
    print(f"error = {out.quad_error!r}")
    if out.phi_quadrature is not None:
        print(f"phi_quadrature = {out.phi_quadrature!r}")
    return 0


def _scale_to_bytes(values, lo, hi, inside):
    """Map ``values`` linearly from [lo, hi] onto 1..255; cells outside ``inside`` become 0."""
    img = np.zeros(values.shape, dtype=np.uint8)
    if hi > lo:
        u = (np.clip(values, lo, hi) - lo) / (hi - lo)
    else:
        u = np.zeros(values.shape)
    img[inside] = np.rint(1 + 254 * u[inside]).astype(np.uint8)
    return img


def write_pgm(path, img: np.ndarray) -> None:
    """Binary 8-bit PGM; ``img[0]`` is the top row."""
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(img, dtype=np.uint8).tobytes())


def _write_json(path, data):
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_grid_images(grid: harness.FieldGrid, out: Path, function: str) -> None:
    inside = grid.location != mvcore.LOC_EXTERIOR
    # grid rows run bottom-up, images top-down
    g = grid.g[::-1]
    err = grid.abs_err[::-1]
    inside = inside[::-1]
    base = {"width": grid.nx, "height": grid.ny, "bbox": list(grid.bbox), "function": function,
            "exterior_level": 0, "levels": [1, 255]}

    lo = float(np.min(g[inside])) if inside.any() else 0.0
    hi = float(np.max(g[inside])) if inside.any() else 0.0
    write_pgm(out / "g.pgm", _scale_to_bytes(g, lo, hi, inside))
    _write_json(out / "g.json", dict(base, image="g.pgm", quantity="g", scale="linear",
                                      min=lo, max=hi))

    emax = max(float(np.max(err[inside])) if inside.any() else ERR_MIN, ERR_MIN)
    logerr = np.log10(np.clip(np.nan_to_num(err, nan=ERR_MIN), ERR_MIN, emax))
    write_pgm(out / "error.pgm", _scale_to_bytes(logerr, np.log10(ERR_MIN), np.log10(emax), inside))
    _write_json(out / "error.json", dict(base, image="error.pgm", quantity="abs(f - g)",
                                          scale="log10", min=ERR_MIN, max=emax))


def cmd_grid(args) -> int:
    polygon, f = _load(args)
    ny = args.nx if args.ny is None else args.ny
    if args.nx < 1 or ny < 1:
        raise InputError("grid resolution must be positive")
    grid = harness.error_grid(polygon, f, args.nx, ny, args.backend, _config(args))
    _convergence(bool(grid.converged.all()), args, f"{int((~grid.converged).sum())} grid cells")
    args.out.mkdir(parents=True, exist_ok=True)
    harness.write_grid_csv(grid, args.out / "grid.csv")
    write_grid_images(grid, args.out, args.function)
    inner = grid.location == mvcore.LOC_INTERIOR
    print(f"wrote {args.out / 'grid.csv'} ({grid.nx * grid.ny} cells)")
    if inner.any():
        print(f"max abs error = {float(np.max(grid.abs_err[inner]))!r}")
    return 0


def cmd_probe(args) -> int:
    polygon, f = _load(args)
    target = harness.parse_target(args.target)
    rep = harness.convergence_probe(polygon, f, target, args.steps, args.base, args.d0,
                                    absolute=args.absolute, cfg=_config(args))
    for backend, conv in rep.converged.items():
        _convergence(bool(conv.all()), args, f"some {backend} probes")
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / "probe.csv"
    harness.write_report_csv(rep, path)
    print(f"target {rep.target}, f = {rep.value!r}")
    for backend in rep.errors:
        final = rep.final_errors(backend)
        print(f"{backend}: final errors {', '.join(f'{e:.3e}' for e in final)}; "
              f"decreasing {rep.decreasing(backend).tolist()}")
    print(f"wrote {path}")
    return 0


def cmd_selftest(args) -> int:
    results = harness.selftest(args.seed)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.detail}")
    passed = sum(r.passed for r in results)
    print(f"{passed} passed, {len(results) - passed} failed")
    return 0 if passed == len(results) else EXIT_SELFTEST


COMMANDS = {"eval": cmd_eval, "grid": cmd_grid, "probe": cmd_probe, "selftest": cmd_selftest}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return exc.code
    try:
        return COMMANDS[args.command](args)
    except InputError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except QuadratureNotConverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except MVError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
