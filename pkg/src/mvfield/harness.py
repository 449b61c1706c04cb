"""Numerical checks of boundary interpolation, and error fields.

* :func:`convergence_probe` approaches an edge point or a vertex along fixed
  directions and records ``|g(x_k) - f(target)|`` on a geometric sequence of
  distances.
* :func:`concave_identity_residual` checks the angle identity at a reflex
  vertex: ``tau1*alpha1 + tau2*alpha2`` equals the angle subtended by the
  chord ``[y1, y2]``.
* :func:`error_grid` samples ``g`` and ``|f - g|`` on a cell-centred grid.
"""
from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from . import geometry as geo
from . import mvcore
from .errors import (
    InputError,
    ParseError,
    ProbeExitsDomain,
    TargetNotOnBoundary,
    VertexNotConcave,
)
from .geometry import Polygon
from .mvcore import BoundaryFunction
from .quadrature import DEFAULT_CONFIG, QuadratureConfig

# closest admissible probe distance, relative to the diameter
PROBE_FLOOR = 1e-7
# vertex probes: bisector, and rotated by this fraction of the half angle towards each edge
VERTEX_SPREAD = 0.4

SQUARE = ((0, 0), (1, 0), (1, 1), (0, 1))
L_SHAPE = ((0, 0), (2, 0), (2, 1), (1, 1), (1, 2), (0, 2))
# non-convex test domain with a rectangular and a triangular notch; a
# stand-in, since the figure polygon of the original experiments is not published
CANONICAL = ((0, 0), (4, 0), (4, 2), (2.5, 2), (2.5, 3.5), (4, 3.5), (4, 5),
           (0, 5), (0, 3), (1, 2.5), (0, 2))


def notched_dodecagon():
    """Regular 12-gon of radius 1 with one vertex pulled in to radius 0.4."""
    ang = 2 * np.pi * np.arange(12) / 12
    r = np.ones(12)
    r[3] = 0.4
    return tuple(zip(r * np.cos(ang), r * np.sin(ang)))


def standard_polygons() -> dict:
    return {
        "square": geo.validate_polygon(SQUARE),
        "L": geo.validate_polygon(L_SHAPE),
        "canonical": geo.validate_polygon(CANONICAL),
        "dodecagon": geo.validate_polygon(notched_dodecagon()),
    }


# -- convergence probes ---------------------------------------------------------

@dataclass(frozen=True)
class EdgeTarget:
    edge: int
    t: float


@dataclass(frozen=True)
class VertexTarget:
    vertex: int


Target = Union[EdgeTarget, VertexTarget]


def parse_target(spec: str) -> Target:
    """``edge:I:T`` or ``vertex:I``."""
    parts = spec.strip().split(":")
    try:
        if parts[0] == "edge" and len(parts) == 3:
            return EdgeTarget(int(parts[1]), float(parts[2]))
        if parts[0] == "vertex" and len(parts) == 2:
            return VertexTarget(int(parts[1]))
    except ValueError:
        pass
    raise ParseError(f"bad target {spec!r}; expected edge:I:T or vertex:I")


def _resolve_target(polygon, target):
    """Boundary point, list of inward unit directions, and a label."""
    if isinstance(target, EdgeTarget):
        e, t = target.edge, target.t
        if not (0 <= e < polygon.n) or not (0 < t < 1):
            raise TargetNotOnBoundary(f"{target} is not an edge-interior point")
        v1, _ = polygon.edge(e)
        point = v1 + t * polygon.directions[e]
        return point, [-polygon.normals[e]], f"edge:{e}:{t!r}"
    if isinstance(target, VertexTarget):
        i = target.vertex
        if not 0 <= i < polygon.n:
            raise TargetNotOnBoundary(f"vertex {i} does not exist")
        return polygon.vertices[i], vertex_directions(polygon, i), f"vertex:{i}"
    # a raw point must lie on the boundary
    loc = geo.locate_point(polygon, target)
    if isinstance(loc, geo.OnEdge):
        return _resolve_target(polygon, EdgeTarget(loc.edge, loc.t))
    if isinstance(loc, geo.AtVertex):
        return _resolve_target(polygon, VertexTarget(loc.vertex))
    raise TargetNotOnBoundary(f"point {list(target)} is not on the boundary")


def vertex_directions(polygon: Polygon, i: int) -> list:
    """Bisector of the interior angle at vertex ``i``, and two directions
    rotated from it towards either adjacent edge."""
    beta = polygon.interior_angle(i)
    u = polygon.directions[i] / polygon.lengths[i]
    out = []
    for frac in (0.5 * (1 - VERTEX_SPREAD), 0.5, 0.5 * (1 + VERTEX_SPREAD)):
        a = frac * beta
        c, s = np.cos(a), np.sin(a)
        out.append(np.array([c * u[0] - s * u[1], s * u[0] + c * u[1]]))
    return out


@dataclass
class ConvergenceReport:
    target: str
    point: np.ndarray
    value: float  # f at the target
    directions: np.ndarray  # (ndir, 2)
    distances: np.ndarray  # (ndist,), strictly decreasing
    errors: dict = field(default_factory=dict)  # backend -> (ndir, ndist)
    converged: dict = field(default_factory=dict)  # backend -> (ndir, ndist) bool
    limits: dict = field(default_factory=dict)  # backend -> (ndir,) g at the closest probe
    _signed: dict = field(default_factory=dict, repr=False)  # backend -> g - f(target)

    def decreasing(self, backend: str, skip_first: bool = False, floor: float = 0.0) -> np.ndarray:
        """Per direction: is the error column strictly decreasing?

        With ``skip_first`` the comparison starts at the second entry. Steps
        between entries that are both at or below ``floor`` count as
        decreasing; a column that is zero up to rounding has nothing left to
        decrease.
        """
        e = self.errors[backend][:, 1:] if skip_first else self.errors[backend]
        step = (e[:, 1:] < e[:, :-1]) | ((e[:, 1:] <= floor) & (e[:, :-1] <= floor))
        return np.all(step, axis=1)

    def final_errors(self, backend: str) -> np.ndarray:
        return self.errors[backend][:, -1]

    def extrapolated_limits(self, backend: str) -> np.ndarray:
        """Per-direction limit estimate from the two closest probes, assuming
        the error shrinks in proportion to the distance."""
        g = self.value + self._signed[backend]
        if g.shape[1] < 2:
            return g[:, -1]
        q = self.distances[-1] / self.distances[-2]
        return g[:, -1] - (g[:, -2] - g[:, -1]) * q / (1 - q)

    def rows(self):
        for backend, err in self.errors.items():
            conv = self.converged[backend]
            for j in range(err.shape[0]):
                for k, d in enumerate(self.distances):
                    yield backend, d, j, err[j, k], bool(conv[j, k])


def convergence_probe(polygon: Polygon, f: BoundaryFunction, target, n_distances: int = 4,
                      base: float = 0.1, d0: float = 0.1, absolute: bool = False,
                      backends: Sequence[str] = mvcore.BACKENDS,
                      cfg: QuadratureConfig = DEFAULT_CONFIG) -> ConvergenceReport:
    """Approach ``target`` along inward directions with distances ``d0 * base**k``.

    Distances are fractions of the polygon diameter unless ``absolute``; they
    are floored at ``PROBE_FLOOR * diameter``.
    """
    if not 0 < base < 1:
        raise InputError(f"base must be in (0, 1), got {base}")
    if n_distances < 1:
        raise InputError("need at least one distance")
    point, dirs, label = _resolve_target(polygon, target)
    unit = 1.0 if absolute else polygon.diameter
    dist = d0 * unit * base ** np.arange(n_distances)
    dist = dist[dist >= PROBE_FLOOR * polygon.diameter]
    if dist.size == 0:
        raise InputError("all probe distances fall below the floor")
    dirs = np.array(dirs)
    probes = point[None, None, :] + dist[None, :, None] * dirs[:, None, :]
    flat = probes.reshape(-1, 2)
    codes, _ = mvcore.classify_many(polygon, flat)
    if np.any(codes != mvcore.LOC_INTERIOR):
        bad = flat[np.flatnonzero(codes != mvcore.LOC_INTERIOR)[0]]
        raise ProbeExitsDomain(f"probe point {bad.tolist()} is not inside the polygon")

    if isinstance(target, VertexTarget) or label.startswith("vertex"):
        fv = f.vertex_value(polygon, int(label.split(":")[1]))
    else:
        e, t = int(label.split(":")[1]), float(label.split(":")[2])
        fv = float(f.edge_values(polygon, np.array([e]), np.array([t]))[0])

    report = ConvergenceReport(label, point, fv, dirs, dist)
    shape = (len(dirs), dist.size)
    for backend in backends:
        out = mvcore.evaluate_many(polygon, f, flat, cfg, backend)
        g = out.value.reshape(shape)
        report._signed[backend] = g - fv
        report.errors[backend] = np.abs(g - fv)
        report.converged[backend] = out.converged.reshape(shape)
        report.limits[backend] = g[:, -1]
    return report


def write_report_csv(report: ConvergenceReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["backend", "distance", "direction", "error", "converged"])
        for backend, d, j, err, ok in report.rows():
            w.writerow([backend, f"{d:.17g}", j, f"{err:.17g}", int(ok)])


# -- reflex-vertex angle identity -------------------------------------------------

def _angle(p, q):
    return float(np.arctan2(abs(p[0] * q[1] - p[1] * q[0]), p[0] * q[0] + p[1] * q[1]))


def _side(a, b, x, tol):
    # sign of the distance from x to the line a->b, positive on the left (interior)
    d = b - a
    c = d[0] * (x[1] - a[1]) - d[1] * (x[0] - a[0])
    if abs(c) <= tol * np.hypot(*d):
        return 0
    return 1 if c > 0 else -1


def concave_legs(polygon: Polygon, vertex: int):
    """Points ``y1`` on the incoming and ``y2`` on the outgoing edge at distance
    half the shorter adjacent edge from the vertex."""
    if not polygon.is_concave(vertex):
        raise VertexNotConcave(f"vertex {vertex} is convex")
    n = polygon.n
    v = polygon.vertices[vertex]
    v1 = polygon.vertices[(vertex - 1) % n]
    v2 = polygon.vertices[(vertex + 1) % n]
    l1, l2 = np.hypot(*(v1 - v)), np.hypot(*(v2 - v))
    delta = 0.5 * min(l1, l2)
    return v + delta * (v1 - v) / l1, v + delta * (v2 - v) / l2, delta


def concave_identity_residual(polygon: Polygon, vertex: int, x) -> float:
    """``|tau1*alpha1 + tau2*alpha2 - alpha([y1, y2])|`` at a reflex vertex.

    ``alpha1``, ``alpha2`` are the angles at ``x`` subtended by the legs
    ``[y1, v]`` and ``[v, y2]``, ``tau1``, ``tau2`` their signs.
    """
    y1, y2, delta = concave_legs(polygon, vertex)
    v = polygon.vertices[vertex]
    x = np.asarray(x, dtype=float)
    if not np.hypot(*(x - v)) < 0.5 * delta:
        raise InputError("x must lie within half a leg length of the vertex")
    if not isinstance(geo.locate_point(polygon, x), geo.Interior):
        raise InputError("x must be an interior point")
    tol = geo.EPS_TAU * polygon.diameter
    tau1 = _side(y1, v, x, tol)
    tau2 = _side(v, y2, x, tol)
    a1 = _angle(y1 - x, v - x)
    a2 = _angle(v - x, y2 - x)
    a12 = _angle(y1 - x, y2 - x)
    return abs(tau1 * a1 + tau2 * a2 - a12)


# -- error fields ----------------------------------------------------------------

@dataclass
class FieldGrid:
    """Cell-centred samples. Exterior cells hold NaN in ``g`` and ``abs_err``."""

    bbox: tuple  # (xmin, ymin, xmax, ymax)
    nx: int
    ny: int
    x: np.ndarray  # (ny, nx)
    y: np.ndarray
    g: np.ndarray
    abs_err: np.ndarray
    location: np.ndarray  # mvcore.LOC_* codes
    converged: np.ndarray

    CLASS_NAMES = ("interior", "boundary", "exterior")

    def rows(self):
        """Row-major from the top row down, matching the image layout."""
        for j in range(self.ny - 1, -1, -1):
            for i in range(self.nx):
                yield (self.x[j, i], self.y[j, i], self.CLASS_NAMES[self.location[j, i]],
                       self.g[j, i], self.abs_err[j, i])

    def band_mask(self, polygon: Polygon, width: float) -> np.ndarray:
        """Interior cells within ``width`` of the boundary."""
        pts = np.column_stack((self.x.ravel(), self.y.ravel()))
        d = geo.boundary_distance(polygon, pts).reshape(self.x.shape)
        return (self.location == mvcore.LOC_INTERIOR) & (d <= width)


def worker_count() -> int:
    env = os.environ.get("MVFIELD_THREADS")
    cap = os.cpu_count() or 1
    if env:
        try:
            return max(1, min(int(env), cap))
        except ValueError:
            pass
    return cap


def error_grid(polygon: Polygon, f: BoundaryFunction, nx: int, ny: Optional[int] = None,
               backend: str = "angular", cfg: QuadratureConfig = DEFAULT_CONFIG,
               bbox=None, workers: Optional[int] = None) -> FieldGrid:
    """Evaluate ``g`` and ``|f - g|`` at the cell centres of an ``nx`` x ``ny`` grid."""
    if not f.extendable:
        f.global_values(np.zeros((1, 2)))  # raises FunctionNotExtendable
    ny = nx if ny is None else ny
    if nx < 1 or ny < 1:
        raise InputError("grid resolution must be positive")
    if bbox is None:
        lo = polygon.vertices.min(axis=0)
        hi = polygon.vertices.max(axis=0)
        bbox = (lo[0], lo[1], hi[0], hi[1])
    x0, y0, x1, y1 = map(float, bbox)
    xs = x0 + (np.arange(nx) + 0.5) * (x1 - x0) / nx
    ys = y0 + (np.arange(ny) + 0.5) * (y1 - y0) / ny
    X, Y = np.meshgrid(xs, ys)
    pts = np.column_stack((X.ravel(), Y.ravel()))

    workers = worker_count() if workers is None else workers
    # fixed blocks, so results do not depend on the number of workers
    blocks = [np.arange(s, min(s + mvcore.CHUNK, len(pts))) for s in range(0, len(pts), mvcore.CHUNK)]

    def run(idx):
        return mvcore.evaluate_many(polygon, f, pts[idx], cfg, backend)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, blocks))
    else:
        parts = [run(b) for b in blocks]
    g = np.concatenate([p.value for p in parts])
    loc = np.concatenate([p.location for p in parts])
    conv = np.concatenate([p.converged for p in parts])
    err = np.abs(f.global_values(pts) - g)
    shape = (ny, nx)
    return FieldGrid((x0, y0, x1, y1), nx, ny, X, Y, g.reshape(shape), err.reshape(shape),
                     loc.reshape(shape), conv.reshape(shape))


def write_grid_csv(grid: FieldGrid, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "class", "g", "abs_err"])
        for x, y, cls, g, e in grid.rows():
            w.writerow([f"{x:.17g}", f"{y:.17g}", cls, f"{g:.17g}", f"{e:.17g}"])


# -- self test ---------------------------------------------------------------------

def random_interior_points(polygon: Polygon, m: int, rng: np.random.Generator,
                           margin: float = 0.0) -> np.ndarray:
    """``m`` uniform points inside the polygon, at least ``margin`` from the boundary."""
    lo = polygon.vertices.min(axis=0)
    hi = polygon.vertices.max(axis=0)
    out = np.empty((0, 2))
    while len(out) < m:
        cand = rng.uniform(lo, hi, size=(2 * m, 2))
        codes, _ = mvcore.classify_many(polygon, cand)
        keep = codes == mvcore.LOC_INTERIOR
        if margin > 0:
            keep &= geo.boundary_distance(polygon, cand) > margin
        out = np.concatenate((out, cand[keep]))
    return out[:m]


def concave_sample(polygon: Polygon, vertex: int, m: int, rng: np.random.Generator):
    """Interior points within a quarter leg length of a reflex vertex."""
    _, _, delta = concave_legs(polygon, vertex)
    v = polygon.vertices[vertex]
    pts = []
    while len(pts) < m:
        r = 0.25 * delta * np.sqrt(rng.uniform(1e-6, 1.0))
        a = rng.uniform(0, 2 * np.pi)
        x = v + r * np.array([np.cos(a), np.sin(a)])
        if isinstance(geo.locate_point(polygon, x), geo.Interior):
            pts.append(x)
    return np.array(pts)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def selftest(seed: int = 0, cfg: QuadratureConfig = DEFAULT_CONFIG) -> list:
    """Quick run of the interpolation invariants on the standard polygons."""
    rng = np.random.default_rng(seed)
    polys = standard_polygons()
    funcs = (mvcore.saddle(), mvcore.tanhridge())
    results = []

    def record(name, ok, detail):
        results.append(CheckResult(name, bool(ok), detail))

    for pname, P in polys.items():
        X = random_interior_points(P, 50, rng)
        for backend in mvcore.BACKENDS:
            out = mvcore.evaluate_many(P, mvcore.one(), X, cfg, backend)
            dev = np.max(np.abs(out.value - 1))
            record(f"partition of unity [{pname}, {backend}]", dev <= 1e-10, f"max |g-1| = {dev:.2e}")
        a, b, c = rng.normal(size=3)
        lin = mvcore.linear(a, b, c)
        out = mvcore.evaluate_many(P, lin, X, cfg)
        dev = np.max(np.abs(out.value - lin.global_values(X)))
        record(f"linear precision [{pname}]", dev <= 1e-8, f"max |g-f| = {dev:.2e}")

        ph = mvcore.phi_many(P, X)
        record(f"phi positive [{pname}]", np.all(ph > 0), f"min phi = {ph.min():.3e}")

        for f in funcs:
            a1 = mvcore.evaluate_many(P, f, X[:20], cfg, "angular")
            b1 = mvcore.evaluate_many(P, f, X[:20], cfg, "boundary")
            gap = np.abs(a1.value - b1.value)
            bound = 10 * (a1.quad_error + b1.quad_error) + 1e-14
            record(f"backend agreement [{pname}, {f.name}]", np.all(gap <= bound),
                   f"max gap = {gap.max():.2e}")

            worst, mono = 0.0, True
            targets = [EdgeTarget(e, 0.5) for e in range(P.n)] + [VertexTarget(v) for v in range(P.n)]
            for t in targets:
                rep = convergence_probe(P, f, t, absolute=True, backends=("angular",), cfg=cfg)
                mono &= bool(np.all(rep.decreasing("angular", skip_first=True, floor=1e-12)))
                worst = max(worst, float(rep.final_errors("angular").max()))
            record(f"boundary probes [{pname}, {f.name}]", mono and worst < 1e-3,
                   f"monotone = {mono}, worst final error = {worst:.2e}")

            grid = error_grid(P, f, 40, cfg=cfg)
            band = grid.band_mask(P, 0.02 * P.diameter)
            inner = grid.location == mvcore.LOC_INTERIOR
            eb, ei = np.max(grid.abs_err[band], initial=0.0), np.max(grid.abs_err[inner])
            record(f"error vanishes at the boundary [{pname}, {f.name}]", eb < ei,
                   f"band max = {eb:.2e}, interior max = {ei:.2e}")

        for v in range(P.n):
            if P.is_concave(v):
                pts = concave_sample(P, v, 100, rng)
                res = max(concave_identity_residual(P, v, x) for x in pts)
                record(f"reflex angle identity [{pname}, vertex {v}]", res <= 1e-12, f"max residual = {res:.2e}")
    return results
