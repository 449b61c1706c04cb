"""Mean value weights, coordinates and the transfinite mean value interpolant.

For a point ``x`` inside the polygon the interpolant is

    g(x) = sum_e tau_e(x) I_e(x; f) / phi(x),   phi(x) = sum_e tau_e(x) I_e(x)

where ``I_e(x; f)`` integrates ``f(y) / |y - x|`` over the directions from
``x`` towards edge ``e`` and ``I_e(x) = I_e(x; 1)`` has the closed form
``tan(alpha_e / 2) * (1/|v1 - x| + 1/|v2 - x|)``.

Two numerators are available:

* ``angular``: integrate over the angle swept from ``x`` across the edge,
  mapping each direction to the edge by a ray intersection.
* ``boundary``: integrate over arclength with the kernel
  ``f(y) (y - x).n_e / |y - x|**3``, obtained from the angular form by the
  substitution ``dmu = |h_e| ds / |y - x|**2``. No ray intersections.

The denominator always uses the closed form.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import geometry as geo
from .errors import (
    ArityMismatch,
    CoincidentWithVertex,
    ContinuityViolation,
    ExteriorPoint,
    FunctionNotExtendable,
    InputError,
    OnBoundary,
    ParseError,
)
from .geometry import Polygon
from .quadrature import DEFAULT_CONFIG, QuadratureConfig, integrate_batch

EPS_CONT = 1e-9
BACKENDS = ("angular", "boundary")
# points per vectorized batch; bounds peak memory of the quadrature passes
CHUNK = 256


# -- boundary data -----------------------------------------------------------

class BoundaryFunction:
    """Continuous data on the polygon boundary, one function per edge.

    ``edge_values(polygon, e, t)`` evaluates ``f_e(t)`` for arrays of edge
    indices and parameters, ``t`` linear in arclength from the edge start.
    """

    extendable = False

    def edge_values(self, polygon: Polygon, e, t) -> np.ndarray:
        raise NotImplementedError

    def breakpoints(self, polygon: Polygon, e: int) -> np.ndarray:
        return np.empty(0)

    def vertex_value(self, polygon: Polygon, i: int) -> float:
        return float(self.edge_values(polygon, np.array([i % polygon.n]), np.zeros(1))[0])

    def global_values(self, points) -> np.ndarray:
        raise FunctionNotExtendable(f"{type(self).__name__} data has no extension off the boundary")

    def check(self, polygon: Polygon) -> None:
        """Raise unless the data is finite and continuous at every vertex."""
        n = polygon.n
        e = np.arange(n)
        ends = self.edge_values(polygon, e, np.ones(n))
        starts = self.edge_values(polygon, np.roll(e, -1), np.zeros(n))
        if not (np.all(np.isfinite(ends)) and np.all(np.isfinite(starts))):
            raise InputError("boundary data is not finite at the vertices")
        scale = 1.0 + max(np.abs(ends).max(), np.abs(starts).max())
        gap = np.abs(ends - starts)
        bad = np.flatnonzero(gap > EPS_CONT * scale)
        if bad.size:
            i = int(bad[0])
            raise ContinuityViolation(
                f"data jumps by {gap[i]:.3g} at vertex {(i + 1) % n}")


@dataclass(frozen=True)
class Builtin(BoundaryFunction):
    """Restriction to the boundary of a closed form ``func(x, y)``."""

    name: str
    func: Callable[[np.ndarray, np.ndarray], np.ndarray] = field(repr=False, compare=False)

    extendable = True

    def edge_values(self, polygon, e, t):
        e = np.asarray(e)
        t = np.asarray(t, dtype=float)
        px = polygon.vertices[:, 0][e] + t * polygon.directions[:, 0][e]
        py = polygon.vertices[:, 1][e] + t * polygon.directions[:, 1][e]
        return np.asarray(self.func(px, py), dtype=float) + np.zeros_like(t)

    def global_values(self, points):
        p = np.asarray(points, dtype=float)
        return np.asarray(self.func(p[..., 0], p[..., 1]), dtype=float) + np.zeros(p.shape[:-1])


def one() -> Builtin:
    return Builtin("one", lambda x, y: np.ones_like(x))


def linear(a: float, b: float, c: float) -> Builtin:
    return Builtin(f"linear:{a!r},{b!r},{c!r}", lambda x, y: a + b * x + c * y)


def saddle() -> Builtin:
    return Builtin("saddle", lambda x, y: x * x - y * y)


def tanhridge() -> Builtin:
    return Builtin("tanhridge", lambda x, y: (np.tanh(9 * x - 9 * y) + 1) / 9)


BUILTINS = {"one": one, "saddle": saddle, "tanhridge": tanhridge}


@dataclass(frozen=True)
class PiecewiseLinear(BoundaryFunction):
    """Vertex values, linearly interpolated along each edge (polygon vertex order)."""

    values: tuple

    def edge_values(self, polygon, e, t):
        f = np.asarray(self.values, dtype=float)
        e = np.asarray(e)
        t = np.asarray(t, dtype=float)
        return f[e] * (1 - t) + f[(e + 1) % len(f)] * t

    def vertex_value(self, polygon, i):
        return float(self.values[i % len(self.values)])

    def check(self, polygon):
        if len(self.values) != polygon.n:
            raise ArityMismatch(
                f"{len(self.values)} vertex values for a polygon with {polygon.n} vertices")
        super().check(polygon)


@dataclass(frozen=True)
class Tabulated(BoundaryFunction):
    """Equally spaced samples per edge (endpoints included), linear in between."""

    samples: tuple  # one tuple of floats per edge, polygon edge order

    def edge_values(self, polygon, e, t):
        e = np.asarray(e)
        t = np.asarray(t, dtype=float)
        out = np.empty(np.broadcast(e, t).shape)
        e, t = np.broadcast_arrays(e, t)
        for k in np.unique(e):
            sel = e == k
            s = np.asarray(self.samples[k], dtype=float)
            out[sel] = np.interp(t[sel], np.linspace(0, 1, s.size), s)
        return out

    def breakpoints(self, polygon, e):
        m = len(self.samples[e])
        return np.linspace(0, 1, m)[1:-1]

    def check(self, polygon):
        if len(self.samples) != polygon.n:
            raise ArityMismatch(
                f"{len(self.samples)} sample lists for a polygon with {polygon.n} edges")
        if any(len(s) < 2 for s in self.samples):
            raise InputError("each edge needs at least two samples")
        super().check(polygon)


def _reorder_vertex_values(polygon, values):
    return tuple(float(values[j]) for j in polygon.source_order)


def _reorder_edge_samples(polygon, samples):
    n = polygon.n
    order = polygon.source_order
    out = []
    for i in range(n):
        a, b = order[i], order[(i + 1) % n]
        if b == (a + 1) % n:
            out.append(tuple(float(s) for s in samples[a]))
        else:
            out.append(tuple(float(s) for s in reversed(samples[b])))
    return tuple(out)


def parse_function_spec(spec: str, polygon: Polygon) -> BoundaryFunction:
    """Parse a boundary-data spec and validate it against ``polygon``.

    Grammar: ``one | saddle | tanhridge | linear:a,b,c | pwl:v0,v1,... |
    table:PATH``. Vertex values and tables refer to the vertex order of the
    polygon file as given, even if the polygon was reversed on load.
    """
    spec = spec.strip()
    kind, _, arg = spec.partition(":")
    try:
        if kind in BUILTINS and not arg:
            f = BUILTINS[kind]()
        elif kind == "linear":
            nums = [float(s) for s in arg.split(",")]
            if len(nums) != 3:
                raise ParseError(f"linear needs 3 coefficients, got {len(nums)}")
            f = linear(*nums)
        elif kind == "pwl":
            nums = [float(s) for s in arg.split(",")]
            if len(nums) != polygon.n:
                raise ArityMismatch(
                    f"{len(nums)} vertex values for a polygon with {polygon.n} vertices")
            f = PiecewiseLinear(_reorder_vertex_values(polygon, nums))
        elif kind == "table":
            if not arg:
                raise ParseError("table: needs a file path")
            with open(arg) as fh:
                data = json.load(fh)
            edges = data["edges"] if isinstance(data, dict) else data
            if len(edges) != polygon.n:
                raise ArityMismatch(
                    f"{len(edges)} sample lists for a polygon with {polygon.n} edges")
            f = Tabulated(_reorder_edge_samples(polygon, [[float(v) for v in s] for s in edges]))
        else:
            raise ParseError(f"unknown function spec {spec!r}")
    except ValueError as exc:
        if isinstance(exc, InputError):
            raise
        raise ParseError(f"bad number in {spec!r}: {exc}") from None
    except (OSError, KeyError, TypeError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read table for {spec!r}: {exc}") from None
    f.check(polygon)
    return f


# -- closed forms --------------------------------------------------------------

def _tan_half(cross, dot, ra, rb):
    # tan(alpha/2) for alpha = atan2(|cross|, dot), using the branch without cancellation
    c = np.abs(cross)
    rr = ra * rb
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(dot >= 0, c / (rr + dot), (rr - dot) / c)


def _weights(polygon: Polygon, points):
    """Signs ``tau`` (m, n), ``tan(alpha/2)`` (m, n) and vertex distances (m, n)."""
    X = np.atleast_2d(np.asarray(points, dtype=float))
    a = polygon.vertices[None, :, :] - X[:, None, :]
    b = np.roll(a, -1, axis=1)
    ra = np.hypot(a[..., 0], a[..., 1])
    rb = np.roll(ra, -1, axis=1)
    cross = a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
    dot = np.einsum("mij,mij->mi", a, b)
    h = np.einsum("mij,ij->mi", a, polygon.normals)
    tau = np.where(np.abs(h) <= geo.EPS_TAU * polygon.diameter, 0, np.sign(h)).astype(int)
    th = np.where(tau == 0, 0.0, _tan_half(cross, dot, ra, rb))
    return tau, th, ra


def _check_off_vertices(polygon, points):
    X = np.atleast_2d(np.asarray(points, dtype=float))
    d = np.hypot(*(polygon.vertices[None] - X[:, None]).transpose(2, 0, 1))
    if np.any(d <= geo.EPS_GEOM * polygon.diameter):
        raise CoincidentWithVertex("point coincides with a polygon vertex")


def edge_weight(polygon: Polygon, edge: int, x) -> float:
    """Closed-form ``I_e(x)``; zero when ``x`` is on the edge's supporting line."""
    i = polygon._edge_index(edge)
    v1, v2 = polygon.edge(i)
    x = np.asarray(x, dtype=float)
    tol = geo.EPS_GEOM * polygon.diameter
    r1, r2 = np.hypot(*(v1 - x)), np.hypot(*(v2 - x))
    if r1 <= tol or r2 <= tol:
        raise CoincidentWithVertex(f"point {x.tolist()} coincides with an endpoint of edge {edge}")
    tau, th, ra = _weights(polygon, x)
    if tau[0, i] == 0:
        return 0.0
    return float(th[0, i] * (1 / r1 + 1 / r2))


def phi_many(polygon: Polygon, points) -> np.ndarray:
    tau, th, ra = _weights(polygon, points)
    rb = np.roll(ra, -1, axis=1)
    with np.errstate(divide="ignore"):
        return np.sum(tau * th * (1 / ra + 1 / rb), axis=1)


def phi(polygon: Polygon, x) -> float:
    """``sum_e tau_e(x) I_e(x)``; positive everywhere inside the polygon."""
    _check_off_vertices(polygon, x)
    return float(phi_many(polygon, x)[0])


def mv_coordinates_many(polygon: Polygon, points) -> np.ndarray:
    tau, th, ra = _weights(polygon, points)
    st = tau * th
    w = (np.roll(st, 1, axis=1) + st) / ra
    return w / w.sum(axis=1, keepdims=True)


def mv_coordinates(polygon: Polygon, x) -> np.ndarray:
    """Mean value coordinates of ``x``, one weight per vertex, summing to one.

    Points on an edge get the linear two-vertex weights.
    """
    loc = geo.locate_point(polygon, x)
    if isinstance(loc, geo.AtVertex):
        raise CoincidentWithVertex(f"point coincides with vertex {loc.vertex}")
    if isinstance(loc, geo.Exterior):
        raise ExteriorPoint(f"point {list(x)} is outside the polygon")
    if isinstance(loc, geo.OnEdge):
        lam = np.zeros(polygon.n)
        lam[loc.edge] = 1 - loc.t
        lam[(loc.edge + 1) % polygon.n] = loc.t
        return lam
    return mv_coordinates_many(polygon, x)[0]


# -- transfinite numerators -----------------------------------------------------

class _EdgeView:
    """Per-integrand geometry for (point, edge) pairs with nonzero sign, as flat arrays."""

    def __init__(self, polygon, X):
        tau, _, _ = _weights(polygon, X)
        self.pi, self.ei = np.nonzero(tau)
        self.tau = tau[self.pi, self.ei]
        x = X[self.pi]
        v1 = polygon.vertices[self.ei]
        d = polygon.directions[self.ei]
        nrm = polygon.normals[self.ei]
        self.L = polygon.lengths[self.ei]
        self.L2 = self.L ** 2
        # a = v1 - x
        self.ax, self.ay = v1[:, 0] - x[:, 0], v1[:, 1] - x[:, 1]
        self.dx, self.dy = d[:, 0], d[:, 1]
        self.h = self.ax * nrm[:, 0] + self.ay * nrm[:, 1]
        self.foot = -(self.ax * self.dx + self.ay * self.dy) / self.L2

    def too_long(self, j, lo, hi):
        """Flag edge pieces ``[lo, hi]`` longer than twice their distance from
        the evaluation point; the integrands vary on that scale."""
        lo, hi = np.minimum(lo, hi), np.maximum(lo, hi)
        ax, ay, dx, dy = self.ax[j], self.ay[j], self.dx[j], self.dy[j]
        ends = np.minimum(np.hypot(ax + lo * dx, ay + lo * dy), np.hypot(ax + hi * dx, ay + hi * dy))
        foot = self.foot[j]
        inside = (foot >= lo) & (foot <= hi)
        dist = np.where(inside, np.abs(self.h[j]), ends)
        return (hi - lo) * self.L[j] > 2 * dist


def _angular_numerators(polygon, f, X, cfg):
    g = _EdgeView(polygon, X)
    ax, ay = g.ax, g.ay
    bx, by = ax + g.dx, ay + g.dy
    ra = np.hypot(ax, ay)
    cross = ax * by - ay * bx
    alpha = np.arctan2(np.abs(cross), ax * bx + ay * by)
    # unit direction to v1 and its rotation towards v2
    ux, uy = ax / ra, ay / ra
    rot = np.sign(cross)
    px, py = -rot * uy, rot * ux
    nx, ny = polygon.normals[g.ei, 0], polygon.normals[g.ei, 1]
    u_n, p_n = ux * nx + uy * ny, px * nx + py * ny
    u_d, p_d = ux * g.dx + uy * g.dy, px * g.dx + py * g.dy

    breaks = None
    if not isinstance(f, (Builtin, PiecewiseLinear)):
        breaks = []
        for k in range(g.ei.size):
            tb = f.breakpoints(polygon, int(g.ei[k]))
            qx, qy = ax[k] + tb * g.dx[k], ay[k] + tb * g.dy[k]
            breaks.append(np.arctan2(np.abs(ax[k] * qy - ay[k] * qx), ax[k] * qx + ay[k] * qy))

    def ray_hit(k, theta):
        # distance along the ray, and edge parameter of the hit point
        c, s = np.cos(theta), np.sin(theta)
        r = g.h[k] / (c * u_n[k] + s * p_n[k])
        t = g.foot[k] + r * (c * u_d[k] + s * p_d[k]) / g.L2[k]
        return r, np.clip(t, 0.0, 1.0)

    def integrand(k, theta):
        r, t = ray_hit(k, theta)
        return f.edge_values(polygon, g.ei[k], t) / r

    def must_split(k, lo, hi):
        return g.too_long(k, ray_hit(k, lo)[1], ray_hit(k, hi)[1])

    res = integrate_batch(integrand, np.zeros(g.ei.size), alpha, cfg, breaks=breaks,
                          must_split=must_split, groups=g.pi)
    return _gather(X.shape[0], g.pi, g.tau * res.value, res.error, res.converged)


def _boundary_numerators(polygon, f, X, cfg, with_denominator=True):
    g = _EdgeView(polygon, X)
    K = g.ei.size
    reps = 2 if with_denominator else 1
    breaks = None
    if not isinstance(f, (Builtin, PiecewiseLinear)):
        breaks = [f.breakpoints(polygon, int(e)) for e in g.ei] * reps
    hL = g.h * g.L

    def integrand(k, t):
        j = k % K
        rx = g.ax[j] + t * g.dx[j]
        ry = g.ay[j] + t * g.dy[j]
        r2 = rx * rx + ry * ry
        kernel = hL[j] / (r2 * np.sqrt(r2))
        numer = k < K
        if numer.all():
            return f.edge_values(polygon, g.ei[j], t) * kernel
        out = kernel.copy()
        out[numer] *= f.edge_values(polygon, g.ei[j[numer]], t[numer])
        return out

    def must_split(k, lo, hi):
        return g.too_long(k % K, lo, hi)

    m = X.shape[0]
    res = integrate_batch(integrand, np.zeros(reps * K), np.ones(reps * K), cfg,
                          breaks=breaks, must_split=must_split,
                          groups=np.concatenate((g.pi, g.pi + m))[:reps * K])
    num = _gather(m, g.pi, res.value[:K], res.error[:K], res.converged[:K])
    if not with_denominator:
        return num, None
    den = _gather(m, g.pi, res.value[K:], res.error[K:], res.converged[K:])
    return num, den


def _gather(m, pi, value, error, converged):
    out_v = np.bincount(pi, value, minlength=m)
    out_e = np.bincount(pi, error, minlength=m)
    out_c = np.ones(m, dtype=bool)
    out_c[pi[~converged]] = False
    return out_v, out_e, out_c


# -- evaluation ---------------------------------------------------------------

@dataclass(frozen=True)
class EvalOutcome:
    value: float
    phi: float
    quad_error: float
    converged: bool
    # boundary backend only: denominator integrated by quadrature, and its error
    phi_quadrature: Optional[float] = None
    phi_quadrature_error: Optional[float] = None


LOC_INTERIOR, LOC_BOUNDARY, LOC_EXTERIOR = 0, 1, 2


@dataclass
class BatchOutcome:
    """Per-point arrays from :func:`evaluate_many`. ``location`` uses the LOC_* codes;
    exterior points carry NaN values."""

    value: np.ndarray
    phi: np.ndarray
    quad_error: np.ndarray
    converged: np.ndarray
    location: np.ndarray
    phi_quadrature: Optional[np.ndarray] = None
    phi_quadrature_error: Optional[np.ndarray] = None


def _interior_batch(polygon, f, X, cfg, backend):
    ph = phi_many(polygon, X)
    if backend == "angular":
        (num, err, conv) = _angular_numerators(polygon, f, X, cfg)
        return num / ph, ph, err / ph, conv, None, None
    if backend == "boundary":
        (num, err, conv), (den, den_err, den_conv) = _boundary_numerators(polygon, f, X, cfg)
        return num / ph, ph, err / ph, conv & den_conv, den, den_err
    raise InputError(f"unknown backend {backend!r}; choose from {BACKENDS}")


def _require_interior(polygon, x):
    loc = geo.locate_point(polygon, x)
    if isinstance(loc, geo.Exterior):
        raise ExteriorPoint(f"point {list(np.asarray(x, dtype=float))} is outside the polygon")
    if not isinstance(loc, geo.Interior):
        raise OnBoundary(f"point {list(np.asarray(x, dtype=float))} is on the boundary ({loc})")


def _interpolate(polygon, f, x, cfg, backend):
    _require_interior(polygon, x)
    X = np.atleast_2d(np.asarray(x, dtype=float))
    value, ph, err, conv, den, den_err = _interior_batch(polygon, f, X, cfg, backend)
    return EvalOutcome(
        float(value[0]), float(ph[0]), float(err[0]), bool(conv[0]),
        None if den is None else float(den[0]),
        None if den_err is None else float(den_err[0]),
    )


def interpolate_angular(polygon: Polygon, f: BoundaryFunction, x,
                        cfg: QuadratureConfig = DEFAULT_CONFIG) -> EvalOutcome:
    """Interpolant at an interior point, numerator integrated over arc angle."""
    return _interpolate(polygon, f, x, cfg, "angular")


def interpolate_boundary_integral(polygon: Polygon, f: BoundaryFunction, x,
                                  cfg: QuadratureConfig = DEFAULT_CONFIG) -> EvalOutcome:
    """Interpolant at an interior point, numerator integrated over arclength."""
    return _interpolate(polygon, f, x, cfg, "boundary")


def _boundary_value(polygon, f, loc):
    if isinstance(loc, geo.AtVertex):
        return f.vertex_value(polygon, loc.vertex)
    return float(f.edge_values(polygon, np.array([loc.edge]), np.array([loc.t]))[0])


def evaluate(polygon: Polygon, f: BoundaryFunction, x,
             cfg: QuadratureConfig = DEFAULT_CONFIG, backend: str = "angular") -> EvalOutcome:
    """Interpolant anywhere in the closed polygon; boundary points return the data."""
    if backend not in BACKENDS:
        raise InputError(f"unknown backend {backend!r}; choose from {BACKENDS}")
    loc = geo.locate_point(polygon, x)
    if isinstance(loc, geo.Exterior):
        raise ExteriorPoint(f"point {list(np.asarray(x, dtype=float))} is outside the polygon")
    if isinstance(loc, (geo.OnEdge, geo.AtVertex)):
        return EvalOutcome(_boundary_value(polygon, f, loc), float("inf"), 0.0, True)
    return _interpolate(polygon, f, x, cfg, backend)


def classify_many(polygon: Polygon, points) -> tuple[np.ndarray, list]:
    """LOC_* code per point, and the boundary locations (None for non-boundary)."""
    kind, index, t = geo.locate_many(polygon, points)
    codes = np.choose(kind, [LOC_INTERIOR, LOC_BOUNDARY, LOC_BOUNDARY, LOC_EXTERIOR])
    locs = [None] * len(kind)
    for i in np.flatnonzero(kind == 1):
        locs[i] = geo.OnEdge(int(index[i]), float(t[i]))
    for i in np.flatnonzero(kind == 2):
        locs[i] = geo.AtVertex(int(index[i]))
    return codes, locs


def evaluate_many(polygon: Polygon, f: BoundaryFunction, points,
                  cfg: QuadratureConfig = DEFAULT_CONFIG, backend: str = "angular",
                  chunk: int = CHUNK) -> BatchOutcome:
    """Vectorized :func:`evaluate` over an (m, 2) array of points.

    Exterior points are not an error here; they are reported with
    ``location == LOC_EXTERIOR`` and NaN values.
    """
    if backend not in BACKENDS:
        raise InputError(f"unknown backend {backend!r}; choose from {BACKENDS}")
    f.check(polygon)
    P = np.atleast_2d(np.asarray(points, dtype=float))
    m = len(P)
    codes, locs = classify_many(polygon, P)
    value = np.full(m, np.nan)
    ph = np.full(m, np.nan)
    err = np.zeros(m)
    conv = np.ones(m, dtype=bool)
    den = np.full(m, np.nan) if backend == "boundary" else None
    den_err = np.full(m, np.nan) if backend == "boundary" else None

    for i in np.flatnonzero(codes == LOC_BOUNDARY):
        value[i] = _boundary_value(polygon, f, locs[i])
        ph[i] = np.inf

    idx = np.flatnonzero(codes == LOC_INTERIOR)
    for start in range(0, idx.size, chunk):
        sel = idx[start:start + chunk]
        v, p_, e_, c_, dq, dqe = _interior_batch(polygon, f, P[sel], cfg, backend)
        value[sel], ph[sel], err[sel], conv[sel] = v, p_, e_, c_
        if den is not None:
            den[sel], den_err[sel] = dq, dqe
    return BatchOutcome(value, ph, err, conv, codes, den, den_err)
