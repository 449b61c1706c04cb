"""Polygon representation and pointwise geometric predicates.

All predicates are tolerance based. Tolerances are relative to the polygon
diameter:

* ``EPS_GEOM`` for degeneracy (short edges, coincidence with a vertex),
* ``EPS_TAU`` for the dead-band of the edge sign,
* ``EPS_SNAP`` for snapping points onto the boundary.

``EPS_TAU`` is much tighter than ``EPS_SNAP`` so that a point that has not been
snapped to an edge always sees a nonzero sign for that edge.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import (
    CoincidentWithVertex,
    DegenerateEdge,
    InputError,
    RayMissesEdge,
    SelfIntersection,
    TooFewVertices,
)

EPS_GEOM = 1e-12
EPS_TAU = 1e-14
EPS_SNAP = 1e-9


@dataclass(frozen=True, eq=False)
class Polygon:
    """A validated simple polygon with counterclockwise vertices.

    Build instances with :func:`validate_polygon`. ``source_order[i]`` is the
    index, in the caller's original list, of vertex ``i``; it differs from
    ``range(n)`` only when the input was clockwise and got reversed.
    """

    vertices: np.ndarray  # (n, 2)
    directions: np.ndarray  # (n, 2), v[i+1] - v[i]
    lengths: np.ndarray  # (n,)
    normals: np.ndarray  # (n, 2), unit outward
    area: float
    diameter: float
    source_order: tuple

    @property
    def n(self) -> int:
        return len(self.vertices)

    def edge(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        i = self._edge_index(i)
        return self.vertices[i], self.vertices[(i + 1) % self.n]

    def _edge_index(self, i):
        if not -self.n <= i < self.n:
            raise IndexError(f"edge index {i} out of range for {self.n} edges")
        return i % self.n

    def interior_angle(self, i: int) -> float:
        """Interior angle at vertex ``i`` in (0, 2*pi)."""
        incoming = self.directions[i - 1]
        outgoing = self.directions[i]
        turn = np.arctan2(_cross(incoming, outgoing), np.dot(incoming, outgoing))
        return float(np.pi - turn)

    def is_concave(self, i: int) -> bool:
        return _cross(self.directions[i - 1], self.directions[i]) < 0

    def to_json(self) -> str:
        return json.dumps({"vertices": self.vertices.tolist()})


def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def _segments_intersect(p1, p2, q1, q2, tol):
    d1 = _cross(p2 - p1, q1 - p1)
    d2 = _cross(p2 - p1, q2 - p1)
    d3 = _cross(q2 - q1, p1 - q1)
    d4 = _cross(q2 - q1, p2 - q1)
    if ((d1 > tol and d2 < -tol) or (d1 < -tol and d2 > tol)) and \
            ((d3 > tol and d4 < -tol) or (d3 < -tol and d4 > tol)):
        return True
    # touching or collinear overlap
    for c, a, b, d in ((d1, p1, p2, q1), (d2, p1, p2, q2), (d3, q1, q2, p1), (d4, q1, q2, p2)):
        if abs(c) <= tol and _on_segment(d, a, b, tol):
            return True
    return False


def _on_segment(p, a, b, tol):
    d = b - a
    t = np.dot(p - a, d) / np.dot(d, d)
    length = np.sqrt(np.dot(d, d))
    return -tol / length <= t <= 1 + tol / length


def validate_polygon(points: Union[Sequence[Sequence[float]], np.ndarray]) -> Polygon:
    """Validate ``points`` as a simple polygon; clockwise input is reversed.

    >>> validate_polygon([(0, 0), (1, 0), (1, 1), (0, 1)]).area
    1.0
    """
    v = np.array(points, dtype=float)
    if v.ndim != 2 or v.shape[1] != 2:
        raise InputError("expected a list of 2D points")
    if not np.all(np.isfinite(v)):
        raise InputError("vertex coordinates must be finite")
    n = len(v)
    if n < 3:
        raise TooFewVertices(f"need at least 3 vertices, got {n}")

    diff = v[:, None, :] - v[None, :, :]
    diameter = float(np.sqrt((diff ** 2).sum(-1)).max())
    if diameter == 0:
        raise DegenerateEdge("all vertices coincide")

    d = np.roll(v, -1, axis=0) - v
    lengths = np.hypot(d[:, 0], d[:, 1])
    short = np.flatnonzero(lengths <= EPS_GEOM * diameter)
    if short.size:
        raise DegenerateEdge(f"edge {short[0]} has (near) zero length")

    signed_area = 0.5 * float(np.sum(_cross(v, np.roll(v, -1, axis=0))))
    order = tuple(range(n))
    if signed_area < 0:
        v = v[::-1].copy()
        order = tuple(reversed(order))
        signed_area = -signed_area

    tol = EPS_GEOM * diameter * diameter
    for i in range(n):
        for j in range(i + 1, n):
            adjacent = j == i + 1 or (i == 0 and j == n - 1)
            p1, p2 = v[i], v[(i + 1) % n]
            q1, q2 = v[j], v[(j + 1) % n]
            if adjacent:
                # adjacent edges may only share their common vertex
                if i == 0 and j == n - 1:
                    p1, p2, q1, q2 = q1, q2, p1, p2
                a, shared, b = p1, p2, q2
                if abs(_cross(shared - a, b - shared)) <= tol and np.dot(shared - a, b - shared) < 0:
                    raise SelfIntersection(i, j)
            elif _segments_intersect(p1, p2, q1, q2, tol):
                raise SelfIntersection(i, j)
    if signed_area <= tol:
        raise DegenerateEdge("polygon has zero area")

    d = np.roll(v, -1, axis=0) - v
    lengths = np.hypot(d[:, 0], d[:, 1])
    normals = np.column_stack((d[:, 1], -d[:, 0])) / lengths[:, None]
    for arr in (v, d, lengths, normals):
        arr.setflags(write=False)
    return Polygon(v, d, lengths, normals, signed_area, diameter, order)


def load_polygon(path) -> Polygon:
    """Read ``{"vertices": [[x, y], ...]}`` from a JSON file."""
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict) or "vertices" not in data:
        raise InputError(f"{path}: expected an object with a 'vertices' list")
    return validate_polygon(data["vertices"])


def signed_distance(polygon: Polygon, edge: int, x) -> float:
    """``(y - x) . n_e`` for a point ``y`` on the edge; positive on the interior side."""
    i = polygon._edge_index(edge)
    return float(np.dot(polygon.vertices[i] - np.asarray(x, dtype=float), polygon.normals[i]))


def sign_tau(polygon: Polygon, edge: int, x) -> int:
    h = signed_distance(polygon, edge, x)
    if abs(h) <= EPS_TAU * polygon.diameter:
        return 0
    return 1 if h > 0 else -1


def subtended_angle(polygon: Polygon, edge: int, x) -> float:
    """Angle at ``x`` of the triangle formed with the edge endpoints, in [0, pi)."""
    v1, v2 = polygon.edge(edge)
    x = np.asarray(x, dtype=float)
    a, b = v1 - x, v2 - x
    tol = EPS_GEOM * polygon.diameter
    if np.hypot(*a) <= tol or np.hypot(*b) <= tol:
        raise CoincidentWithVertex(f"point {x.tolist()} coincides with an endpoint of edge {edge}")
    return float(np.arctan2(abs(_cross(a, b)), np.dot(a, b)))


@dataclass(frozen=True)
class Interior:
    pass


@dataclass(frozen=True)
class Exterior:
    pass


@dataclass(frozen=True)
class OnEdge:
    edge: int
    t: float


@dataclass(frozen=True)
class AtVertex:
    vertex: int


PointLocation = Union[Interior, Exterior, OnEdge, AtVertex]


def _segment_distance(polygon, x):
    """Distances from ``x`` to every edge, and the clamped edge parameters."""
    rel = x - polygon.vertices
    t = np.einsum("ij,ij->i", rel, polygon.directions) / polygon.lengths ** 2
    t = np.clip(t, 0.0, 1.0)
    foot = polygon.vertices + t[:, None] * polygon.directions
    return np.hypot(*(x - foot).T), t


def winding_number(polygon: Polygon, x) -> int:
    x = np.asarray(x, dtype=float)
    v = polygon.vertices
    w = np.roll(v, -1, axis=0)
    left = _cross(w - v, x - v)
    up = (v[:, 1] <= x[1]) & (w[:, 1] > x[1]) & (left > 0)
    down = (v[:, 1] > x[1]) & (w[:, 1] <= x[1]) & (left < 0)
    return int(up.sum() - down.sum())


def locate_point(polygon: Polygon, x) -> PointLocation:
    """Classify ``x``; points within ``EPS_SNAP * diameter`` of the boundary snap to it.

    >>> sq = validate_polygon([(0, 0), (1, 0), (1, 1), (0, 1)])
    >>> locate_point(sq, (0.5, 0.0))
    OnEdge(edge=0, t=0.5)
    """
    x = np.asarray(x, dtype=float)
    snap = EPS_SNAP * polygon.diameter
    dv = np.hypot(*(polygon.vertices - x).T)
    i = int(np.argmin(dv))
    if dv[i] <= snap:
        return AtVertex(i)
    dist, t = _segment_distance(polygon, x)
    e = int(np.argmin(dist))
    if dist[e] <= snap:
        return OnEdge(e, float(t[e]))
    return Interior() if winding_number(polygon, x) != 0 else Exterior()


def locate_many(polygon: Polygon, points) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized :func:`locate_point`.

    Returns ``(kind, index, t)``: ``kind`` is 0 interior, 1 on an edge, 2 at
    a vertex, 3 exterior; ``index`` is the edge or vertex (-1 otherwise) and
    ``t`` the edge parameter (NaN unless on an edge).
    """
    p = np.atleast_2d(np.asarray(points, dtype=float))
    m = len(p)
    v = polygon.vertices
    snap = EPS_SNAP * polygon.diameter
    rel = p[:, None, :] - v[None, :, :]  # (m, n, 2)
    dv = np.hypot(rel[..., 0], rel[..., 1])
    t = np.clip(np.einsum("mij,ij->mi", rel, polygon.directions) / polygon.lengths ** 2, 0.0, 1.0)
    foot = v[None] + t[..., None] * polygon.directions[None]
    de = np.hypot(*(p[:, None, :] - foot).transpose(2, 0, 1))

    kind = np.full(m, 3)
    index = np.full(m, -1)
    tt = np.full(m, np.nan)

    w = np.roll(v, -1, axis=0)
    left = _cross((w - v)[None], rel)
    y = p[:, 1:2]
    up = (v[None, :, 1] <= y) & (w[None, :, 1] > y) & (left > 0)
    down = (v[None, :, 1] > y) & (w[None, :, 1] <= y) & (left < 0)
    inside = (up.sum(1) - down.sum(1)) != 0
    kind[inside] = 0

    ie = np.argmin(de, axis=1)
    on_edge = de[np.arange(m), ie] <= snap
    kind[on_edge] = 1
    index[on_edge] = ie[on_edge]
    tt[on_edge] = t[np.flatnonzero(on_edge), ie[on_edge]]

    iv = np.argmin(dv, axis=1)
    at_vertex = dv[np.arange(m), iv] <= snap
    kind[at_vertex] = 2
    index[at_vertex] = iv[at_vertex]
    tt[at_vertex] = np.nan
    return kind, index, tt


def boundary_distance(polygon: Polygon, points) -> np.ndarray:
    """Distance from each of ``points`` (m, 2) to the polygon boundary."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    rel = p[:, None, :] - polygon.vertices[None, :, :]
    t = np.einsum("mij,ij->mi", rel, polygon.directions) / polygon.lengths ** 2
    t = np.clip(t, 0.0, 1.0)
    foot = polygon.vertices[None] + t[..., None] * polygon.directions[None]
    return np.sqrt(((p[:, None, :] - foot) ** 2).sum(-1)).min(axis=1)


def arc_point(polygon: Polygon, edge: int, x, mu) -> np.ndarray:
    """Point of the edge hit by the ray from ``x`` in unit direction ``mu``."""
    i = polygon._edge_index(edge)
    x = np.asarray(x, dtype=float)
    mu = np.asarray(mu, dtype=float)
    h = signed_distance(polygon, i, x)
    if abs(h) <= EPS_TAU * polygon.diameter:
        raise RayMissesEdge("point lies on the supporting line of the edge")
    v1, v2 = polygon.edge(i)
    # closed-arc membership, with angular slack
    a, b = v1 - x, v2 - x
    total = np.arctan2(abs(_cross(a, b)), np.dot(a, b))
    to_a = np.arctan2(abs(_cross(a, mu)), np.dot(a, mu))
    to_b = np.arctan2(abs(_cross(mu, b)), np.dot(mu, b))
    if to_a + to_b > total + 1e-9:
        raise RayMissesEdge(f"direction {mu.tolist()} misses edge {edge}")
    s = h / np.dot(mu, polygon.normals[i])
    return x + s * mu
