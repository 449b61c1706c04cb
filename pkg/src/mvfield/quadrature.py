"""Adaptive Gauss-Legendre quadrature.

The workhorse is :func:`integrate_batch`, which integrates many independent
integrands at once by level-synchronous bisection so that every pass is a
single vectorized call of the integrand. :func:`integrate_adaptive` is the
one-integrand convenience wrapper.

Each panel is evaluated with the ``order``-point rule on the whole panel
(Q1), on its two halves (Q2) and on its four quarters (Q4). The halving
difference is applied at both levels, and the error estimate is
``|Q1 - Q2| + |Q2 - Q4|`` plus a rounding floor proportional to the panel's
L1 mass; the accepted value is Q4. The second level guards against the
whole panel and its halves agreeing by accident, which happens when a sharp
feature sits at a panel end and dominates the error of both.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .errors import InputError, NonFiniteIntegrand, UnsupportedOrder

ROUNDING = 4 * np.finfo(float).eps
# hard cap on panels evaluated per integrand; hit only by pathological input
MAX_PANELS_PER_INTEGRAND = 5000
# integrand values held in memory per vectorized call
MAX_NODES_PER_CALL = 1 << 18


@dataclass(frozen=True)
class QuadratureConfig:
    order: int = 16
    tol_rel: float = 1e-10
    max_depth: int = 40
    min_panel: float = 1e-15

    def __post_init__(self):
        if not 2 <= self.order <= 64:
            raise UnsupportedOrder(f"order must be in [2, 64], got {self.order}")
        if not self.tol_rel > 0:
            raise InputError(f"tol_rel must be positive, got {self.tol_rel}")
        if not 1 <= self.max_depth <= 60:
            raise InputError(f"max_depth must be in [1, 60], got {self.max_depth}")
        if not self.min_panel >= 0:
            raise InputError("min_panel must be non-negative")


DEFAULT_CONFIG = QuadratureConfig()


class QuadResult(NamedTuple):
    value: np.ndarray | float
    error: np.ndarray | float
    converged: np.ndarray | bool


@lru_cache(maxsize=None)
def _legendre_rule(order):
    n = order
    i = np.arange(1, n + 1)
    x = np.cos(np.pi * (i - 0.25) / (n + 0.5))
    for _ in range(100):
        p0 = np.ones_like(x)
        p1 = x.copy()
        for k in range(2, n + 1):
            p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
        dp = n * (x * p1 - p0) / (x * x - 1)
        dx = p1 / dp
        x = x - dx
        if np.max(np.abs(dx)) < 1e-16:
            break
    # recompute the derivative at the converged roots
    p0 = np.ones_like(x)
    p1 = x.copy()
    for k in range(2, n + 1):
        p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
    dp = n * (x * p1 - p0) / (x * x - 1)
    w = 2.0 / ((1 - x * x) * dp * dp)

    # initial guesses were descending
    x = x[::-1].copy()
    w = w[::-1].copy()
    # enforce exact symmetry
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    if n % 2:
        x[n // 2] = 0.0
    w *= 2.0 / w.sum()
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes (ascending) and weights of the ``order``-point rule on [-1, 1]."""
    if isinstance(order, bool) or int(order) != order or not 2 <= order <= 64:
        raise UnsupportedOrder(f"order must be an integer in [2, 64], got {order!r}")
    return _legendre_rule(int(order))


def integrate_batch(
    fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
    a,
    b,
    cfg: QuadratureConfig = DEFAULT_CONFIG,
    breaks: Optional[Sequence[Sequence[float]]] = None,
    must_split: Optional[Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]] = None,
    groups: Optional[np.ndarray] = None,
) -> QuadResult:
    """Integrate ``m`` integrands over ``[a[k], b[k]]`` simultaneously.

    ``fn(k, t)`` receives equal-shaped arrays of integrand indices and
    abscissae and returns the integrand values. ``breaks[k]`` optionally
    lists interior breakpoints used as initial panel boundaries (kinks in the
    data). ``must_split(k, lo, hi)`` may flag panels that are geometrically
    inadmissible and must be bisected before they are evaluated. Panels that
    hit ``max_depth`` or ``min_panel`` are accepted and mark their integrand
    as not converged.

    A panel is accepted once its error estimate is below
    ``tol_rel * max(scale_k * len / (b_k - a_k), mass)``, where ``mass`` is the
    panel's integral of ``|fn|`` and ``scale_k = max(|integral|, integral of
    |fn|)``; the accepted total is therefore within ``2 * tol_rel * scale_k``.

    ``groups[k]`` pools the scale of integrands whose sum is what matters
    (the per-edge pieces of one numerator), so that a negligible piece is
    not driven to a relative accuracy that rounding cannot deliver.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    m = a.size
    span = b - a
    if np.any(~(span > 0)):
        raise InputError("integration bounds must satisfy a < b")

    if breaks is None:
        pk = np.arange(m)
        pa = a.copy()
        pb = b.copy()
    else:
        ks, los, his = [], [], []
        for k in range(m):
            inner = np.asarray(breaks[k], dtype=float)
            inner = np.unique(inner[(inner > a[k]) & (inner < b[k])])
            edges = np.concatenate(([a[k]], inner, [b[k]]))
            ks.append(np.full(edges.size - 1, k))
            los.append(edges[:-1])
            his.append(edges[1:])
        pk = np.concatenate(ks)
        pa = np.concatenate(los)
        pb = np.concatenate(his)
    depth = np.zeros(pk.size, dtype=int)

    x, w = gauss_legendre(cfg.order)
    n = x.size
    w2 = np.tile(w, 2)
    w4 = np.tile(w, 4)
    # whole-panel nodes, then the two halves, then the four quarters, on [-1, 1]
    ref = np.concatenate([x] + [(x + c) / 2 for c in (-1, 1)]
                         + [(x + c) / 4 for c in (-3, -1, 1, 3)])

    value = np.zeros(m)
    error = np.zeros(m)
    mass = np.zeros(m)
    converged = np.ones(m, dtype=bool)
    counted = np.zeros(m, dtype=int)
    if groups is None:
        groups = np.arange(m)
    groups = np.asarray(groups)
    ng = int(groups.max()) + 1

    while pk.size:
        length = pb - pa
        stuck = (depth >= cfg.max_depth) | (0.5 * length < cfg.min_panel * span[pk])

        if must_split is not None:
            forced = np.asarray(must_split(pk, pa, pb), dtype=bool) & ~stuck
            if forced.any():
                mid = 0.5 * (pa[forced] + pb[forced])
                keep = ~forced
                pk = np.concatenate((pk[keep], pk[forced], pk[forced]))
                pa, pb = (
                    np.concatenate((pa[keep], pa[forced], mid)),
                    np.concatenate((pb[keep], mid, pb[forced])),
                )
                depth = np.concatenate((depth[keep], depth[forced] + 1, depth[forced] + 1))
                continue

        half = 0.5 * length
        centre = 0.5 * (pa + pb)
        t = centre[:, None] + half[:, None] * ref[None, :]
        vals = np.empty_like(t)
        step = max(1, MAX_NODES_PER_CALL // ref.size)
        for s in range(0, pk.size, step):
            tt = t[s:s + step]
            kk = np.broadcast_to(pk[s:s + step, None], tt.shape)
            vals[s:s + step] = np.asarray(fn(kk.ravel(), tt.ravel()), dtype=float).reshape(tt.shape)
        if not np.all(np.isfinite(vals)):
            raise NonFiniteIntegrand("integrand returned NaN or infinity")

        q1 = half * (vals[:, :n] @ w)
        q2 = 0.5 * half * (vals[:, n:3 * n] @ w2)
        q4 = 0.25 * half * (vals[:, 3 * n:] @ w4)
        l1 = 0.25 * half * (np.abs(vals[:, 3 * n:]) @ w4)
        err = np.abs(q1 - q2) + np.abs(q2 - q4) + ROUNDING * l1
        counted += np.bincount(pk, minlength=m)

        est = np.abs(np.bincount(groups, value + np.bincount(pk, q4, minlength=m), minlength=ng))
        tot = np.bincount(groups, mass + np.bincount(pk, l1, minlength=m), minlength=ng)
        scale = np.maximum(est, tot)[groups]
        # budget: the panel's share of the interval or of the mass, whichever is larger
        ok = err <= cfg.tol_rel * np.maximum(scale[pk] * length / span[pk], l1)
        runaway = counted[pk] > MAX_PANELS_PER_INTEGRAND
        accept = ok | stuck | runaway
        converged[pk[accept & ~ok]] = False

        np.add.at(value, pk[accept], q4[accept])
        np.add.at(error, pk[accept], err[accept])
        np.add.at(mass, pk[accept], l1[accept])

        split = ~accept
        mid = centre[split]
        pk = np.concatenate((pk[split], pk[split]))
        pa, pb = (
            np.concatenate((pa[split], mid)),
            np.concatenate((mid, pb[split])),
        )
        depth = np.concatenate((depth[split] + 1, depth[split] + 1))

    return QuadResult(value, error, converged)


def integrate_adaptive(fn: Callable, a: float, b: float,
                       cfg: QuadratureConfig = DEFAULT_CONFIG) -> QuadResult:
    """Integrate a function of one real variable over ``[a, b]``.

    ``fn`` is called with arrays of abscissae; plain scalar callables are
    vectorized automatically.

    >>> value, err, ok = integrate_adaptive(np.sin, 0.0, np.pi)
    >>> round(float(value), 12), bool(ok)
    (2.0, True)
    """
    if not a < b:
        raise InputError(f"need a < b, got a={a}, b={b}")

    def vectorized(t):
        try:
            out = fn(t)
        except TypeError:
            out = np.vectorize(fn, otypes=[float])(t)
        return np.broadcast_to(np.asarray(out, dtype=float), t.shape)

    res = integrate_batch(lambda k, t: vectorized(t), a, b, cfg)
    return QuadResult(float(res.value[0]), float(res.error[0]), bool(res.converged[0]))
