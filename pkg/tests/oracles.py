"""Independent reference computations built on scipy, used only by the tests."""
import math

import numpy as np
from scipy.integrate import quad


def ray_hit(v1, v2, x, theta):
    """Point where the ray from x at angle theta meets the line through v1, v2."""
    mu = np.array([math.cos(theta), math.sin(theta)])
    A = np.column_stack((mu, v1 - v2))
    s, _ = np.linalg.solve(A, v1 - x)
    return x + s * mu, s


def arc_integral(vertices, e, x, f=None):
    """Signed ``tau_e * I_e(x; f)`` straight from the angular definition.

    ``f`` is a function of a 2D point; ``None`` means ``f = 1``.
    """
    v = np.asarray(vertices, dtype=float)
    x = np.asarray(x, dtype=float)
    v1, v2 = v[e], v[(e + 1) % len(v)]
    a, b = v1 - x, v2 - x
    cross = a[0] * b[1] - a[1] * b[0]
    if cross == 0:
        return 0.0
    t0 = math.atan2(a[1], a[0])
    sweep = math.atan2(cross, a @ b)  # signed, |sweep| < pi

    def integrand(u):
        y, s = ray_hit(v1, v2, x, t0 + u * sweep)
        val = 1.0 if f is None else f(y)
        return val / s

    val, _ = quad(integrand, 0.0, 1.0, epsabs=1e-15, epsrel=1e-12, limit=500)
    # sweep carries the sign tau: +1 when the edge is seen counterclockwise from x
    return sweep * val


def interpolant(vertices, x, f):
    num = sum(arc_integral(vertices, e, x, f) for e in range(len(vertices)))
    den = sum(arc_integral(vertices, e, x) for e in range(len(vertices)))
    return num / den
