"""Transfinite mean value interpolation on simple polygons.

The interpolant of boundary data ``f`` is ``g(x) = sum_e tau_e I_e(x; f) / phi(x)``,
with ``I_e`` the per-edge integral of ``f / r`` over the arc of directions
that see edge ``e`` from ``x``. The denominator ``phi`` has a closed form;
numerators are integrated with adaptive Gauss-Legendre quadrature.
"""
from .errors import InputError, MVError
from .geometry import Polygon, load_polygon, locate_point, validate_polygon
from .mvcore import (
    BoundaryFunction,
    edge_weight,
    evaluate,
    evaluate_many,
    interpolate_angular,
    interpolate_boundary_integral,
    mv_coordinates,
    parse_function_spec,
    phi,
)
from .quadrature import QuadratureConfig, integrate_adaptive

__all__ = [
    "BoundaryFunction", "InputError", "MVError", "Polygon", "QuadratureConfig",
    "edge_weight", "evaluate", "evaluate_many", "integrate_adaptive", "interpolate_angular",
    "interpolate_boundary_integral", "load_polygon", "locate_point", "mv_coordinates",
    "parse_function_spec", "phi", "validate_polygon",
]
__version__ = "0.1.0"
