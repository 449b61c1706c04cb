"""Exception hierarchy.

Input problems (bad polygons, bad specs, points outside the domain) derive
from ``InputError``; the CLI maps those to exit status 2.
"""


class MVError(Exception):
    """Base class for all package errors."""


class InputError(MVError, ValueError):
    pass


class TooFewVertices(InputError):
    pass


class DegenerateEdge(InputError):
    pass


class SelfIntersection(InputError):
    def __init__(self, i, j):
        super().__init__(f"edges {i} and {j} intersect")
        self.edges = (i, j)


class CoincidentWithVertex(InputError):
    pass


class RayMissesEdge(InputError):
    pass


class UnsupportedOrder(InputError):
    pass


class ExteriorPoint(InputError):
    pass


class OnBoundary(InputError):
    pass


class TargetNotOnBoundary(InputError):
    pass


class ProbeExitsDomain(InputError):
    pass


class VertexNotConcave(InputError):
    pass


class FunctionNotExtendable(InputError):
    pass


class ParseError(InputError):
    pass


class ContinuityViolation(InputError):
    pass


class ArityMismatch(InputError):
    pass


class NonFiniteIntegrand(MVError, ArithmeticError):
    pass


class QuadratureNotConverged(MVError, ArithmeticError):
    """Raised only in strict mode; otherwise non-convergence is a flag."""
