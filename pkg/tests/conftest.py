import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from mvfield import geometry as geo
from mvfield import harness

settings.register_profile(
    "default", max_examples=40, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

ACCEPTANCE_LINES = []


def star_polygon(rng, n=None, jitter=0.6):
    """Random simple polygon, star-shaped about the origin and usually non-convex."""
    n = int(rng.integers(3, 12)) if n is None else n
    step = 2 * np.pi / n
    ang = step * (np.arange(n) + rng.uniform(0.1, 0.9, n))
    r = rng.uniform(1 - jitter, 1.0, n)
    return geo.validate_polygon(np.column_stack((r * np.cos(ang), r * np.sin(ang))))


@st.composite
def polygons(draw, min_n=3, max_n=10):
    n = draw(st.integers(min_n, max_n))
    seed = draw(st.integers(0, 2**32 - 1))
    return star_polygon(np.random.default_rng(seed), n)


@st.composite
def polygon_and_point(draw):
    P = draw(polygons())
    seed = draw(st.integers(0, 2**32 - 1))
    x = harness.random_interior_points(P, 1, np.random.default_rng(seed))[0]
    return P, x


@pytest.fixture(scope="session")
def square():
    return geo.validate_polygon(harness.SQUARE)


@pytest.fixture(scope="session")
def lshape():
    return geo.validate_polygon(harness.L_SHAPE)


@pytest.fixture(scope="session")
def canonical():
    return geo.validate_polygon(harness.CANONICAL)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line[1])
