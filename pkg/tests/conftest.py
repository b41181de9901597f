import math

import pytest

from signolab.geometry import BoundarySpec, Polygon, Segment


@pytest.fixture
def square():
    return Polygon(((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)))


@pytest.fixture
def square_spec(square):
    """Bottom S, right D, top N, left D."""
    return BoundarySpec(
        square,
        (Segment((0,), "S"), Segment((1,), "D"), Segment((2,), "N"), Segment((3,), "D")),
    )


HALF_PI = 0.5 * math.pi
