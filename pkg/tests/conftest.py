"""Shared worked-example models used across the test suite.

The fixtures build the small reference functions the suite checks against:
a two-piece plane fold in 3-D, a univariate three-piece zigzag with its
canonical form, a 2-D fold-with-plateau that no single-level canonical
form can express (with its nested and max-of-affines forms), and a
five-piece univariate tent whose lattice form is known in closed form.
"""

import numpy as np
import pytest

from pwlkit import (
    AffineFunction,
    ConventionalPWL,
    CplrExpr,
    CplrModel,
    GhhModel,
    Halfspace,
    LatticeModel,
    NestedCplrModel,
    Region,
    box_region,
)


@pytest.fixture
def fold3d():
    """f = |x1 - x2 + x3 + 1| in region-by-region form on [-2, 2]^3."""
    pi = np.array([1.0, -1.0, 1.0])
    regions = [
        Region([Halfspace(pi, -1.0, closed=True)], label=0),
        Region([Halfspace(-pi, 1.0, closed=False)], label=1),
    ]
    pieces = [AffineFunction(pi, 1.0), AffineFunction(-pi, -1.0)]
    return ConventionalPWL(3, regions, pieces,
                           domain=box_region([-2, -2, -2], [2, 2, 2]))


@pytest.fixture
def zigzag_cplr():
    """x - |x + 1| + |x - 1|: pieces x+2 / -x / x-2 with kinks at -1, 1."""
    return CplrModel([1.0], 0.0, [(-1, [1.0], 1.0), (1, [1.0], -1.0)])


def _interval_region(lo, hi, label):
    hs = []
    if lo is not None:
        hs.append(Halfspace([1.0], lo))
    if hi is not None:
        hs.append(Halfspace([-1.0], -hi))
    return Region(hs, label)


def _five_piece(breaks):
    """Five univariate pieces over [0, 5] split at the given inner breaks."""
    b1, b2 = breaks
    pieces = [
        AffineFunction([0.5], 0.5),
        AffineFunction([2.0], -1.0),
        AffineFunction([0.0], 2.0),
        AffineFunction([-2.0], 9.0),
        AffineFunction([-0.5], 3.0),
    ]
    edges = [0.0, 1.0, b1, b2, 4.0, 5.0]
    regions = [_interval_region(edges[i], edges[i + 1], i) for i in range(5)]
    return ConventionalPWL(1, regions, pieces, domain=box_region([0.0], [5.0]))


@pytest.fixture
def tent_verbatim():
    """The five-piece tent with inner breaks that contradict its pieces."""
    return _five_piece((1.8, 3.2))


@pytest.fixture
def tent_corrected():
    """The same tent with breaks at the actual piece intersections."""
    return _five_piece((1.5, 3.5))


@pytest.fixture
def tent_lattice():
    """Known lattice form of the corrected five-piece tent."""
    pieces = [
        AffineFunction([0.5], 0.5),
        AffineFunction([2.0], -1.0),
        AffineFunction([0.0], 2.0),
        AffineFunction([-2.0], 9.0),
        AffineFunction([-0.5], 3.0),
    ]
    sets = [[0, 2, 3, 4], [1, 2, 3, 4], [1, 2, 3], [0, 1, 2, 3], [0, 1, 2, 4]]
    return LatticeModel(pieces, sets)


@pytest.fixture
def plateau2d():
    """2-D fold with plateau: max(0, 15(x1+x2) - 10 - 65|x1-x2|).

    Regions: the sloped pieces live on either side of x1 = x2 where they
    are positive; the zero plateau covers the rest, split along x1 = x2 to
    stay polyhedral.
    """
    u = np.array([1.0, -1.0])            # x1 - x2
    l1 = AffineFunction([80.0, -50.0], -10.0)
    l2 = AffineFunction([-50.0, 80.0], -10.0)
    zero = AffineFunction([0.0, 0.0], 0.0)
    regions = [
        Region([Halfspace(-u, 0.0), Halfspace(l1.jacobian, 10.0)], label=0),
        Region([Halfspace(u, 0.0), Halfspace(l2.jacobian, 10.0)], label=1),
        Region([Halfspace(-u, 0.0), Halfspace(-l1.jacobian, -10.0)], label=2),
        Region([Halfspace(u, 0.0), Halfspace(-l2.jacobian, -10.0)], label=3),
    ]
    pieces = [l1, l2, zero, zero]
    return ConventionalPWL(2, regions, pieces,
                           domain=box_region([-2, -2], [2, 2]))


@pytest.fixture
def plateau2d_nested():
    """Two-level nested canonical form of the 2-D fold with plateau."""
    diff = AffineFunction([1.0, -1.0], 0.0)
    inner = CplrExpr(AffineFunction([-7.5, -7.5], 5.0),
                     [(32.5, CplrExpr(diff))])
    root = CplrExpr(AffineFunction([7.5, 7.5], -5.0),
                    [(-32.5, CplrExpr(diff)), (1.0, inner)])
    return NestedCplrModel(root)


@pytest.fixture
def plateau2d_ghh():
    """Max-of-affines form of the 2-D fold with plateau."""
    a1 = AffineFunction([65.0, -65.0], 0.0)
    a2 = AffineFunction([-65.0, 65.0], 0.0)
    a3 = AffineFunction([15.0, 15.0], -10.0)
    return GhhModel([(1.0, [a1, a2, a3]), (-1.0, [a1, a2])])
