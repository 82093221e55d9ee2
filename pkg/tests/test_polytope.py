import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from nschow.polytope import BracketPolytope, cluster_centers, convex_position, dist_to_hull, hausdorff, inflate


def test_convex_position_square():
    pts = [[0, 0], [1, 0], [0, 1], [1, 1], [0.5, 0.5], [0.2, 0.7], [1, 1]]
    v = convex_position(pts)
    assert sorted(map(tuple, v)) == [(0, 0), (0, 1), (1, 0), (1, 1)]


def test_convex_position_collinear():
    v = convex_position([[0, 0, 2, 0], [0, 0, 4, 0], [0, 0, 6, 0]])
    assert sorted(v[:, 2]) == [2, 6]


def test_dist_to_hull():
    sq = np.array([[0, 0], [1, 0], [0, 1], [1, 1]], dtype=float)
    assert dist_to_hull([0.5, 0.5], sq) < 1e-9
    assert abs(dist_to_hull([2, 0.5], sq) - 1) < 1e-9
    assert abs(dist_to_hull([2, 2], sq) - np.sqrt(2)) < 1e-9
    assert abs(dist_to_hull([3, 4], [[0, 0]]) - 5) < 1e-12


def test_hausdorff_intervals():
    a = [[2.0], [6.0]]
    b = [[2.5], [5.0]]
    assert abs(hausdorff(a, b) - 1.0) < 1e-9
    assert hausdorff(a, a) < 1e-12


def test_cluster_centers_separates_groups(rng):
    x = np.concatenate([rng.normal(0, 1e-4, (50, 2)), rng.normal(5, 1e-4, (50, 2))])
    c = cluster_centers(x)
    assert len(c) == 2
    assert np.allclose(sorted(c[:, 0]), [0, 5], atol=1e-3)


def test_inflate_contains_original():
    v = np.array([[0.0, 0.0], [1.0, 2.0]])
    big = inflate(v, 0.1)
    assert all(dist_to_hull(p, big) < 1e-9 for p in v)
    assert abs(dist_to_hull([1.1, 2.1], big)) < 1e-9


def test_polytope_validation():
    with pytest.raises(ValueError):
        BracketPolytope(2, np.zeros((1, 3)))
    p = BracketPolytope(2, [[1, 0], [3, 0]])
    assert np.array_equal(p.centroid, [2, 0])
    assert p.diameter == 2
    assert np.array_equal(p.negated().vertices, [[-1, 0], [-3, 0]])


@given(arrays(float, (12, 3), elements=st.floats(-10, 10)))
def test_convex_position_preserves_hull(pts):
    v = convex_position(pts)
    assert all(dist_to_hull(p, v) < 1e-6 for p in pts)
