import numpy as np
import pytest

from fovmap.spatial import SpatialIndex, nearest_neighbor


def linear_scan_oracle(points, query):
    dists = np.linalg.norm(points - query, axis=1)
    idx = int(np.argmin(dists))  # argmin takes the lowest index on ties
    return idx, float(dists[idx])


def test_empty_index_rejected():
    with pytest.raises(ValueError):
        SpatialIndex(np.zeros((0, 3)))


def test_self_query():
    pts = np.array([[0.0, 0.0, 0.0], [1.0, 2.0, 3.0]])
    index = SpatialIndex(pts)
    point, idx, dist = index.nearest(np.array([1.0, 2.0, 3.0]))
    assert idx == 1
    assert dist == 0.0
    np.testing.assert_array_equal(point, pts[1])


def test_midpoint_adjacent():
    index = SpatialIndex(np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]))
    point, idx, dist = index.nearest(np.array([0.4, 0.0, 0.0]))
    assert idx == 0
    assert dist == pytest.approx(0.4, abs=1e-15)


def test_tie_breaks_to_lowest_index():
    pts = np.array([[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    index = SpatialIndex(pts)
    _, idx, dist = index.nearest(np.zeros(3))
    assert idx == 0
    assert dist == 1.0


def test_duplicate_points_tie(rng):
    base = rng.normal(size=(20, 3))
    pts = np.vstack([base, base[5]])  # exact duplicate at index 20
    index = SpatialIndex(pts)
    _, idx, dist = index.nearest(base[5])
    assert idx == 5
    assert dist == 0.0


def test_matches_linear_scan(rng):
    points = rng.uniform(-10, 10, size=(1000, 3))
    index = SpatialIndex(points)
    queries = rng.uniform(-12, 12, size=(100, 3))
    for q in queries:
        want_idx, want_dist = linear_scan_oracle(points, q)
        _, idx, dist = index.nearest(q)
        assert idx == want_idx
        assert dist == pytest.approx(want_dist, rel=0, abs=0)


def test_nearest_many_matches_scalar(rng):
    points = rng.uniform(-5, 5, size=(400, 3))
    index = SpatialIndex(points)
    queries = np.vstack([rng.uniform(-6, 6, size=(50, 3)), points[:10]])
    idxs, dists = index.nearest_many(queries)
    for j, q in enumerate(queries):
        want_idx, want_dist = linear_scan_oracle(points, q)
        assert idxs[j] == want_idx
        assert dists[j] == pytest.approx(want_dist, abs=0)


def test_single_point_index(rng):
    index = SpatialIndex(np.array([[1.0, 1.0, 1.0]]))
    idxs, dists = index.nearest_many(rng.normal(size=(5, 3)))
    assert np.all(idxs == 0)


def test_nearest_neighbor_function():
    index = SpatialIndex(np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]))
    point, dist = nearest_neighbor(index, np.array([0.4, 0.0, 0.0]))
    np.testing.assert_array_equal(point, [0.0, 0.0, 0.0])
    assert dist == pytest.approx(0.4)
