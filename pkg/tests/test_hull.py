import itertools

import numpy as np
import pytest

from semicoupling.hull import hull_distance, min_norm_point


def brute_distance_2d(points):
    """Independent oracle: segment projections plus a containment test."""
    points = np.asarray(points, dtype=float)
    if points.shape[0] == 1:
        return float(np.linalg.norm(points[0]))
    try:
        from scipy.spatial import ConvexHull, QhullError

        if points.shape[0] >= 3:
            try:
                hull = ConvexHull(points)
                verts = points[hull.vertices]
                cross = lambda u, v: u[0] * v[1] - u[1] * v[0]
                inside = all(
                    cross(b - a, -a) >= -1e-12
                    for a, b in zip(verts, np.roll(verts, -1, axis=0))
                )
                if inside:
                    return 0.0
            except QhullError:
                pass  # degenerate (collinear) input: fall through to segments
    except ImportError:
        pass
    best = np.inf
    for i, j in itertools.combinations(range(points.shape[0]), 2):
        a, b = points[i], points[j]
        d = b - a
        t = np.clip(-(a @ d) / max(d @ d, 1e-300), 0.0, 1.0)
        best = min(best, float(np.linalg.norm(a + t * d)))
    for p in points:
        best = min(best, float(np.linalg.norm(p)))
    return best


def test_collinear_same_direction():
    assert hull_distance(np.array([[1.5, 0.0], [2.5, 0.0]])) == pytest.approx(1.5)


def test_segment_through_origin():
    assert hull_distance(np.array([[0.5, 0.0], [-0.5, 0.0]])) == 0.0


def test_triangle_containing_origin():
    pts = np.array([[1.0, 0.2], [-1.0, 1.0], [-0.5, -1.5]])
    assert hull_distance(pts) == 0.0


def test_single_point():
    assert hull_distance(np.array([[3.0, 4.0]])) == pytest.approx(5.0)


def test_coefficients_reproduce_minimizer():
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(6, 3)) + np.array([2.0, 0.0, 0.0])
    x, coeffs = min_norm_point(pts)
    assert coeffs.min() >= -1e-12
    assert coeffs.sum() == pytest.approx(1.0)
    assert coeffs @ pts == pytest.approx(x, abs=1e-9)


def test_against_brute_oracle_random_2d():
    rng = np.random.default_rng(7)
    for trial in range(200):
        n = rng.integers(1, 7)
        pts = rng.normal(size=(n, 2)) * rng.uniform(0.5, 2.0)
        if trial % 3 == 0:
            pts += rng.uniform(0.5, 2.0, size=2)  # push away from the origin
        got = hull_distance(pts)
        want = brute_distance_2d(pts)
        assert got == pytest.approx(want, abs=2e-5)


def test_duplicate_points():
    pts = np.array([[1.0, 1.0], [1.0, 1.0], [2.0, 0.0]])
    assert hull_distance(pts) == pytest.approx(brute_distance_2d(pts), abs=1e-8)


def test_3d_face_projection():
    # nearest point lies in the interior of a triangle face
    pts = np.array([[1.0, -1.0, -1.0], [1.0, 2.0, -1.0], [1.0, -1.0, 2.0], [5.0, 0.0, 0.0]])
    assert hull_distance(pts) == pytest.approx(1.0, abs=1e-9)
