import numpy as np
import pytest

from semicoupling.boxcount import (coarse_grain_counts, coarse_grain_dimension,
                                   dimension_from_counts)


def test_refinement_slopes_on_known_sets():
    res = np.array([64, 128, 256])
    # a 1-pixel-wide line occupies res cells; a point 1; the full square res^2
    line = res
    point = np.ones(3)
    full = res**2
    assert dimension_from_counts(res, line)[0] == pytest.approx(1.0)
    assert dimension_from_counts(res, point)[0] == pytest.approx(0.0)
    assert dimension_from_counts(res, full)[0] == pytest.approx(2.0)


def test_rejects_degenerate_input():
    with pytest.raises(ValueError):
        dimension_from_counts([64, 128], [10, 20])
    with pytest.raises(ValueError):
        dimension_from_counts([64, 128, 256], [0, 10, 20])


def test_r2_reported():
    slope, r2 = dimension_from_counts([64, 128, 256], [64, 129, 255])
    assert 0.9 <= r2 <= 1.0
    assert slope == pytest.approx(1.0, abs=0.05)


def test_coarse_grain_counts_diagonal_line():
    n = 256
    mask = np.zeros((n, n), dtype=bool)
    idx = np.arange(n)
    mask[idx, idx] = True
    sizes, counts = coarse_grain_counts(mask, sizes=[1, 2, 4, 8, 16])
    # a diagonal hits ceil(n / s) boxes of side s
    assert list(counts) == [n, n // 2, n // 4, n // 8, n // 16]
    slope, _ = coarse_grain_dimension(mask, sizes=[1, 2, 4, 8, 16])
    assert slope == pytest.approx(1.0, abs=0.05)


def test_coarse_grain_full_square():
    mask = np.ones((64, 64), dtype=bool)
    slope, _ = coarse_grain_dimension(mask, sizes=[1, 2, 4, 8])
    assert slope == pytest.approx(2.0, abs=0.01)
