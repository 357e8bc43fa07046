import numpy as np
import pytest

from jl_robust.geometry import PointSet


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def cluster_with_outlier(rng):
    """19 points near (5, 5) and one point at (-5, -5), which must be trimmed."""
    inliers = np.array([5.0, 5.0]) + 0.5 * rng.standard_normal((19, 2))
    return PointSet(np.vstack((inliers, [[-5.0, -5.0]])))


@pytest.fixture
def symmetric_cross():
    return PointSet([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])


@pytest.fixture
def two_classes(rng):
    """Class 1 near (4, 0) plus one stray point at (-4, 0); class 2 near (-4, 0)."""
    p1 = np.array([4.0, 0.0]) + 0.3 * rng.standard_normal((20, 2))
    p2 = np.array([-4.0, 0.0]) + 0.3 * rng.standard_normal((20, 2))
    return PointSet(np.vstack((p1, [[-4.0, 0.0]]))), PointSet(p2)
