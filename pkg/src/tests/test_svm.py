import math

import numpy as np
import pytest

from jl_robust.data import synth_clusters
from jl_robust.errors import NonSeparableError, ZeroPolytopeDistanceError
from jl_robust.geometry import PointSet, inlier_count, polytope_distance
from jl_robust.hull import gilbert, gilbert_minkowski
from jl_robust.jl import ProjectionMap, make_projection, recover
from jl_robust.svm import (
    DEFAULT_ROUNDS,
    BlackBoxDirection,
    EEstimate,
    accuracy,
    default_blackbox_one_class,
    default_blackbox_two_class,
    jl_epsilon,
    margin_along,
    margin_along_two_class,
    predict,
    select_inliers_one_class,
    select_inliers_two_class,
    solve_one_class,
    solve_two_class,
)


def test_select_inliers_ties_keep_lower_index():
    fP = PointSet([[1.0], [1.0], [1.0]])
    assert select_inliers_one_class(fP, np.array([1.0]), 1 / 3).tolist() == [0, 1]


def test_select_inliers_two_class():
    fP1 = PointSet([[3.0], [-2.0], [1.0]])
    fP2 = PointSet([[-3.0], [2.0], [-1.0]])
    s1, s2 = select_inliers_two_class(fP1, fP2, np.array([2.0]), 1 / 3, 1 / 3)
    assert s1.tolist() == [0, 2]
    assert s2.tolist() == [0, 2]
    assert margin_along_two_class(fP1, fP2, np.array([2.0]), 1 / 3, 1 / 3) == pytest.approx(2.0)


def test_margin_along():
    fP = PointSet([[2.0, 0.0], [3.0, 1.0], [-1.0, 0.0]])
    assert margin_along(fP, np.array([1.0, 0.0]), 1 / 3) == pytest.approx(2.0)
    assert margin_along(fP, np.array([1.0, 0.0]), 0.0) == pytest.approx(-1.0)


def test_jl_epsilon():
    assert jl_epsilon(0.5, 4.0) == pytest.approx(0.02)
    assert jl_epsilon(0.5, math.inf) == 0.0
    assert EEstimate(diameter=3.0, rho=0.0).E == math.inf
    assert EEstimate(diameter=3.0, rho=1.5).E == pytest.approx(4.0)


def test_blackbox_direction_rejects_zero():
    with pytest.raises(ZeroPolytopeDistanceError):
        BlackBoxDirection(v=np.zeros(3))


def test_default_blackbox_trims_the_outlier(cluster_with_outlier):
    bb = default_blackbox_one_class(cluster_with_outlier, 0.05)
    assert bb.metadata['degenerate_rounds'] >= 1
    assert 19 not in bb.metadata['inliers'].tolist()
    assert margin_along(cluster_with_outlier, bb.v, 0.05) > 0.0


def test_default_blackbox_non_separable(symmetric_cross):
    with pytest.raises(NonSeparableError) as excinfo:
        default_blackbox_one_class(symmetric_cross, 0.0)
    assert excinfo.value.diagnostics['degenerate_rounds'] >= 1


def test_solve_one_class_without_reduction(cluster_with_outlier):
    eps0 = 0.1
    result = solve_one_class(cluster_with_outlier, 0.05, eps0, variant='none')
    clean = cluster_with_outlier.subset(np.arange(19))
    best = polytope_distance(clean)
    assert result.separated
    assert result.inlier_indices[0].tolist() == list(range(19))
    assert (1.0 - eps0) * best - 1e-9 <= result.width <= best + 1e-9
    assert result.converged
    np.testing.assert_allclose(result.direction, result.reduced_point, atol=1e-12)
    # the Gilbert stopping rule puts every inlier beyond (1 - eps0) ||x||
    assert result.offset == pytest.approx((1.0 - eps0) * np.linalg.norm(result.reduced_point))
    assert result.offset <= result.width + 1e-9
    assert result.target_dim == 2
    assert result.epsilon is None
    assert result.blackbox == 'alternating-gilbert'


def test_solve_one_class_recovery_is_linear():
    ds = synth_clusters(1, 60, 200, spread=1.0, separation=0.0, seed=3, offset=30.0)
    result = solve_one_class(ds.points, 0.1, 0.1, variant='gaussian', seed=4, target_dim=50)
    assert result.target_dim == 50
    assert result.separated
    assert result.width > 0.0
    comb = result.combs[0]
    assert set(comb.indices.tolist()) <= set(result.inlier_indices[0].tolist())
    np.testing.assert_allclose(result.direction, recover(comb, ds.points))
    projection = ProjectionMap.from_descriptor(result.projection)
    np.testing.assert_allclose(
        projection.apply_array(result.direction[None, :])[0], result.reduced_point, atol=1e-8
    )
    assert result.offset == pytest.approx(0.9 * np.linalg.norm(result.reduced_point))
    assert result.timing.total > 0.0
    fields = {'direction', 'width', 'timing', 'projection', 'inliers', 'converged'}
    assert set(result.to_json()) >= fields


def test_solve_one_class_estimates_dimension():
    ds = synth_clusters(1, 30, 20, spread=0.5, separation=0.0, seed=1, offset=10.0)
    result = solve_one_class(ds.points, 0.1, 0.1, variant='binary', seed=2)
    assert result.e_estimate is not None
    assert result.e_estimate.rho > 0.0
    assert result.epsilon == pytest.approx(jl_epsilon(0.1, result.e_estimate.E))
    # the JL dimension for such a small epsilon exceeds d, so it is clamped
    assert result.target_dim == 20


def test_solve_one_class_accepts_custom_blackbox(cluster_with_outlier):
    def along_diagonal(_fP, _gamma):
        return BlackBoxDirection(v=np.array([1.0, 1.0]))

    result = solve_one_class(
        cluster_with_outlier, 0.05, 0.1, variant='none', blackbox=along_diagonal
    )
    assert result.blackbox == 'custom'
    assert 19 not in result.inlier_indices[0].tolist()
    assert result.separated


def test_solve_one_class_prebuilt_projection(cluster_with_outlier):
    projection = make_projection('orthonormal', 2, 2, seed=0)
    result = solve_one_class(cluster_with_outlier, 0.05, 0.1, projection=projection)
    assert result.projection == projection.to_descriptor()
    assert result.separated


def test_solve_one_class_non_separable(symmetric_cross):
    with pytest.raises(NonSeparableError):
        solve_one_class(symmetric_cross, 0.0, 0.1, variant='none')


@pytest.mark.parametrize(('gamma', 'eps0'), [(1.0, 0.1), (-0.1, 0.1), (0.1, 0.0)])
def test_solve_one_class_rejects_parameters(cluster_with_outlier, gamma, eps0):
    with pytest.raises(ValueError):
        solve_one_class(cluster_with_outlier, gamma, eps0, variant='none')


def test_default_two_class_blackbox_trims_stray_point(two_classes):
    P1, P2 = two_classes
    bb = default_blackbox_two_class(P1, P2, 1 / 21, 0.0)
    s1, s2 = bb.metadata['inliers']
    assert 20 not in s1.tolist()
    assert s2.size == 20


def test_solve_two_class(two_classes):
    P1, P2 = two_classes
    result = solve_two_class(P1, P2, 1 / 21, 0.0, 0.1, variant='none')
    assert result.separated
    assert 20 not in result.inlier_indices[0].tolist()
    low = (P1.coords[:20] @ result.unit_direction).min()
    high = (P2.coords @ result.unit_direction).max()
    assert high < result.offset < low
    assert result.offset == pytest.approx((low + high) / 2.0)
    assert result.width == pytest.approx(low - high)
    np.testing.assert_allclose(
        result.direction, recover(result.combs[0], P1) - recover(result.combs[1], P2)
    )
    X = np.vstack((P1.coords[:20], P2.coords))
    labels = np.r_[np.ones(20), -np.ones(20)]
    assert accuracy(result, X, labels) == 1.0
    assert predict(result, [[10.0, 0.0]]).tolist() == [1]


def test_solve_two_class_reduced():
    ds = synth_clusters(2, 50, 120, spread=1.0, separation=25.0, seed=5)
    P1 = ds.points.subset(np.flatnonzero(ds.labels == 1))
    P2 = ds.points.subset(np.flatnonzero(ds.labels == -1))
    result = solve_two_class(P1, P2, 0.05, 0.05, 0.1, variant='fast', seed=6, target_dim=30)
    assert result.target_dim == 30
    assert result.separated
    assert result.blackbox == 'alternating-gilbert-minkowski'


def test_solve_two_class_overlapping_classes(rng):
    X = rng.standard_normal((30, 2))
    with pytest.raises(NonSeparableError):
        solve_two_class(PointSet(X[:15]), PointSet(X[15:]), 0.0, 0.0, 0.1, variant='none')


@pytest.mark.parametrize('gamma', [0.0, 0.1, 1 / 3, 0.5])
def test_select_inliers_match_sorting(rng, gamma):
    fP1 = PointSet(rng.standard_normal((30, 4)))
    fP2 = PointSet(rng.standard_normal((25, 4)))
    v = rng.standard_normal(4)
    proj1 = fP1.coords @ v / np.linalg.norm(v)
    proj2 = fP2.coords @ v / np.linalg.norm(v)
    keep1 = inlier_count(fP1.n, gamma)
    keep2 = inlier_count(fP2.n, gamma)
    largest = sorted(sorted(range(fP1.n), key=lambda i: (-proj1[i], i))[:keep1])
    smallest = sorted(sorted(range(fP2.n), key=lambda i: (proj2[i], i))[:keep2])

    assert select_inliers_one_class(fP1, v, gamma).tolist() == largest
    s1, s2 = select_inliers_two_class(fP1, fP2, v, gamma, gamma)
    assert s1.tolist() == largest
    assert s2.tolist() == smallest


def test_one_class_blackbox_without_outliers_is_one_gilbert_run(mocker, cluster_with_outlier):
    fP = cluster_with_outlier.subset(np.arange(19))
    spy = mocker.patch('jl_robust.svm.gilbert', wraps=gilbert)
    bb = default_blackbox_one_class(fP, 0.0)
    assert spy.call_count == 1
    assert bb.metadata['rounds'] == 1
    np.testing.assert_array_equal(bb.v, gilbert(fP, 0.1).point)


def test_two_class_blackbox_without_outliers_is_one_gilbert_run(mocker, two_classes):
    P1, P2 = two_classes
    P1 = P1.subset(np.arange(20))
    spy = mocker.patch('jl_robust.svm.gilbert_minkowski', wraps=gilbert_minkowski)
    bb = default_blackbox_two_class(P1, P2, 0.0, 0.0)
    assert spy.call_count == 1
    np.testing.assert_array_equal(bb.v, gilbert_minkowski(P1, P2, 0.1).point)


def test_one_class_blackbox_is_idempotent(cluster_with_outlier):
    bb = default_blackbox_one_class(cluster_with_outlier, 0.05)
    assert bb.metadata['rounds'] < DEFAULT_ROUNDS
    again = default_blackbox_one_class(cluster_with_outlier.subset(bb.metadata['inliers']), 0.0)
    np.testing.assert_array_equal(again.v, bb.v)


def test_two_class_blackbox_is_idempotent(two_classes):
    P1, P2 = two_classes
    bb = default_blackbox_two_class(P1, P2, 1 / 21, 0.0)
    assert bb.metadata['rounds'] < DEFAULT_ROUNDS
    s1, s2 = bb.metadata['inliers']
    again = default_blackbox_two_class(P1.subset(s1), P2.subset(s2), 0.0, 0.0)
    np.testing.assert_array_equal(again.v, bb.v)


def test_one_class_recovery_budget_is_reported():
    P = PointSet([[1.0, 0.0], [0.0, 1.0]])

    def along_diagonal(_fP, _gamma):
        return BlackBoxDirection(v=np.array([1.0, 1.0]))

    result = solve_one_class(P, 0.0, 0.1, variant='none', blackbox=along_diagonal, max_iter=1)
    assert not result.converged
    assert not result.separated
    assert result.to_json()['converged'] is False
    np.testing.assert_array_equal(result.direction, [1.0, 0.0])

    full = solve_one_class(P, 0.0, 0.1, variant='none', blackbox=along_diagonal)
    assert full.converged
    np.testing.assert_allclose(full.direction, [0.5, 0.5])


def test_two_class_recovery_budget_is_reported():
    P1 = PointSet([[2.0, 0.0], [0.0, 2.0]])
    P2 = PointSet([[0.0, 0.0]])

    def along_diagonal(_fP1, _fP2, _gamma1, _gamma2):
        return BlackBoxDirection(v=np.array([1.0, 1.0]))

    result = solve_two_class(
        P1, P2, 0.0, 0.0, 0.1, variant='none', blackbox=along_diagonal, max_iter=1
    )
    assert not result.converged
    assert not result.separated
    full = solve_two_class(P1, P2, 0.0, 0.0, 0.1, variant='none', blackbox=along_diagonal)
    assert full.converged
    assert full.separated
