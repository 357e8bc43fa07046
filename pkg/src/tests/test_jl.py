import math

import numpy as np
import pytest

from jl_robust.errors import DimensionMismatchError, InvalidCombinationError
from jl_robust.geometry import PointSet
from jl_robust.jl import (
    JL_VARIANTS,
    ConvexCombination,
    ProjectionMap,
    Variant,
    apply,
    dimension_for_rate,
    distortion_report,
    epsilon_for_dimension,
    make_binary,
    make_fast,
    make_gaussian,
    make_identity,
    make_orthonormal,
    make_projection,
    next_power_of_two,
    recover,
    success_dimension,
    target_dimension,
)


def sylvester_hadamard(size):
    H = np.ones((1, 1))
    while H.shape[0] < size:
        H = np.block([[H, H], [H, -H]])
    return H


def test_target_dimension():
    assert target_dimension(1000, 0.5) == 222
    assert target_dimension(1000, 0.5, c=4.0) == 111
    assert success_dimension(1000, 0.5, 0.01) > target_dimension(1000, 0.5)


@pytest.mark.parametrize(('n', 'epsilon'), [(1, 0.5), (10, 0.0), (10, 1.0)])
def test_target_dimension_rejects(n, epsilon):
    with pytest.raises(ValueError):
        target_dimension(n, epsilon)


def test_epsilon_for_dimension_inverts_target_dimension():
    d_tilde = target_dimension(500, 0.3)
    assert epsilon_for_dimension(500, d_tilde) <= 0.3
    assert epsilon_for_dimension(500, d_tilde - 1) > 0.3


@pytest.mark.parametrize('rate', [0.0, 1.2])
def test_dimension_for_rate_rejects(rate):
    with pytest.raises(ValueError, match='rate'):
        dimension_for_rate(100, rate)


@pytest.mark.parametrize('variant', [*JL_VARIANTS, Variant.orthonormal])
def test_maps_are_reproducible(variant):
    first = make_projection(variant, 40, 12, seed=7)
    again = make_projection(variant.value, 40, 12, seed=7)
    other = make_projection(variant, 40, 12, seed=8)
    np.testing.assert_array_equal(first.as_matrix(), again.as_matrix())
    assert not np.array_equal(first.as_matrix(), other.as_matrix())
    assert first.as_matrix().shape == (12, 40)


def test_descriptor_regenerates_the_map():
    projection = make_fast(30, 9, seed=3)
    descriptor = projection.to_descriptor()
    assert descriptor == {'variant': 'fast', 'd': 30, 'dTilde': 9, 'seed': 3}
    rebuilt = ProjectionMap.from_descriptor(descriptor)
    X = np.arange(60, dtype=float).reshape(2, 30)
    np.testing.assert_array_equal(rebuilt.apply_array(X), projection.apply_array(X))


def test_fast_map_matches_explicit_hadamard(rng):
    projection = make_fast(5, 3, seed=11)
    assert projection.padded_dim == next_power_of_two(5) == 8
    X = rng.standard_normal((4, 5))
    padded = np.zeros((4, 8))
    padded[:, :5] = X
    H = sylvester_hadamard(8)
    expected = (padded * projection.signs) @ H.T
    expected = expected[:, projection.rows] / math.sqrt(3)
    np.testing.assert_allclose(projection.apply_array(X), expected, atol=1e-12)
    assert len(set(projection.rows.tolist())) == 3


def test_binary_entries():
    matrix = make_binary(50, 10, seed=0).as_matrix()
    scale = math.sqrt(3.0 / 10)
    assert set(np.unique(np.round(matrix / scale, 12)).tolist()) <= {-1.0, 0.0, 1.0}
    # roughly two thirds of the entries are zero
    assert 0.55 < np.mean(matrix == 0.0) < 0.78


def test_orthonormal_full_dimension_is_an_isometry(rng):
    P = PointSet(rng.standard_normal((20, 16)))
    report = distortion_report(P, make_orthonormal(16, 16, seed=2), pair_sample=None)
    assert report.max_distortion < 1e-9
    assert report.fraction_within == 1.0
    assert report.pairs == 20 * 19 // 2


def test_identity_map():
    projection = make_identity(4)
    X = np.eye(4)
    out = projection.apply_array(X)
    np.testing.assert_array_equal(out, X)
    assert out is not X
    with pytest.raises(ValueError, match='d_tilde == d'):
        make_identity(4, 3)


@pytest.mark.parametrize('variant', JL_VARIANTS)
def test_jl_variants_preserve_distances(variant, rng):
    P = PointSet(rng.standard_normal((200, 1000)))
    d_tilde = target_dimension(P.n, 0.5)
    report = distortion_report(P, make_projection(variant, P.d, d_tilde, seed=5), epsilon=0.5)
    assert report.pairs == 1000
    assert report.fraction_within >= 0.99
    assert report.mean_distortion < 0.2


def test_distortion_report_duplicate_points():
    P = PointSet([[1.0, 2.0, 3.0], [1.0, 2.0, 3.0], [0.0, 0.0, 1.0]])
    report = distortion_report(P, make_projection('gaussian', 3, 2, seed=0), pair_sample=None)
    assert math.isfinite(report.max_distortion)
    assert report.pairs == 3


def test_bad_dimensions_and_seed():
    with pytest.raises(ValueError, match='d_tilde'):
        make_projection('gaussian', 5, 6, seed=0)
    with pytest.raises(ValueError, match='seed'):
        make_projection('gaussian', 5, 3, seed=-1)
    with pytest.raises(ValueError, match='Unknown projection variant'):
        make_projection('sketchy', 5, 3, seed=0)
    with pytest.raises(DimensionMismatchError):
        apply(make_projection('gaussian', 5, 3, seed=0), PointSet(np.ones((2, 4))))


@pytest.mark.parametrize('variant', [*JL_VARIANTS, Variant.orthonormal])
def test_maps_commute_with_convex_combinations(variant, rng):
    P = PointSet(rng.standard_normal((10, 24)))
    projection = make_projection(variant, 24, 8, seed=1)
    fP = apply(projection, P)
    comb = ConvexCombination([1, 4, 7], [0.2, 0.5, 0.3])
    lifted = recover(comb, P)
    np.testing.assert_allclose(
        projection.apply_array(lifted[None, :])[0], recover(comb, fP), atol=1e-10
    )


@pytest.mark.parametrize(
    ('indices', 'weights', 'match'),
    [
        ([], [], 'non-empty'),
        ([0, 1], [0.5], 'matching'),
        ([0, 0], [0.5, 0.5], 'distinct'),
        ([0, 1], [1.5, -0.5], 'non-negative'),
        ([0, 1], [0.5, 0.6], 'sum to 1'),
        ([-1], [1.0], 'out of range'),
    ],
)
def test_convex_combination_rejects(indices, weights, match):
    with pytest.raises(InvalidCombinationError, match=match):
        ConvexCombination(indices, weights)


def test_convex_combination_helpers():
    comb = ConvexCombination.from_dense([0.0, 0.25, 0.0, 0.75])
    assert comb.indices.tolist() == [1, 3]
    assert len(comb) == 2
    np.testing.assert_array_equal(comb.as_dense(4), [0.0, 0.25, 0.0, 0.75])
    remapped = comb.remap([10, 11, 12, 13])
    assert remapped.indices.tolist() == [11, 13]
    with pytest.raises(InvalidCombinationError, match='out of range'):
        remapped.validate(12)
    assert ConvexCombination.singleton(5).weights.tolist() == [1.0]


@pytest.mark.parametrize('variant', [*JL_VARIANTS, Variant.orthonormal])
def test_maps_are_linear(variant, rng):
    projection = make_projection(variant, 33, 10, seed=4)
    for _ in range(20):
        p, q = rng.standard_normal((2, 33))
        alpha, beta = rng.uniform(-5.0, 5.0, size=2)
        images = projection.apply_array(np.vstack((alpha * p + beta * q, p, q)))
        np.testing.assert_allclose(
            images[0], alpha * images[1] + beta * images[2], rtol=1e-9, atol=1e-9
        )


def test_fast_map_in_one_dimension():
    projection = make_fast(1, 1, seed=0)
    assert projection.padded_dim == 1
    out = projection.apply_array(np.array([[3.0], [-2.0]]))
    np.testing.assert_allclose(np.abs(out), [[3.0], [2.0]])


def test_fast_map_spreads_a_basis_vector_evenly():
    projection = make_fast(16, 4, seed=9)
    e1 = np.zeros((1, 16))
    e1[0, 0] = 1.0
    out = projection.apply_array(e1)[0]
    np.testing.assert_allclose(np.abs(out), np.full(4, 1.0 / math.sqrt(4)))


def test_gaussian_entry_statistics():
    entries = make_gaussian(1000, 100, seed=0).as_matrix() * math.sqrt(100)
    assert entries.size == 100_000
    assert abs(entries.mean()) < 0.01
    assert abs(entries.var() - 1.0) < 0.02


def test_binary_entry_statistics():
    entries = make_binary(1000, 100, seed=0).as_matrix() / math.sqrt(3.0 / 100)
    assert abs(np.mean(entries == 0.0) - 2 / 3) < 0.01
    assert abs(np.mean(entries > 0.0) - 1 / 6) < 0.01
