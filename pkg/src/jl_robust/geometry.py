"""Dense point types, metric primitives and exact desk-scale oracles.

The oracles in this module exist to certify the approximation algorithms on small
instances. Each one refuses inputs beyond its documented scale with
[OracleScaleError][jl_robust.errors.OracleScaleError] instead of running for hours.

The origin is always the all-zero vector; one-class inputs are assumed to be
expressed relative to it.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from typing import TypeAlias

import numpy as np
from numpy.typing import ArrayLike, NDArray

from jl_robust.errors import (
    DimensionMismatchError,
    InvalidPointSetError,
    OracleScaleError,
    TriangleWitnessError,
)

Point: TypeAlias = NDArray[np.float64]
IndexArray: TypeAlias = NDArray[np.intp]

REL_TOL = 1e-9
# Rounding guard so that e.g. (1 - 0.1) * 10 is not rounded up to 10.
_COUNT_GUARD = 1e-9

MEB_ORACLE_MAX_DIM = 10
MEB_ORACLE_MAX_POINTS = 50
KCENTER_ORACLE_MAX_POINTS = 14
KCENTER_ORACLE_MAX_K = 3
MARGIN_ORACLE_MAX_POINTS = 12


def as_point(coords: ArrayLike) -> Point:
    """Validate coordinates and return them as a read-only float64 vector.

    >>> as_point([3, 4])
    array([3., 4.])
    """
    arr = np.array(coords, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 1:
        msg = f'A point must be a non-empty 1-D vector, got shape {arr.shape}'
        raise InvalidPointSetError(msg)
    if not np.all(np.isfinite(arr)):
        msg = 'Point coordinates must be finite'
        raise InvalidPointSetError(msg)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PointSet:
    """n points in d dimensions stored as an immutable (n, d) float64 matrix.

    Row i is the point with stable identity i; every transform in the package keeps
    that identity, which is what makes recovery through convex coefficients
    well defined.
    """

    coords: NDArray[np.float64]

    def __post_init__(self) -> None:
        arr = np.array(self.coords, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr.reshape(1, -1)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            msg = f'A point set needs shape (n >= 1, d >= 1), got {arr.shape}'
            raise InvalidPointSetError(msg)
        if not np.all(np.isfinite(arr)):
            msg = 'Point set coordinates must be finite'
            raise InvalidPointSetError(msg)
        arr.setflags(write=False)
        object.__setattr__(self, 'coords', arr)

    @classmethod
    def from_points(cls, points: Iterable[ArrayLike]) -> PointSet:
        rows = [np.asarray(p, dtype=np.float64) for p in points]
        if not rows:
            msg = 'A point set needs at least one point'
            raise InvalidPointSetError(msg)
        dims = {r.shape for r in rows}
        if len(dims) != 1:
            msg = f'All points must share one dimension, got shapes {sorted(dims)}'
            raise DimensionMismatchError(msg)
        return cls(np.vstack(rows))

    @property
    def n(self) -> int:
        return int(self.coords.shape[0])

    @property
    def d(self) -> int:
        return int(self.coords.shape[1])

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, index: int) -> Point:
        return self.coords[index]

    def subset(self, indices: Sequence[int] | IndexArray) -> PointSet:
        """Points at `indices`, in that order (identity i of the result is indices[i])."""
        return PointSet(self.coords[np.asarray(indices, dtype=np.intp)])


@dataclass(frozen=True)
class TriangleWitness:
    """A right triangle o, (a, 0), (a, b) and its perturbed image.

    The perturbed triangle is o, (a0, 0), (a_prime, b_prime); every squared side
    length moved by at most `delta`.
    """

    a: float
    b: float
    a0: float
    a_prime: float
    b_prime: float
    delta: float


@dataclass(frozen=True)
class Ball:
    """A ball with its center written as an affine combination of support points."""

    center: Point
    radius: float
    support: IndexArray
    weights: NDArray[np.float64]


def inlier_count(n: int, gamma: float) -> int:
    """Number of points kept when a gamma fraction is trimmed: n - floor(gamma * n).

    >>> inlier_count(10, 0.1), inlier_count(3, 1 / 3), inlier_count(11, 0.0)
    (9, 2, 11)
    """
    return n - outlier_count(n, gamma)


def outlier_count(n: int, gamma: float) -> int:
    """Number of points discarded when a gamma fraction is trimmed: floor(gamma * n)."""
    if not 0.0 <= gamma < 1.0:
        msg = f'gamma must lie in [0, 1), got {gamma}'
        raise ValueError(msg)
    return min(n - 1, math.floor(gamma * n + _COUNT_GUARD)) if n > 0 else 0


def injection_count(n: int, fraction: float) -> int:
    """Number of points touched by an injection of `fraction`: ceil(fraction * n).

    >>> injection_count(100, 0.1), injection_count(7, 0.1), injection_count(5, 0.0)
    (10, 1, 0)
    """
    if not 0.0 <= fraction < 1.0:
        msg = f'fraction must lie in [0, 1), got {fraction}'
        raise ValueError(msg)
    return math.ceil(fraction * n - _COUNT_GUARD)


def squared_distance(p: ArrayLike, q: ArrayLike) -> float:
    """Squared Euclidean distance between two points.

    >>> squared_distance([0, 0], [3, 4])
    25.0
    """
    p_arr = np.asarray(p, dtype=np.float64)
    q_arr = np.asarray(q, dtype=np.float64)
    if p_arr.shape != q_arr.shape:
        msg = f'Dimension mismatch: {p_arr.shape} vs {q_arr.shape}'
        raise DimensionMismatchError(msg)
    diff = p_arr - q_arr
    return float(diff @ diff)


def pairwise_distances(X: NDArray[np.float64]) -> NDArray[np.float64]:
    """Euclidean distance matrix of the rows of X (exact zeros on the diagonal)."""
    sq = np.einsum('ij,ij->i', X, X)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return np.sqrt(d2)


def diameter(S: PointSet) -> float:
    """Largest pairwise distance of S."""
    if S.n == 1:
        return 0.0
    return float(pairwise_distances(S.coords).max())


def _circumball(
    X: NDArray[np.float64], boundary: list[int]
) -> tuple[Point | None, float, NDArray[np.float64]]:
    """Smallest ball through every boundary point, center in their affine hull."""
    if not boundary:
        return None, -1.0, np.empty(0)
    B = X[boundary]
    base = B[0]
    if len(boundary) == 1:
        return base.copy(), 0.0, np.ones(1)
    U = B[1:] - base
    gram = U @ U.T
    rhs = 0.5 * np.einsum('ij,ij->i', U, U)
    lam = np.linalg.lstsq(gram, rhs, rcond=None)[0]
    center = base + lam @ U
    weights = np.concatenate(([1.0 - lam.sum()], lam))
    r2 = float(np.max(np.einsum('ij,ij->i', B - center, B - center)))
    return center, r2, weights


def _move_to_front(
    X: NDArray[np.float64], order: list[int], end: int, boundary: list[int]
) -> tuple[Point | None, float, list[int], NDArray[np.float64]]:
    center, r2, weights = _circumball(X, boundary)
    support = list(boundary)
    if len(boundary) == X.shape[1] + 1:
        return center, r2, support, weights
    i = 0
    while i < end:
        idx = order[i]
        diff = X[idx] - center if center is not None else None
        if diff is None or float(diff @ diff) > r2 * (1.0 + 1e-12):
            center, r2, support, weights = _move_to_front(X, order, i, [*boundary, idx])
            order.pop(i)
            order.insert(0, idx)
        i += 1
    return center, r2, support, weights


def minimum_enclosing_ball(X: NDArray[np.float64]) -> Ball:
    """Exact minimum enclosing ball by Welzl's move-to-front recursion.

    The recursion depth is bounded by min(n, d + 1) + 1. The reported radius is the
    true covering radius of the returned center, so the ball always covers X.

    Args:
        X (NDArray[np.float64]): Points as rows.

    Returns:
        Ball: Center, covering radius and the support points with the affine weights
            expressing the center.
    """
    order = list(range(X.shape[0]))
    center, _, support, weights = _move_to_front(X, order, len(order), [])
    if center is None:
        msg = 'Cannot compute the enclosing ball of an empty set'
        raise InvalidPointSetError(msg)
    diff = X - center
    radius = float(np.sqrt(np.max(np.einsum('ij,ij->i', diff, diff))))
    return Ball(
        center=center,
        radius=radius,
        support=np.asarray(support, dtype=np.intp),
        weights=np.asarray(weights, dtype=np.float64),
    )


def exact_meb(S: PointSet) -> tuple[Point, float]:
    """Exact minimum enclosing ball of S (desk scale: d <= 10 or n <= 50).

    >>> center, radius = exact_meb(PointSet([[-1.0, 0.0], [1.0, 0.0]]))
    >>> center.tolist(), radius
    ([0.0, 0.0], 1.0)
    """
    if S.d > MEB_ORACLE_MAX_DIM and S.n > MEB_ORACLE_MAX_POINTS:
        msg = (
            f'oracle scale exceeded: exact_meb needs d <= {MEB_ORACLE_MAX_DIM} or '
            f'n <= {MEB_ORACLE_MAX_POINTS}, got n={S.n}, d={S.d}'
        )
        raise OracleScaleError(msg)
    ball = minimum_enclosing_ball(S.coords)
    return ball.center, ball.radius


def _affine_minimizer(C: NDArray[np.float64]) -> NDArray[np.float64]:
    """Weights (summing to one) of the minimum-norm point of the affine hull of C."""
    m = C.shape[0]
    kkt = np.zeros((m + 1, m + 1))
    kkt[:m, :m] = C @ C.T
    kkt[:m, m] = 1.0
    kkt[m, :m] = 1.0
    rhs = np.zeros(m + 1)
    rhs[m] = 1.0
    sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    return sol[:m]


def min_norm_point(
    X: NDArray[np.float64], tol: float = 1e-12, max_iter: int = 10_000
) -> tuple[Point, IndexArray, NDArray[np.float64]]:
    """Minimum-norm point of conv(X) by Wolfe's active-set method.

    Terminates in finitely many steps in exact arithmetic; here the optimality test
    ||x||^2 - min_p <p, x> <= tol * max ||p||^2 stops the loop.

    Returns:
        tuple: The point, the indices of its corral and their convex weights.
    """
    sq = np.einsum('ij,ij->i', X, X)
    scale = max(float(sq.max()), np.finfo(np.float64).tiny)
    corral = [int(np.argmin(sq))]
    lam = np.ones(1)
    x = X[corral[0]].copy()
    w_tol = 1e-14

    for _ in range(max_iter):
        proj = X @ x
        j = int(np.argmin(proj))
        if float(x @ x) - float(proj[j]) <= tol * scale or j in corral:
            break
        corral.append(j)
        lam = np.append(lam, 0.0)
        while True:
            alpha = _affine_minimizer(X[corral])
            if np.all(alpha > w_tol):
                lam = alpha
                break
            moving = (alpha <= w_tol) & (lam > alpha)
            ratios = np.full(lam.shape, np.inf)
            ratios[moving] = lam[moving] / (lam[moving] - alpha[moving])
            hit = int(np.argmin(ratios))
            theta = min(1.0, float(ratios[hit]))
            lam = (1.0 - theta) * lam + theta * alpha
            lam[hit] = 0.0
            keep = lam > w_tol
            corral = [c for c, k in zip(corral, keep, strict=True) if k]
            lam = lam[keep] / lam[keep].sum()
            if j not in corral:
                break
        x = lam @ X[corral]
        if j not in corral:
            break
        if float(x @ x) <= tol * scale:
            break
    return x, np.asarray(corral, dtype=np.intp), lam


def polytope_distance(S: PointSet) -> float:
    """Exact distance from the origin to conv(S); 0 when the origin is inside.

    >>> polytope_distance(PointSet([[1.0, 0.0], [2.0, 0.0]]))
    1.0
    """
    x, _, _ = min_norm_point(S.coords)
    dist = float(np.sqrt(x @ x))
    scale = float(np.sqrt(np.max(np.einsum('ij,ij->i', S.coords, S.coords))))
    return 0.0 if dist <= 1e-9 * max(scale, 1.0) else dist


def brute_force_kcenter_outliers(P: PointSet, k: int, gamma: float) -> float:
    """Discrete k-center with outliers by enumerating every k-subset of P as centers.

    For each candidate center set the radius is the (1 - gamma) n-th smallest
    assignment distance. Centers restricted to input points give at most twice the
    continuous optimum (any optimal ball of radius r holds an input point whose
    2r-ball covers it), so this value is within a factor 2 of the continuous optimum.

    Args:
        P (PointSet): Input points, n <= 14.
        k (int): Number of centers, k <= 3.
        gamma (float): Outlier fraction in [0, 1).

    Returns:
        float: The discrete optimum radius.
    """
    if P.n > KCENTER_ORACLE_MAX_POINTS or k > KCENTER_ORACLE_MAX_K:
        msg = (
            f'oracle scale exceeded: brute-force k-center needs n <= '
            f'{KCENTER_ORACLE_MAX_POINTS} and k <= {KCENTER_ORACLE_MAX_K}, '
            f'got n={P.n}, k={k}'
        )
        raise OracleScaleError(msg)
    if k < 1:
        msg = f'k must be at least 1, got {k}'
        raise ValueError(msg)
    if k >= P.n:
        return 0.0
    keep = inlier_count(P.n, gamma)
    dist = pairwise_distances(P.coords)
    best = math.inf
    for centers in itertools.combinations(range(P.n), k):
        nearest = dist[:, centers].min(axis=1)
        radius = float(np.partition(nearest, keep - 1)[keep - 1])
        best = min(best, radius)
    return best


def brute_force_margin_one_class(P: PointSet, gamma: float) -> float:
    """Best one-class margin with outliers by enumerating every inlier subset.

    Each subset of size (1 - gamma) n is scored by its exact polytope distance; the
    maximum over subsets is the optimal width. Non-separable instances score 0.

    >>> brute_force_margin_one_class(PointSet([[1.0, 0.0], [-1.0, 0.0]]), 0.5)
    1.0
    """
    if P.n > MARGIN_ORACLE_MAX_POINTS:
        msg = (
            f'oracle scale exceeded: margin enumeration needs n <= '
            f'{MARGIN_ORACLE_MAX_POINTS}, got n={P.n}'
        )
        raise OracleScaleError(msg)
    keep = inlier_count(P.n, gamma)
    best = 0.0
    for subset in itertools.combinations(range(P.n), keep):
        best = max(best, polytope_distance(P.subset(subset)))
    return best


def minkowski_difference(Q1: PointSet, Q2: PointSet) -> PointSet:
    """All differences q1 - q2; row i * |Q2| + j holds Q1[i] - Q2[j]."""
    if Q1.d != Q2.d:
        msg = f'Dimension mismatch: {Q1.d} vs {Q2.d}'
        raise DimensionMismatchError(msg)
    diff = Q1.coords[:, None, :] - Q2.coords[None, :, :]
    return PointSet(diff.reshape(-1, Q1.d))


def brute_force_margin_two_class(
    P1: PointSet, P2: PointSet, gamma1: float, gamma2: float
) -> float:
    """Best two-class margin with outliers by enumerating inlier subsets of both sides.

    The width of a pair of subsets is the distance between their hulls, i.e. the
    polytope distance of their Minkowski difference.
    """
    if P1.n + P2.n > MARGIN_ORACLE_MAX_POINTS:
        msg = (
            f'oracle scale exceeded: margin enumeration needs |P1| + |P2| <= '
            f'{MARGIN_ORACLE_MAX_POINTS}, got {P1.n + P2.n}'
        )
        raise OracleScaleError(msg)
    keep1 = inlier_count(P1.n, gamma1)
    keep2 = inlier_count(P2.n, gamma2)
    best = 0.0
    for s1 in itertools.combinations(range(P1.n), keep1):
        for s2 in itertools.combinations(range(P2.n), keep2):
            md = minkowski_difference(P1.subset(s1), P2.subset(s2))
            best = max(best, polytope_distance(md))
    return best


def triangle_lower_bound(a: float, delta: float) -> float:
    """Guaranteed length of the perturbed leg: (2a^2 - 3 delta) / (2 sqrt(a^2 + delta)).

    >>> round(triangle_lower_bound(1.0, 0.1), 4)
    0.8104
    """
    return (2.0 * a * a - 3.0 * delta) / (2.0 * math.sqrt(a * a + delta))


def _witness_violations(w: TriangleWitness) -> list[str]:
    scale = max(1.0, w.a * w.a + w.b * w.b)
    slack = w.delta + REL_TOL * scale
    problems = []
    if not all(
        math.isfinite(v) for v in (w.a, w.b, w.a0, w.a_prime, w.b_prime, w.delta)
    ):
        problems.append('all lengths must be finite')
        return problems
    if w.a <= 0.0 or w.b < 0.0 or w.delta < 0.0 or w.a0 < 0.0:
        problems.append('need a > 0, b >= 0, a0 >= 0 and delta >= 0')
    if w.delta >= 2.0 * w.a * w.a / 3.0 and w.delta > 0.0:
        problems.append('delta must be small: delta < 2 a^2 / 3')
    if abs(w.a0**2 - w.a**2) > slack:
        problems.append('|a0^2 - a^2| exceeds delta')
    if abs((w.a_prime - w.a0) ** 2 + w.b_prime**2 - w.b**2) > slack:
        problems.append('|(a\' - a0)^2 + b\'^2 - b^2| exceeds delta')
    if abs(w.a_prime**2 + w.b_prime**2 - (w.a**2 + w.b**2)) > slack:
        problems.append('|a\'^2 + b\'^2 - (a^2 + b^2)| exceeds delta')
    return problems


def check_triangle_bound(w: TriangleWitness) -> bool:
    """Check the triangle-preservation bound on a perturbed right triangle.

    The preconditions are re-verified first: each squared side of the perturbed
    triangle must be within delta of the original one, and delta must be small
    (delta < 2a^2/3, the regime where the bound is positive).

    Args:
        w (TriangleWitness): The triangle and its perturbation.

    Returns:
        bool: True iff a_prime >= (2a^2 - 3 delta) / (2 sqrt(a^2 + delta)) - 1e-12.
    """
    problems = _witness_violations(w)
    if problems:
        msg = 'Triangle witness violates its preconditions: ' + '; '.join(problems)
        raise TriangleWitnessError(msg)
    return w.a_prime >= triangle_lower_bound(w.a, w.delta) - 1e-12


def random_triangle_witness(
    rng: np.random.Generator, max_tries: int = 1000
) -> TriangleWitness:
    """Draw a random witness that satisfies the perturbation bounds by construction.

    The three perturbed squared side lengths are drawn within delta of the original
    ones and the perturbed triangle is rebuilt from them, rejecting draws that
    violate the triangle inequality.
    """
    for _ in range(max_tries):
        a = float(rng.uniform(0.1, 10.0))
        b = float(rng.uniform(0.0, 10.0))
        delta = float(rng.uniform(0.0, 0.99)) * (2.0 / 3.0) * a * a
        a0_sq = a * a + float(rng.uniform(-delta, delta))
        leg_sq = b * b + float(rng.uniform(-delta, delta))
        hyp_sq = a * a + b * b + float(rng.uniform(-delta, delta))
        if a0_sq <= 0.0 or leg_sq < 0.0:
            continue
        a0 = math.sqrt(a0_sq)
        a_prime = (a0_sq + hyp_sq - leg_sq) / (2.0 * a0)
        b_prime_sq = hyp_sq - a_prime * a_prime
        if b_prime_sq < 0.0:
            continue
        return TriangleWitness(
            a=a, b=b, a0=a0, a_prime=a_prime, b_prime=math.sqrt(b_prime_sq), delta=delta
        )
    msg = 'Could not draw a valid triangle witness'
    raise RuntimeError(msg)
