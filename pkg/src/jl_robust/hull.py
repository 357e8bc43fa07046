"""Sparse convex-hull solvers that track their convex coefficients.

* [gilbert][jl_robust.hull.gilbert]: Gilbert's algorithm for the distance from the
  origin to conv(S).
* [gilbert_minkowski][jl_robust.hull.gilbert_minkowski]: the same iteration over the
  Minkowski difference conv(Q1) - conv(Q2) without materializing it, giving the
  distance between two hulls.
* [bc_meb][jl_robust.hull.bc_meb]: the Badoiu-Clarkson (1 + eps)-approximate
  minimum enclosing ball.

Every solver returns a [SparseSolution][jl_robust.hull.SparseSolution] whose point is
an explicit convex combination of few input points. Ties in every argmin/argmax go to
the lowest index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numpy.typing import NDArray

from jl_robust.errors import (
    ConvergenceError,
    DimensionMismatchError,
    InvalidPointSetError,
    ZeroPolytopeDistanceError,
)
from jl_robust.geometry import (
    MEB_ORACLE_MAX_DIM,
    MEB_ORACLE_MAX_POINTS,
    Point,
    PointSet,
    minimum_enclosing_ball,
)
from jl_robust.jl import ConvexCombination
from jl_robust.log import get_logger

logger = get_logger(__name__)

ZERO_TOL = 1e-12
CHECK_TOL = 1e-12
MAX_DEFAULT_ITER = 100_000
MEB_REFINE_ROUNDS = 100


class SolutionStatus(str, Enum):
    converged = 'converged'
    zero_distance = 'zero_distance'


@dataclass(frozen=True)
class SparseSolution:
    """Result of a sparse hull solver.

    Attributes:
        point: The final iterate v (Gilbert) or ball center (BC).
        combs: One convex combination over the input set, or two (over Q1 and Q2)
            for the Minkowski variant, in which case point = recover(Q1) - recover(Q2).
        iterations: Number of iterates, counting the starting one.
        value: ||point|| for Gilbert, the covering radius of the center for BC.
        status: `zero_distance` when the origin was found inside the hull.
        history: ||v_i|| per iterate (Gilbert) or the MEB(T) radius per round (BC).
        picks: Input index chosen at each iterate. For the Minkowski variant the
            pick is the row i * |Q2| + j of the materialized difference set.
    """

    point: Point
    combs: tuple[ConvexCombination, ...]
    iterations: int
    value: float
    status: SolutionStatus = SolutionStatus.converged
    history: list[float] = field(default_factory=list)
    picks: list[int] = field(default_factory=list)

    @property
    def comb(self) -> ConvexCombination:
        return self.combs[0]

    @property
    def is_zero(self) -> bool:
        return self.status is SolutionStatus.zero_distance


def projection_distance(p: Point, v: Point) -> float:
    """Signed length of the projection of p onto the line through v, <p, v> / ||v||.

    >>> projection_distance(np.array([1.0, 1.0]), np.array([2.0, 0.0]))
    1.0
    """
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        msg = 'zero polytope distance: cannot project onto the zero vector'
        raise ZeroPolytopeDistanceError(msg)
    return float(np.dot(p, v)) / norm


def epsilon_approx_check(v: Point, S: PointSet, eps0: float) -> bool:
    """Whether ||v|| <= min_p <p, v> / ((1 - eps0) ||v||) over p in S.

    >>> S = PointSet([[1.0, 0.0], [0.0, 1.0]])
    >>> epsilon_approx_check(np.array([1.0, 0.0]), S, 0.1)
    False
    >>> epsilon_approx_check(np.array([0.5, 0.5]), S, 0.01)
    True
    """
    _check_eps(eps0, 'eps0')
    v = np.asarray(v, dtype=np.float64)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        msg = 'zero polytope distance: the origin lies in the hull of S'
        raise ZeroPolytopeDistanceError(msg)
    min_proj = float(np.min(S.coords @ v)) / norm
    return norm * (1.0 - eps0) <= min_proj + CHECK_TOL * max(1.0, norm)


def _check_eps(eps: float, name: str) -> None:
    if not 0.0 < eps < 1.0:
        msg = f'{name} must lie in (0, 1), got {eps}'
        raise ValueError(msg)


def gilbert_iteration_bound(E: float, eps0: float) -> int:
    """Iteration bound 2 ceil(2E / eps0) for E = D^2 / rho^2.

    >>> gilbert_iteration_bound(4.0, 0.5)
    32
    """
    return 2 * math.ceil(2.0 * E / eps0)


def _default_max_iter(spread_sq: float, start_sq: float, eps0: float) -> int:
    if start_sq <= 0.0:
        return MAX_DEFAULT_ITER
    bound = 10 * gilbert_iteration_bound(spread_sq / start_sq, eps0)
    return int(min(max(bound, 10), MAX_DEFAULT_ITER))


def _line_search(v: Point, p: Point) -> float:
    diff = v - p
    denom = float(diff @ diff)
    if denom == 0.0:
        return 0.0
    return min(1.0, max(0.0, float(v @ diff) / denom))


def _normalized(weights: NDArray[np.float64]) -> ConvexCombination:
    return ConvexCombination.from_dense(weights / weights.sum())


def gilbert(
    S: PointSet,
    eps0: float,
    max_iter: int | None = None,
    start: int | None = None,
) -> SparseSolution:
    """Approximate the polytope distance of S with Gilbert's algorithm.

    Starting from the point of S closest to the origin, each iteration picks the
    point p with the smallest projection onto the current iterate v and moves v to
    the point of segment [v, p] closest to the origin. The loop stops once
    ||v|| <= min_p <p, v> / ((1 - eps0) ||v||), so ||v|| is within a factor
    1 / (1 - eps0) of the true distance.

    Args:
        S (PointSet): Input points.
        eps0 (float): Approximation parameter in (0, 1).
        max_iter (int | None, optional): Iteration budget. Defaults to ten times the
            theoretical bound estimated from the starting vertex.
        start (int | None, optional): Index of the starting vertex. Defaults to the
            point closest to the origin.

    Raises:
        ConvergenceError: The budget ran out; `best` holds the last iterate.

    Returns:
        SparseSolution: The iterate with its coefficients. When the iterate reaches
            the origin the status is `zero_distance` and the value 0.

    Examples:
        >>> sol = gilbert(PointSet([[1.0, 0.0], [0.0, 1.0]]), 0.1)
        >>> sol.point.tolist(), sol.iterations
        ([0.5, 0.5], 2)
    """
    _check_eps(eps0, 'eps0')
    X = S.coords
    sq = np.einsum('ij,ij->i', X, X)
    scale = max(1.0, math.sqrt(float(sq.max())))
    zero_tol = ZERO_TOL * scale

    i0 = int(np.argmin(sq)) if start is None else int(start)
    if not 0 <= i0 < S.n:
        msg = f'start index {i0} out of range for {S.n} points'
        raise InvalidPointSetError(msg)
    v = X[i0].copy()
    weights = np.zeros(S.n)
    weights[i0] = 1.0
    if max_iter is None:
        spread = X - v
        max_iter = _default_max_iter(
            float(np.max(np.einsum('ij,ij->i', spread, spread))), float(v @ v), eps0
        )

    history = [float(np.linalg.norm(v))]
    picks = [i0]
    while True:
        norm = history[-1]
        if norm <= zero_tol:
            logger.debug('Gilbert reached the origin after %d iterations', len(history))
            return SparseSolution(
                point=np.zeros(S.d),
                combs=(_normalized(weights),),
                iterations=len(history),
                value=0.0,
                status=SolutionStatus.zero_distance,
                history=history,
                picks=picks,
            )
        proj = X @ v
        j = int(np.argmin(proj))
        if norm * (1.0 - eps0) <= float(proj[j]) / norm + CHECK_TOL * max(1.0, norm):
            break
        if len(history) >= max_iter:
            comb = _normalized(weights)
            best = SparseSolution(
                point=comb.weights @ X[comb.indices],
                combs=(comb,),
                iterations=len(history),
                value=norm,
                history=history,
                picks=picks,
            )
            msg = f'Gilbert did not converge within {max_iter} iterations (||v|| = {norm:.6g})'
            raise ConvergenceError(msg, best)
        t = _line_search(v, X[j])
        v = (1.0 - t) * v + t * X[j]
        weights *= 1.0 - t
        weights[j] += t
        history.append(float(np.linalg.norm(v)))
        picks.append(j)

    comb = _normalized(weights)
    point = comb.weights @ X[comb.indices]
    logger.debug('Gilbert converged: %d iterations, ||v|| = %.6g', len(history), history[-1])
    return SparseSolution(
        point=point,
        combs=(comb,),
        iterations=len(history),
        value=float(np.linalg.norm(point)),
        history=history,
        picks=picks,
    )


def _closest_pair(Q1: NDArray[np.float64], Q2: NDArray[np.float64]) -> tuple[int, int]:
    """Pair (i, j) minimising ||Q1[i] - Q2[j]||, lowest flat index i * |Q2| + j on ties."""
    best_i, best_j, best_sq = 0, 0, math.inf
    for i, a in enumerate(Q1):
        diff = a - Q2
        sq = np.einsum('ij,ij->i', diff, diff)
        j = int(np.argmin(sq))
        if sq[j] < best_sq:
            best_i, best_j, best_sq = i, j, float(sq[j])
    return best_i, best_j



def gilbert_minkowski(
    Q1: PointSet,
    Q2: PointSet,
    eps0: float,
    max_iter: int | None = None,
    start: tuple[int, int] | None = None,
) -> SparseSolution:
    """Gilbert's algorithm on the Minkowski difference Q1 - Q2, computed implicitly.

    The point of Q1 - Q2 with the smallest projection onto v is q - q' with q the
    argmin over Q1 and q' the argmax over Q2, so each iteration costs
    O((|Q1| + |Q2|) d). Coefficients are tracked separately over Q1 and Q2.

    Args:
        Q1 (PointSet): First class (positive side).
        Q2 (PointSet): Second class.
        eps0 (float): Approximation parameter in (0, 1).
        max_iter (int | None, optional): Iteration budget (default as in `gilbert`).
        start (tuple[int, int] | None, optional): Starting pair (i, j) meaning
            Q1[i] - Q2[j]. Defaults to the closest pair, which is the starting
            vertex `gilbert` picks on the materialized difference.

    Returns:
        SparseSolution: `combs` is (comb over Q1, comb over Q2); status
            `zero_distance` means the hulls intersect.

    Examples:
        >>> sol = gilbert_minkowski(PointSet([[0.0, 2.0]]), PointSet([[0.0, 0.0]]), 0.1)
        >>> sol.point.tolist(), sol.value
        ([0.0, 2.0], 2.0)
    """
    _check_eps(eps0, 'eps0')
    if Q1.d != Q2.d:
        msg = f'Dimension mismatch: {Q1.d} vs {Q2.d}'
        raise DimensionMismatchError(msg)
    A, B = Q1.coords, Q2.coords
    m2 = Q2.n
    norms_a = np.sqrt(np.einsum('ij,ij->i', A, A))
    norms_b = np.sqrt(np.einsum('ij,ij->i', B, B))
    scale = max(1.0, float(norms_a.max() + norms_b.max()))
    zero_tol = ZERO_TOL * scale

    i0, j0 = _closest_pair(A, B) if start is None else start
    v = A[i0] - B[j0]
    w1 = np.zeros(Q1.n)
    w2 = np.zeros(m2)
    w1[i0] = w2[j0] = 1.0
    if max_iter is None:
        reach1 = float(np.max(np.linalg.norm(A - A[i0], axis=1)))
        reach2 = float(np.max(np.linalg.norm(B - B[j0], axis=1)))
        max_iter = _default_max_iter((reach1 + reach2) ** 2, float(v @ v), eps0)

    history = [float(np.linalg.norm(v))]
    picks = [i0 * m2 + j0]

    def solution(status: SolutionStatus) -> SparseSolution:
        c1, c2 = _normalized(w1), _normalized(w2)
        point = c1.weights @ A[c1.indices] - c2.weights @ B[c2.indices]
        if status is SolutionStatus.zero_distance:
            point = np.zeros(Q1.d)
        return SparseSolution(
            point=point,
            combs=(c1, c2),
            iterations=len(history),
            value=float(np.linalg.norm(point)),
            status=status,
            history=history,
            picks=picks,
        )

    while True:
        norm = history[-1]
        if norm <= zero_tol:
            logger.debug('Hulls intersect: Minkowski Gilbert reached the origin')
            return solution(SolutionStatus.zero_distance)
        proj1 = A @ v
        proj2 = B @ v
        i = int(np.argmin(proj1))
        j = int(np.argmax(proj2))
        min_proj = float(proj1[i] - proj2[j])
        if norm * (1.0 - eps0) <= min_proj / norm + CHECK_TOL * max(1.0, norm):
            return solution(SolutionStatus.converged)
        if len(history) >= max_iter:
            msg = (
                f'Minkowski Gilbert did not converge within {max_iter} iterations '
                f'(||v|| = {norm:.6g})'
            )
            raise ConvergenceError(msg, solution(SolutionStatus.converged))
        p = A[i] - B[j]
        t = _line_search(v, p)
        v = (1.0 - t) * v + t * p
        w1 *= 1.0 - t
        w2 *= 1.0 - t
        w1[i] += t
        w2[j] += t
        history.append(float(np.linalg.norm(v)))
        picks.append(i * m2 + j)


def _meb_of(T: NDArray[np.float64]) -> tuple[NDArray[np.float64], float]:
    """Convex weights of a (near-)minimum enclosing ball of the rows of T, and its radius."""
    if T.shape[1] <= MEB_ORACLE_MAX_DIM or T.shape[0] <= MEB_ORACLE_MAX_POINTS:
        ball = minimum_enclosing_ball(T)
        weights = np.zeros(T.shape[0])
        weights[ball.support] = np.clip(ball.weights, 0.0, None)
        if weights.sum() <= 0.0:
            weights[ball.support[0]] = 1.0
    else:
        # core-set averaging: c_{i+1} = c_i + (far - c_i) / (i + 1)
        weights = np.zeros(T.shape[0])
        weights[0] = 1.0
        center = T[0].copy()
        for i in range(1, MEB_REFINE_ROUNDS + 1):
            far = int(np.argmax(np.einsum('ij,ij->i', T - center, T - center)))
            step = 1.0 / (i + 1)
            center += step * (T[far] - center)
            weights *= 1.0 - step
            weights[far] += step
    weights /= weights.sum()
    center = weights @ T
    radius = float(np.sqrt(np.max(np.einsum('ij,ij->i', T - center, T - center))))
    return weights, radius


def bc_meb(S: PointSet, eps: float) -> SparseSolution:
    """(1 + eps)-approximate minimum enclosing ball by Badoiu-Clarkson.

    T starts as {S[0]}; each round adds the point of S farthest from the center of
    MEB(T) and recomputes that ball, for at most ceil(2 / eps) additions. The loop
    stops early once MEB(T) already covers S. MEB(T) is solved exactly while T is
    small (it holds at most ceil(2 / eps) + 1 points); otherwise by
    `MEB_REFINE_ROUNDS` rounds of farthest-point averaging.

    Args:
        S (PointSet): Points to enclose.
        eps (float): Approximation parameter in (0, 1).

    Returns:
        SparseSolution: The center as a convex combination over S, the covering
            radius of that center over S as `value`, and the MEB(T) radii per round.

    Examples:
        >>> sol = bc_meb(PointSet([[-1.0, 0.0], [1.0, 0.0]]), 0.5)
        >>> sol.point.tolist(), sol.value
        ([0.0, 0.0], 1.0)
    """
    _check_eps(eps, 'eps')
    X = S.coords
    members = [0]
    weights = np.ones(1)
    center = X[0].copy()
    radius = 0.0
    history = [radius]
    for _ in range(math.ceil(2.0 / eps)):
        diff = X - center
        dist = np.sqrt(np.einsum('ij,ij->i', diff, diff))
        far = int(np.argmax(dist))
        if dist[far] <= radius * (1.0 + 1e-12) or far in members:
            break
        members.append(far)
        weights, radius = _meb_of(X[members])
        center = weights @ X[members]
        history.append(radius)

    dense = np.zeros(S.n)
    dense[members] = weights
    comb = _normalized(dense)
    point = comb.weights @ X[comb.indices]
    diff = X - point
    value = float(np.sqrt(np.max(np.einsum('ij,ij->i', diff, diff))))
    logger.debug('BC-MEB: %d rounds, |T| = %d, radius %.6g', len(history), len(members), value)
    return SparseSolution(
        point=point,
        combs=(comb,),
        iterations=len(history),
        value=value,
        history=history,
        picks=members,
    )
