"""Robust (outlier-trimming) hard-margin SVM through a random projection.

The one-class pipeline:

1. build a JL map f and reduce P to f(P);
2. run a black box on f(P) for a direction v;
3. keep the (1 - gamma) n points of f(P) with the largest projections onto v;
4. sparsify the kept points with Gilbert's algorithm, giving x = sum_i w_i f(p_i);
5. recover sum_i w_i p_i in the original space (f is linear, so it maps to x).

The two-class pipeline trims each class along v and runs the Minkowski-difference
Gilbert in step 4. The black boxes shipped here are alternating-trimming heuristics
with no proven approximation factor; any callable with the same signature may be
plugged in instead.
"""

from __future__ import annotations

import math
import time
from collections.abc import Callable
from dataclasses import dataclass, field
from functools import partial
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from jl_robust.errors import (
    ConvergenceError,
    NonSeparableError,
    ZeroPolytopeDistanceError,
)
from jl_robust.geometry import IndexArray, Point, PointSet, inlier_count
from jl_robust.hull import SparseSolution, gilbert, gilbert_minkowski
from jl_robust.jl import (
    DEFAULT_C,
    ConvexCombination,
    ProjectionMap,
    Variant,
    apply,
    clamp_dimension,
    make_projection,
    recover,
    target_dimension,
)
from jl_robust.log import get_logger
from jl_robust.timing import Timing

logger = get_logger(__name__)

DEFAULT_ROUNDS = 5
ESTIMATE_EPS = 0.5


@dataclass(frozen=True)
class BlackBoxDirection:
    """Normal vector returned by a black-box solver in the reduced space."""

    v: Point
    solver: str = 'custom'
    seconds: float = 0.0
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        v = np.asarray(self.v, dtype=np.float64).reshape(-1)
        if not np.any(v) or not np.all(np.isfinite(v)):
            msg = 'zero polytope distance: a black box returned a zero or non-finite direction'
            raise ZeroPolytopeDistanceError(msg)
        object.__setattr__(self, 'v', v)


OneClassBlackBox = Callable[[PointSet, float], BlackBoxDirection]
TwoClassBlackBox = Callable[[PointSet, PointSet, float, float], BlackBoxDirection]


@dataclass(frozen=True)
class EEstimate:
    """Bootstrap estimate of E = D^2 / rho^2 (diameter over optimal margin)."""

    diameter: float
    rho: float

    @property
    def E(self) -> float:  # noqa: N802
        if self.rho <= 0.0:
            return math.inf
        return self.diameter**2 / self.rho**2


@dataclass(frozen=True)
class MarginResult:
    """Recovered separating direction in the original space.

    Attributes:
        direction: f^-1(x), unnormalized.
        width: Margin of the declared inliers along the direction, clipped at 0. For
            one class the smallest projection, for two classes the gap between the
            class-1 minimum and the class-2 maximum.
        offset: Threshold along the unit direction: (1 - eps0) ||x|| for one class,
            the middle of the gap for two classes.
        separated: Whether the inliers are strictly separated in the original space.
        converged: False when the recovery Gilbert run hit its iteration budget and
            the result is built from its last iterate.
        inlier_indices: Kept indices, one array per class.
        combs: Convex combinations of `direction` over the original points.
        timing: Time spent in projection, black box and recovery.
        reduced_point: x, the Gilbert point in the reduced space.
        projection: Descriptor of the map used.
        epsilon: JL distortion the dimension was derived from, None when d~ was
            given explicitly.
        e_estimate: The E estimate behind `epsilon`, if one was made.
        blackbox_width: Trimmed margin of the black-box direction in the reduced space.
    """

    direction: Point
    width: float
    offset: float
    separated: bool
    inlier_indices: tuple[IndexArray, ...]
    combs: tuple[ConvexCombination, ...]
    timing: Timing
    reduced_point: Point
    projection: dict[str, Any]
    epsilon: float | None = None
    e_estimate: EEstimate | None = None
    blackbox_width: float = 0.0
    blackbox: str = 'custom'
    converged: bool = True

    @property
    def target_dim(self) -> int:
        return int(self.projection['dTilde'])

    @property
    def unit_direction(self) -> Point:
        return self.direction / np.linalg.norm(self.direction)

    def to_json(self) -> dict[str, Any]:
        return {
            'direction': self.direction.tolist(),
            'width': self.width,
            'offset': self.offset,
            'separated': self.separated,
            'inliers': [idx.tolist() for idx in self.inlier_indices],
            'timing': self.timing.as_dict(),
            'projection': self.projection,
            'epsilon': self.epsilon,
            'E': None if self.e_estimate is None else self.e_estimate.E,
            'blackbox': self.blackbox,
            'blackbox_width': self.blackbox_width,
            'converged': self.converged,
        }


def _projections(X: NDArray[np.float64], v: Point) -> NDArray[np.float64]:
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        msg = 'zero polytope distance: cannot project onto the zero vector'
        raise ZeroPolytopeDistanceError(msg)
    return X @ v / norm


def _separates(X: NDArray[np.float64], v: Point) -> bool:
    return bool(np.any(v)) and float(np.min(X @ v)) > 0.0


def _separates_classes(
    fP1: PointSet, fP2: PointSet, S1: IndexArray, S2: IndexArray, v: Point
) -> bool:
    if not np.any(v):
        return False
    return float(np.min(fP1.coords[S1] @ v)) > float(np.max(fP2.coords[S2] @ v))


def _top(proj: NDArray[np.float64], keep: int, largest: bool) -> IndexArray:
    key = -proj if largest else proj
    order = np.lexsort((np.arange(proj.size), key))
    return np.sort(order[:keep]).astype(np.intp)


def select_inliers_one_class(fP: PointSet, v: Point, gamma: float) -> IndexArray:
    """Indices of the ceil((1 - gamma) n) points with the largest projection onto v.

    Ties at the boundary keep the lower index. The result is sorted.

    >>> select_inliers_one_class(PointSet([[1.0], [3.0], [2.0]]), np.array([1.0]), 1 / 3)
    array([1, 2])
    """
    return _top(_projections(fP.coords, v), inlier_count(fP.n, gamma), largest=True)


def select_inliers_two_class(
    fP1: PointSet, fP2: PointSet, v: Point, gamma1: float, gamma2: float
) -> tuple[IndexArray, IndexArray]:
    """Keep the largest projections of class 1 and the smallest of class 2 along v."""
    s1 = _top(_projections(fP1.coords, v), inlier_count(fP1.n, gamma1), largest=True)
    s2 = _top(_projections(fP2.coords, v), inlier_count(fP2.n, gamma2), largest=False)
    return s1, s2


def margin_along(fP: PointSet, v: Point, gamma: float) -> float:
    """Signed margin of v after trimming: min projection over the selected inliers."""
    proj = _projections(fP.coords, v)
    return float(proj[_top(proj, inlier_count(fP.n, gamma), largest=True)].min())


def margin_along_two_class(
    fP1: PointSet, fP2: PointSet, v: Point, gamma1: float, gamma2: float
) -> float:
    """Signed gap along v between trimmed class 1 (above) and trimmed class 2 (below)."""
    proj1 = _projections(fP1.coords, v)
    proj2 = _projections(fP2.coords, v)
    low = proj1[_top(proj1, inlier_count(fP1.n, gamma1), largest=True)].min()
    high = proj2[_top(proj2, inlier_count(fP2.n, gamma2), largest=False)].max()
    return float(low - high)


def jl_epsilon(eps0: float, E: float) -> float:
    """JL distortion eps0 / (5 (E + 1)) that preserves the margin for a given E.

    >>> jl_epsilon(0.5, 4.0)
    0.02
    """
    if math.isinf(E):
        return 0.0
    return eps0 / (5.0 * (E + 1.0))


def _sampled_diameter(X: NDArray[np.float64], rng: np.random.Generator) -> float:
    n = X.shape[0]
    if n < 2:
        return 0.0
    first = rng.integers(n, size=2 * n)
    second = rng.integers(n, size=2 * n)
    return float(np.max(np.linalg.norm(X[first] - X[second], axis=1)))


def _solution_value(run: Callable[[], SparseSolution]) -> float:
    try:
        sol = run()
    except ConvergenceError:
        return 0.0
    return 0.0 if sol.is_zero else sol.value


def estimate_e(P: PointSet, gamma: float, rng: np.random.Generator) -> EEstimate:
    """Estimate E for a one-class instance.

    D is the largest distance among 2n random pairs (an underestimate of the
    diameter); rho is a coarse Gilbert value on the set trimmed along its mean, 0 when that run
    does not converge.
    """
    mean = P.coords.mean(axis=0)
    kept = P if not np.any(mean) else P.subset(select_inliers_one_class(P, mean, gamma))
    rho = _solution_value(lambda: gilbert(kept, ESTIMATE_EPS))
    return EEstimate(diameter=_sampled_diameter(P.coords, rng), rho=rho)


def estimate_e_two_class(
    P1: PointSet, P2: PointSet, gamma1: float, gamma2: float, rng: np.random.Generator
) -> EEstimate:
    """Estimate E for a two-class instance (D bounds the Minkowski-difference diameter)."""
    u = P1.coords.mean(axis=0) - P2.coords.mean(axis=0)
    if np.any(u):
        s1, s2 = select_inliers_two_class(P1, P2, u, gamma1, gamma2)
        K1, K2 = P1.subset(s1), P2.subset(s2)
    else:
        K1, K2 = P1, P2
    rho = _solution_value(lambda: gilbert_minkowski(K1, K2, ESTIMATE_EPS))
    diameter = _sampled_diameter(P1.coords, rng) + _sampled_diameter(P2.coords, rng)
    return EEstimate(diameter=diameter, rho=rho)


def _choose_dimension(
    n: int, d: int, estimate: EEstimate, eps0: float, c: float
) -> tuple[int, float]:
    epsilon = jl_epsilon(eps0, estimate.E)
    if epsilon <= 0.0 or n < 2:
        logger.warning('No positive margin estimate; keeping the full dimension %d', d)
        return d, epsilon
    wanted = target_dimension(n, epsilon, c)
    if wanted > d:
        logger.warning(
            'JL dimension %d for epsilon %.3g exceeds d = %d; clamping', wanted, epsilon, d
        )
    return clamp_dimension(wanted, d), epsilon


def _build_projection(
    variant: Variant | str,
    d: int,
    target_dim: int | None,
    seed: int,
    estimate: Callable[[], EEstimate],
    n: int,
    eps0: float,
    c: float,
) -> tuple[ProjectionMap, float | None, EEstimate | None]:
    if Variant(variant) is Variant.none:
        return make_projection(Variant.none, d, d, seed), None, None
    if target_dim is not None:
        return make_projection(variant, d, clamp_dimension(target_dim, d), seed), None, None
    est = estimate()
    d_tilde, epsilon = _choose_dimension(n, d, est, eps0, c)
    logger.info('E estimate %.4g gives epsilon %.4g and d~ = %d', est.E, epsilon, d_tilde)
    return make_projection(variant, d, d_tilde, seed), epsilon, est


def default_blackbox_one_class(
    fP: PointSet, gamma: float, eps0: float = 0.1, rounds: int = DEFAULT_ROUNDS
) -> BlackBoxDirection:
    """Alternating trimming: Gilbert on the current inliers, then re-select by projection.

    A round whose Gilbert run does not separate the current inliers from the origin
    (it reached the origin or ran out of iterations) falls back to the mean of the
    current inliers as the trimming direction. The loop stops once the inlier set is stable.

    Args:
        fP (PointSet): Reduced points.
        gamma (float): Outlier fraction.
        eps0 (float, optional): Gilbert accuracy. Defaults to 0.1.
        rounds (int, optional): Maximum number of rounds. Defaults to 5.

    Raises:
        NonSeparableError: Every round found the origin inside the hull.

    Returns:
        BlackBoxDirection: The last non-degenerate Gilbert direction.
    """
    if rounds < 1:
        msg = f'rounds must be at least 1, got {rounds}'
        raise ValueError(msg)
    start = time.perf_counter()
    S = np.arange(fP.n, dtype=np.intp)
    best: Point | None = None
    degenerate = 0
    used = 0
    for used in range(1, rounds + 1):
        try:
            sol = gilbert(fP.subset(S), eps0)
        except ConvergenceError as exc:
            sol = exc.best
        if sol is None or sol.is_zero or not _separates(fP.coords[S], sol.point):
            degenerate += 1
            candidate = fP.coords[S].mean(axis=0)
            logger.warning('Round %d: inliers contain the origin; trimming along their mean', used)
            if not np.any(candidate):
                break
        else:
            candidate = best = sol.point
        new_S = select_inliers_one_class(fP, candidate, gamma)
        if np.array_equal(new_S, S):
            break
        S = new_S
    if best is None:
        msg = f'The reduced instance is not separable: {degenerate} of {used} rounds degenerate'
        raise NonSeparableError(msg, {'rounds': used, 'degenerate_rounds': degenerate})
    return BlackBoxDirection(
        v=best,
        solver='alternating-gilbert',
        seconds=time.perf_counter() - start,
        metadata={'rounds': used, 'degenerate_rounds': degenerate, 'inliers': S},
    )


def default_blackbox_two_class(
    fP1: PointSet,
    fP2: PointSet,
    gamma1: float,
    gamma2: float,
    eps0: float = 0.1,
    rounds: int = DEFAULT_ROUNDS,
) -> BlackBoxDirection:
    """Two-class alternating trimming with the Minkowski-difference Gilbert."""
    if rounds < 1:
        msg = f'rounds must be at least 1, got {rounds}'
        raise ValueError(msg)
    start = time.perf_counter()
    S1 = np.arange(fP1.n, dtype=np.intp)
    S2 = np.arange(fP2.n, dtype=np.intp)
    best: Point | None = None
    degenerate = 0
    used = 0
    for used in range(1, rounds + 1):
        try:
            sol = gilbert_minkowski(fP1.subset(S1), fP2.subset(S2), eps0)
        except ConvergenceError as exc:
            sol = exc.best
        if sol is None or sol.is_zero or not _separates_classes(fP1, fP2, S1, S2, sol.point):
            degenerate += 1
            candidate = fP1.coords[S1].mean(axis=0) - fP2.coords[S2].mean(axis=0)
            logger.warning(
                'Round %d: class hulls overlap; trimming along the mean difference', used
            )
            if not np.any(candidate):
                break
        else:
            candidate = best = sol.point
        new_S1, new_S2 = select_inliers_two_class(fP1, fP2, candidate, gamma1, gamma2)
        if np.array_equal(new_S1, S1) and np.array_equal(new_S2, S2):
            break
        S1, S2 = new_S1, new_S2
    if best is None:
        msg = f'The reduced classes are not separable: {degenerate} of {used} rounds degenerate'
        raise NonSeparableError(msg, {'rounds': used, 'degenerate_rounds': degenerate})
    return BlackBoxDirection(
        v=best,
        solver='alternating-gilbert-minkowski',
        seconds=time.perf_counter() - start,
        metadata={'rounds': used, 'degenerate_rounds': degenerate, 'inliers': (S1, S2)},
    )


def _estimation_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng([seed, 1])


def solve_one_class(
    P: PointSet,
    gamma: float,
    eps0: float,
    variant: Variant | str = Variant.gaussian,
    seed: int = 0,
    blackbox: OneClassBlackBox | None = None,
    target_dim: int | None = None,
    projection: ProjectionMap | None = None,
    c: float = DEFAULT_C,
    max_iter: int | None = None,
) -> MarginResult:
    """Reduce, solve, trim, sparsify and recover a one-class margin with outliers.

    Args:
        P (PointSet): Points to separate from the origin.
        gamma (float): Outlier fraction in [0, 1).
        eps0 (float): Gilbert accuracy in (0, 1).
        variant (Variant | str, optional): JL construction. Defaults to gaussian.
        seed (int, optional): Seed of the map. Defaults to 0.
        blackbox (OneClassBlackBox | None, optional): Solver on the reduced points.
            Defaults to [default_blackbox_one_class][jl_robust.svm.default_blackbox_one_class].
        target_dim (int | None, optional): Explicit d~. Defaults to the dimension
            implied by jl_epsilon(eps0, E) with E estimated from the data.
        projection (ProjectionMap | None, optional): A prebuilt map; overrides
            `variant`, `seed` and `target_dim`.
        c (float, optional): JL constant. Defaults to 8.
        max_iter (int | None, optional): Iteration budget of the recovery Gilbert run.
            When it runs out the last iterate is used and `converged` is False.

    Raises:
        NonSeparableError: The trimmed reduced inliers contain the origin in their hull.

    Returns:
        MarginResult: The recovered direction with its width and timings.
    """
    _check_fractions(eps0, gamma)
    timing = Timing()
    epsilon: float | None = None
    est: EEstimate | None = None
    with timing.stage('t_jl'):
        if projection is None:
            projection, epsilon, est = _build_projection(
                variant,
                P.d,
                target_dim,
                seed,
                lambda: estimate_e(P, gamma, _estimation_rng(seed)),
                P.n,
                eps0,
                c,
            )
        fP = apply(projection, P)
    box = blackbox or partial(default_blackbox_one_class, eps0=eps0)
    with timing.stage('t_blackbox'):
        bb = box(fP, gamma)
    with timing.stage('t_recover'):
        S = select_inliers_one_class(fP, bb.v, gamma)
        sol, converged = _gilbert_or_best(
            lambda: gilbert(fP.subset(S), eps0, max_iter=max_iter)
        )
        if sol.is_zero:
            msg = 'The selected reduced inliers are not separable from the origin'
            raise NonSeparableError(
                msg,
                {'stage': 'recover', 'inliers': S.tolist(), 'target_dim': projection.target_dim},
            )
        comb = sol.comb.remap(S)
        direction = recover(comb, P)
        proj = _projections(P.coords[S], direction)
    low = float(proj.min())
    width = max(low, 0.0)
    logger.info(
        'One-class margin: %d inliers, width %.6g, d~ = %d, %.3fs',
        S.size,
        width,
        projection.target_dim,
        timing.total,
    )
    return MarginResult(
        direction=direction,
        width=width,
        offset=(1.0 - eps0) * float(np.linalg.norm(sol.point)),
        separated=low > 0.0,
        converged=converged,
        inlier_indices=(S,),
        combs=(comb,),
        timing=timing,
        reduced_point=sol.point,
        projection=projection.to_descriptor(),
        epsilon=epsilon,
        e_estimate=est,
        blackbox_width=margin_along(fP, bb.v, gamma),
        blackbox=bb.solver,
    )


def solve_two_class(
    P1: PointSet,
    P2: PointSet,
    gamma1: float,
    gamma2: float,
    eps0: float,
    variant: Variant | str = Variant.gaussian,
    seed: int = 0,
    blackbox: TwoClassBlackBox | None = None,
    target_dim: int | None = None,
    projection: ProjectionMap | None = None,
    c: float = DEFAULT_C,
    max_iter: int | None = None,
) -> MarginResult:
    """Two-class counterpart of [solve_one_class][jl_robust.svm.solve_one_class].

    Class 1 ends up on the positive side of the recovered direction
    recover(comb1, P1) - recover(comb2, P2).
    """
    _check_fractions(eps0, gamma1, gamma2)
    timing = Timing()
    epsilon: float | None = None
    est: EEstimate | None = None
    with timing.stage('t_jl'):
        if projection is None:
            projection, epsilon, est = _build_projection(
                variant,
                P1.d,
                target_dim,
                seed,
                lambda: estimate_e_two_class(P1, P2, gamma1, gamma2, _estimation_rng(seed)),
                P1.n + P2.n,
                eps0,
                c,
            )
        fP1 = apply(projection, P1)
        fP2 = apply(projection, P2)
    box = blackbox or partial(default_blackbox_two_class, eps0=eps0)
    with timing.stage('t_blackbox'):
        bb = box(fP1, fP2, gamma1, gamma2)
    with timing.stage('t_recover'):
        S1, S2 = select_inliers_two_class(fP1, fP2, bb.v, gamma1, gamma2)
        sol, converged = _gilbert_or_best(
            lambda: gilbert_minkowski(
                fP1.subset(S1), fP2.subset(S2), eps0, max_iter=max_iter
            )
        )
        if sol.is_zero:
            msg = 'The selected reduced classes overlap'
            raise NonSeparableError(
                msg,
                {
                    'stage': 'recover',
                    'inliers': [S1.tolist(), S2.tolist()],
                    'target_dim': projection.target_dim,
                },
            )
        comb1 = sol.combs[0].remap(S1)
        comb2 = sol.combs[1].remap(S2)
        direction = recover(comb1, P1) - recover(comb2, P2)
        if not np.any(direction):
            msg = 'The recovered direction is zero'
            raise NonSeparableError(msg, {'stage': 'recover'})
        low = float(_projections(P1.coords[S1], direction).min())
        high = float(_projections(P2.coords[S2], direction).max())
    gap = low - high
    logger.info(
        'Two-class margin: %d + %d inliers, gap %.6g, d~ = %d, %.3fs',
        S1.size,
        S2.size,
        gap,
        projection.target_dim,
        timing.total,
    )
    return MarginResult(
        direction=direction,
        width=max(gap, 0.0),
        offset=(low + high) / 2.0,
        separated=gap > 0.0,
        converged=converged,
        inlier_indices=(S1, S2),
        combs=(comb1, comb2),
        timing=timing,
        reduced_point=sol.point,
        projection=projection.to_descriptor(),
        epsilon=epsilon,
        e_estimate=est,
        blackbox_width=margin_along_two_class(fP1, fP2, bb.v, gamma1, gamma2),
        blackbox=bb.solver,
    )


def _gilbert_or_best(run: Callable[[], SparseSolution]) -> tuple[SparseSolution, bool]:
    """The solution and whether it converged; the last iterate when the budget ran out."""
    try:
        return run(), True
    except ConvergenceError as exc:
        if exc.best is None:
            raise
        logger.warning('%s; using the last iterate', exc)
        return exc.best, False


def _check_fractions(eps0: float, *gammas: float) -> None:
    if not 0.0 < eps0 < 1.0:
        msg = f'eps0 must lie in (0, 1), got {eps0}'
        raise ValueError(msg)
    for gamma in gammas:
        if not 0.0 <= gamma < 1.0:
            msg = f'gamma must lie in [0, 1), got {gamma}'
            raise ValueError(msg)


def predict(result: MarginResult, X: ArrayLike) -> NDArray[np.int64]:
    """Labels +1 / -1 from the side of the recovered hyperplane each row falls on."""
    proj = np.atleast_2d(np.asarray(X, dtype=np.float64)) @ result.unit_direction
    return np.where(proj >= result.offset, 1, -1).astype(np.int64)


def accuracy(result: MarginResult, X: ArrayLike, labels: ArrayLike) -> float:
    """Fraction of rows whose predicted label matches `labels`."""
    y = np.asarray(labels)
    if y.size == 0:
        return math.nan
    return float(np.mean(predict(result, X) == y))
