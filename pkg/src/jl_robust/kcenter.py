"""k-center clustering with outliers through a random projection.

`solve_kcenter` reduces the points with a JL map, clusters them with a black box
that leaves out floor(gamma n) points, computes a (1 + eps)-approximate minimum
enclosing ball of every reduced cluster with Badoiu-Clarkson and lifts each center
back through its convex coefficients. The default black box is the greedy
3-approximation of Charikar et al. for k-center with outliers.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from jl_robust.errors import CoverageError
from jl_robust.geometry import IndexArray, PointSet, inlier_count, pairwise_distances
from jl_robust.hull import bc_meb
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
from jl_robust.kernels import greedy_disk_cover
from jl_robust.log import get_logger
from jl_robust.timing import Timing

logger = get_logger(__name__)

EXPANSION = 3.0


@dataclass(frozen=True)
class Clustering:
    """k clusters as a label vector (-1 marks a discarded point).

    Attributes:
        labels: Cluster id per point.
        centers: Index of each cluster's center point, -1 if unknown.
        radius: Largest distance of a clustered point to its center.
        threshold: The disk radius r the greedy settled on.
    """

    labels: NDArray[np.int64]
    centers: IndexArray
    radius: float = math.nan
    threshold: float = math.nan

    @property
    def k(self) -> int:
        return int(self.centers.size)

    @property
    def assigned(self) -> int:
        return int(np.count_nonzero(self.labels >= 0))

    def members(self, j: int) -> IndexArray:
        return np.flatnonzero(self.labels == j)

    @classmethod
    def from_labels(cls, labels: ArrayLike, k: int) -> Clustering:
        """Wrap a bare label vector; centers are left unknown."""
        return cls(
            labels=np.asarray(labels, dtype=np.int64),
            centers=np.full(k, -1, dtype=np.intp),
        )


KCenterBlackBox = Callable[[PointSet, int, float], Clustering]


@dataclass(frozen=True)
class KCenterResult:
    """Recovered centers in the original space.

    `radius` is measured over the black-box clusters (point i against the center
    of its own cluster); `reassigned_radius` comes from a fresh nearest-center
    assignment that discards the floor(gamma n) farthest points.
    """

    centers: NDArray[np.float64]
    radius: float
    assignment: NDArray[np.int64]
    combs: tuple[ConvexCombination, ...]
    timing: Timing
    reduced_centers: NDArray[np.float64]
    projection: dict[str, Any]
    epsilon: float | None
    blackbox_radius: float
    reassigned_radius: float
    reassigned_assignment: NDArray[np.int64]

    @property
    def k(self) -> int:
        return int(self.centers.shape[0])

    @property
    def target_dim(self) -> int:
        return int(self.projection['dTilde'])

    def to_json(self) -> dict[str, Any]:
        return {
            'centers': self.centers.tolist(),
            'radius': self.radius,
            'assignment': self.assignment.tolist(),
            'timing': self.timing.as_dict(),
            'projection': self.projection,
            'epsilon': self.epsilon,
            'blackbox_radius': self.blackbox_radius,
            'reassigned_radius': self.reassigned_radius,
        }


def _keep_closest(
    labels: NDArray[np.int64], dist_to_center: NDArray[np.float64], keep: int
) -> NDArray[np.int64]:
    """Drop clustered points, farthest first (higher index on ties), down to `keep`."""
    labels = labels.copy()
    clustered = np.flatnonzero(labels >= 0)
    if clustered.size > keep:
        order = np.lexsort((clustered, dist_to_center[clustered]))
        labels[clustered[order[keep:]]] = -1
    return labels


def _radius(dist_to_center: NDArray[np.float64], labels: NDArray[np.int64]) -> float:
    kept = labels >= 0
    return float(dist_to_center[kept].max()) if np.any(kept) else 0.0


def charikar_kcenter_outliers(P: PointSet, k: int, gamma: float) -> Clustering:
    """Greedy k-center with outliers (3-approximation against input-point centers).

    For a radius r the greedy repeats k times: take the point whose r-ball holds the
    most uncovered points and remove everything within 3r of it. r is feasible when
    at least ceil((1 - gamma) n) points get removed. Candidate radii are the sorted
    pairwise distances (0 included); a binary search keeps a feasible upper end and
    an infeasible lower end. Every candidate at or above the best radius achievable
    with input-point centers is feasible, so the result is at most 3 times that
    radius. Surplus covered points are discarded farthest first.

    Args:
        P (PointSet): Points to cluster.
        k (int): Number of clusters, at least 1.
        gamma (float): Outlier fraction in [0, 1).

    Returns:
        Clustering: Exactly ceil((1 - gamma) n) labelled points.

    Examples:
        >>> P = PointSet([[0.0], [1.0], [10.0], [11.0], [100.0]])
        >>> clustering = charikar_kcenter_outliers(P, 2, 0.2)
        >>> clustering.labels.tolist()
        [0, 0, 1, 1, -1]
    """
    if k < 1:
        msg = f'k must be at least 1, got {k}'
        raise ValueError(msg)
    if not 0.0 <= gamma < 1.0:
        msg = f'gamma must lie in [0, 1), got {gamma}'
        raise ValueError(msg)
    n = P.n
    keep = inlier_count(n, gamma)
    if k >= n:
        labels = np.arange(n, dtype=np.int64)
        labels = _keep_closest(labels, np.zeros(n), keep)
        centers = np.concatenate((np.arange(n), np.full(k - n, -1))).astype(np.intp)
        return Clustering(labels=labels, centers=centers, radius=0.0, threshold=0.0)

    dist = pairwise_distances(P.coords)
    candidates = np.unique(dist)

    def cover(r: float) -> tuple[NDArray[np.int64], NDArray[np.int64], int]:
        return greedy_disk_cover(dist, k, r, EXPANSION * r * (1.0 + 1e-12))

    lo, hi = -1, candidates.size - 1
    best = cover(float(candidates[hi]))
    while hi - lo > 1:
        mid = (lo + hi) // 2
        attempt = cover(float(candidates[mid]))
        if attempt[2] >= keep:
            hi, best = mid, attempt
        else:
            lo = mid
    labels, centers, _ = best
    dist_to_center = np.full(n, np.inf)
    clustered = labels >= 0
    dist_to_center[clustered] = dist[centers[labels[clustered]], np.flatnonzero(clustered)]
    labels = _keep_closest(labels, dist_to_center, keep)
    threshold = float(candidates[hi])
    logger.debug('Greedy k-center: threshold %.6g after binary search', threshold)
    return Clustering(
        labels=labels,
        centers=centers.astype(np.intp),
        radius=_radius(dist_to_center, labels),
        threshold=threshold,
    )


def assign_and_radius(
    P: PointSet, centers: ArrayLike, gamma: float
) -> tuple[NDArray[np.int64], float]:
    """Nearest-center assignment discarding the floor(gamma n) farthest points.

    Returns:
        tuple: Center index per point (-1 for discarded points) and the largest
            remaining distance.

    Examples:
        >>> P = PointSet([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])
        >>> assign_and_radius(P, [[0.0, 0.0]], 0.0)[1]
        1.0
    """
    C = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    if C.shape[0] < 1:
        msg = 'assign_and_radius needs at least one center'
        raise ValueError(msg)
    X = P.coords
    d2 = (
        np.einsum('ij,ij->i', X, X)[:, None]
        + np.einsum('ij,ij->i', C, C)[None, :]
        - 2.0 * (X @ C.T)
    )
    nearest = np.argmin(d2, axis=1).astype(np.int64)
    diff = X - C[nearest]
    dist = np.sqrt(np.einsum('ij,ij->i', diff, diff))
    labels = _keep_closest(nearest, dist, inlier_count(P.n, gamma))
    return labels, _radius(dist, labels)


def _validate_clustering(clusters: Clustering, n: int, k: int, keep: int) -> None:
    labels = clusters.labels
    if labels.shape != (n,):
        msg = f'Black box returned {labels.shape[0]} labels for {n} points'
        raise CoverageError(msg)
    if labels.min() < -1 or labels.max() >= k:
        msg = f'Black box labels must lie in [-1, {k - 1}]'
        raise CoverageError(msg)
    if clusters.assigned != keep:
        msg = f'Black box covered {clusters.assigned} points, expected exactly {keep}'
        raise CoverageError(msg)


def solve_kcenter(
    P: PointSet,
    k: int,
    gamma: float,
    eps: float,
    variant: Variant | str = Variant.gaussian,
    seed: int = 0,
    blackbox: KCenterBlackBox | None = None,
    target_dim: int | None = None,
    projection: ProjectionMap | None = None,
    c: float = DEFAULT_C,
) -> KCenterResult:
    """Reduce, cluster, take per-cluster approximate MEBs and recover k centers.

    Args:
        P (PointSet): Points to cluster.
        k (int): Number of centers.
        gamma (float): Outlier fraction in [0, 1).
        eps (float): JL distortion and MEB accuracy in (0, 1).
        variant (Variant | str, optional): JL construction. Defaults to gaussian.
        seed (int, optional): Seed of the map. Defaults to 0.
        blackbox (KCenterBlackBox | None, optional): Clustering of the reduced
            points. Defaults to [charikar_kcenter_outliers][jl_robust.kcenter.charikar_kcenter_outliers].
        target_dim (int | None, optional): Explicit d~. Defaults to
            target_dimension(n, eps, c) clamped to d.
        projection (ProjectionMap | None, optional): A prebuilt map.
        c (float, optional): JL constant. Defaults to 8.

    Raises:
        CoverageError: The black box did not cover exactly ceil((1 - gamma) n) points.

    Returns:
        KCenterResult: Centers, radii over the black-box clusters and over a fresh
            assignment, and timings.
    """
    if not 0.0 < eps < 1.0:
        msg = f'eps must lie in (0, 1), got {eps}'
        raise ValueError(msg)
    if k < 1:
        msg = f'k must be at least 1, got {k}'
        raise ValueError(msg)
    timing = Timing()
    epsilon: float | None = None
    with timing.stage('t_jl'):
        if projection is None:
            if Variant(variant) is Variant.none:
                d_tilde = P.d
            elif target_dim is not None:
                d_tilde = clamp_dimension(target_dim, P.d)
            else:
                epsilon = eps
                wanted = target_dimension(P.n, eps, c) if P.n >= 2 else P.d
                d_tilde = clamp_dimension(wanted, P.d)
                logger.info('JL dimension %d for epsilon %.3g (d = %d)', wanted, eps, P.d)
            projection = make_projection(variant, P.d, d_tilde, seed)
        fP = apply(projection, P)

    box = blackbox or charikar_kcenter_outliers
    keep = inlier_count(P.n, gamma)
    with timing.stage('t_blackbox'):
        clusters = box(fP, k, gamma)
    _validate_clustering(clusters, P.n, k, keep)

    with timing.stage('t_recover'):
        combs = []
        reduced = []
        for j in range(k):
            members = clusters.members(j)
            if members.size == 0:
                anchor = int(clusters.centers[j]) if clusters.centers[j] >= 0 else 0
                comb = ConvexCombination.singleton(anchor)
                reduced.append(fP.coords[anchor].copy())
            else:
                sol = bc_meb(fP.subset(members), eps)
                comb = sol.comb.remap(members)
                reduced.append(sol.point)
            combs.append(comb)
        centers = np.vstack([recover(comb, P) for comb in combs])
        labels = clusters.labels
        clustered = np.flatnonzero(labels >= 0)
        diff = P.coords[clustered] - centers[labels[clustered]]
        radius = float(np.sqrt(np.einsum('ij,ij->i', diff, diff)).max())
        reduced_centers = np.vstack(reduced)
        rdiff = fP.coords[clustered] - reduced_centers[labels[clustered]]
        blackbox_radius = float(np.sqrt(np.einsum('ij,ij->i', rdiff, rdiff)).max())

    reassigned, reassigned_radius = assign_and_radius(P, centers, gamma)
    logger.info(
        'k-center: k=%d, %d covered, radius %.6g (reassigned %.6g), d~ = %d, %.3fs',
        k,
        keep,
        radius,
        reassigned_radius,
        projection.target_dim,
        timing.total,
    )
    return KCenterResult(
        centers=centers,
        radius=radius,
        assignment=labels.astype(np.int64),
        combs=tuple(combs),
        timing=timing,
        reduced_centers=reduced_centers,
        projection=projection.to_descriptor(),
        epsilon=epsilon,
        blackbox_radius=blackbox_radius,
        reassigned_radius=reassigned_radius,
        reassigned_assignment=reassigned,
    )


def discard_recall(result: KCenterResult, injected: ArrayLike) -> float:
    """Fraction of the injected outliers that the pipeline discarded."""
    idx = np.asarray(injected, dtype=np.intp)
    if idx.size == 0:
        return math.nan
    return float(np.mean(result.assignment[idx] < 0))
