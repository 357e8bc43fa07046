"""Johnson-Lindenstrauss transforms as explicit, reproducible linear maps.

Three classical constructions are provided, plus two helpers used as references:

* `gaussian`: i.i.d. N(0, 1) entries scaled by 1/sqrt(d~).
* `binary`: entries +1 / -1 / 0 with probabilities 1/6, 1/6, 2/3, scaled by
  sqrt(3/d~) (the sparse database-friendly scheme).
* `fast`: P H diag(s) with a random sign diagonal s, the normalized Walsh-Hadamard
  transform H of size D = next power of two >= d applied by the O(D log D)
  butterfly, and P sampling d~ rows scaled by sqrt(D/d~).
* `orthonormal`: d~ rows of a Haar-random orthogonal matrix scaled by sqrt(d/d~);
  an exact isometry when d~ = d.
* `none`: the identity (no reduction baseline).

Randomness comes from numpy's PCG64 bit generator seeded through `SeedSequence`, so
(variant, d, d~, seed) reproduces a map bit for bit and a map serializes to the
four-field descriptor `{variant, d, dTilde, seed}` without storing its matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from jl_robust.errors import (
    DimensionMismatchError,
    InvalidCombinationError,
)
from jl_robust.geometry import IndexArray, Point, PointSet
from jl_robust.kernels import fwht_rows
from jl_robust.log import get_logger

logger = get_logger(__name__)

DEFAULT_C = 8.0
WEIGHT_TOL = 1e-9


class Variant(str, Enum):
    gaussian = 'gaussian'
    binary = 'binary'
    fast = 'fast'
    orthonormal = 'orthonormal'
    none = 'none'


JL_VARIANTS = (Variant.gaussian, Variant.binary, Variant.fast)


def _rng(seed: int) -> np.random.Generator:
    if seed < 0:
        msg = f'seed must be a non-negative integer, got {seed}'
        raise ValueError(msg)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def next_power_of_two(d: int) -> int:
    """Smallest power of two >= d.

    >>> next_power_of_two(1), next_power_of_two(5), next_power_of_two(16)
    (1, 8, 16)
    """
    return 1 << (int(d) - 1).bit_length()


@dataclass(frozen=True)
class ProjectionMap:
    """A linear map from R^d to R^d~ with everything needed to rebuild it."""

    variant: Variant
    source_dim: int
    target_dim: int
    seed: int
    matrix: NDArray[np.float64] | None = field(default=None, repr=False, compare=False)
    signs: NDArray[np.float64] | None = field(default=None, repr=False, compare=False)
    rows: IndexArray | None = field(default=None, repr=False, compare=False)

    @property
    def padded_dim(self) -> int:
        return next_power_of_two(self.source_dim)

    def apply_array(self, X: NDArray[np.float64]) -> NDArray[np.float64]:
        """Map the rows of X (shape (n, d)) to the rows of the result (shape (n, d~))."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.source_dim:
            msg = (
                f'Dimension mismatch: map expects d={self.source_dim}, '
                f'got shape {X.shape}'
            )
            raise DimensionMismatchError(msg)
        if self.variant is Variant.none:
            return X.copy()
        if self.variant is Variant.fast:
            size = self.padded_dim
            padded = np.zeros((X.shape[0], size))
            padded[:, : self.source_dim] = X * self.signs[: self.source_dim]
            fwht_rows(padded)
            return padded[:, self.rows] / math.sqrt(self.target_dim)
        return X @ self.matrix.T

    def as_matrix(self) -> NDArray[np.float64]:
        """The map as a dense (d~, d) matrix."""
        if self.matrix is not None:
            return self.matrix.copy()
        return self.apply_array(np.eye(self.source_dim)).T

    def to_descriptor(self) -> dict[str, Any]:
        return {
            'variant': self.variant.value,
            'd': self.source_dim,
            'dTilde': self.target_dim,
            'seed': self.seed,
        }

    @classmethod
    def from_descriptor(cls, descriptor: dict[str, Any]) -> ProjectionMap:
        """Regenerate a map from its JSON descriptor."""
        return make_projection(
            descriptor['variant'],
            int(descriptor['d']),
            int(descriptor['dTilde']),
            int(descriptor['seed']),
        )


@dataclass(frozen=True)
class ConvexCombination:
    """Convex weights over named point indices (a coreset representation)."""

    indices: IndexArray
    weights: NDArray[np.float64]

    def __post_init__(self) -> None:
        indices = np.asarray(self.indices, dtype=np.intp).reshape(-1)
        weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        object.__setattr__(self, 'indices', indices)
        object.__setattr__(self, 'weights', weights)
        self.validate()

    def validate(self, n: int | None = None) -> None:
        """Check weights >= 0 summing to 1, distinct indices and (optionally) range."""
        if self.indices.size == 0 or self.indices.shape != self.weights.shape:
            msg = (
                'A convex combination needs matching, non-empty index and weight '
                f'lists, got {self.indices.size} indices and {self.weights.size} weights'
            )
            raise InvalidCombinationError(msg)
        if np.unique(self.indices).size != self.indices.size:
            msg = 'Convex combination indices must be distinct'
            raise InvalidCombinationError(msg)
        if np.any(self.weights < 0.0) or not np.all(np.isfinite(self.weights)):
            msg = 'Convex combination weights must be finite and non-negative'
            raise InvalidCombinationError(msg)
        total = float(self.weights.sum())
        if abs(total - 1.0) > WEIGHT_TOL:
            msg = f'Convex combination weights must sum to 1, got {total!r}'
            raise InvalidCombinationError(msg)
        if self.indices.min() < 0 or (n is not None and self.indices.max() >= n):
            msg = f'Convex combination index out of range for {n} points'
            raise InvalidCombinationError(msg)

    def __len__(self) -> int:
        return int(self.indices.size)

    @classmethod
    def singleton(cls, index: int) -> ConvexCombination:
        return cls(np.array([index]), np.array([1.0]))

    @classmethod
    def from_dense(cls, weights: ArrayLike) -> ConvexCombination:
        """Keep the non-zero entries of a length-n weight vector."""
        w = np.asarray(weights, dtype=np.float64)
        support = np.flatnonzero(w)
        return cls(support, w[support])

    def remap(self, index_map: ArrayLike) -> ConvexCombination:
        """Rename indices through `index_map` (local index i becomes index_map[i])."""
        mapping = np.asarray(index_map, dtype=np.intp)
        return ConvexCombination(mapping[self.indices], self.weights.copy())

    def as_dense(self, n: int) -> NDArray[np.float64]:
        dense = np.zeros(n)
        dense[self.indices] = self.weights
        return dense


@dataclass(frozen=True)
class DistortionReport:
    """Relative squared-distance distortion of a map over sampled pairs."""

    max_distortion: float
    mean_distortion: float
    fraction_within: float
    epsilon: float
    pairs: int

    def as_dict(self) -> dict[str, float]:
        return {
            'max_distortion': self.max_distortion,
            'mean_distortion': self.mean_distortion,
            'fraction_within': self.fraction_within,
            'epsilon': self.epsilon,
            'pairs': self.pairs,
        }


def target_dimension(n: int, epsilon: float, c: float = DEFAULT_C) -> int:
    """Reduced dimension ceil(c ln(n) / epsilon^2).

    The caller clamps the result to [1, d]; see `clamp_dimension`.

    >>> target_dimension(1000, 0.5), target_dimension(2, 0.9)
    (222, 7)
    """
    if not 0.0 < epsilon < 1.0:
        msg = f'epsilon must lie in (0, 1), got {epsilon}'
        raise ValueError(msg)
    if n < 2:
        msg = f'target_dimension needs n >= 2, got {n}'
        raise ValueError(msg)
    if c <= 0.0:
        msg = f'c must be positive, got {c}'
        raise ValueError(msg)
    return math.ceil(c * math.log(n) / epsilon**2)


def success_dimension(
    n: int, epsilon: float, eta: float, c: float = DEFAULT_C
) -> int:
    """Reduced dimension ceil(c ln(n / eta) / epsilon^2) for failure probability eta."""
    if not 0.0 < eta < 1.0:
        msg = f'eta must lie in (0, 1), got {eta}'
        raise ValueError(msg)
    if not 0.0 < epsilon < 1.0:
        msg = f'epsilon must lie in (0, 1), got {epsilon}'
        raise ValueError(msg)
    return math.ceil(c * math.log(n / eta) / epsilon**2)


def epsilon_for_dimension(n: int, d_tilde: int, c: float = DEFAULT_C) -> float:
    """Distortion sqrt(c ln(n) / d~) implied by a chosen reduced dimension."""
    if d_tilde < 1:
        msg = f'd_tilde must be positive, got {d_tilde}'
        raise ValueError(msg)
    return math.sqrt(c * math.log(n) / d_tilde)


def clamp_dimension(d_tilde: int, d: int) -> int:
    return min(max(1, int(d_tilde)), int(d))


def dimension_for_rate(d: int, rate: float) -> int:
    """Reduced dimension for a reduction rate, e.g. rate 0.02 keeps 2% of d.

    >>> dimension_for_rate(2048, 0.1), dimension_for_rate(100, 0.02), dimension_for_rate(10, 0.01)
    (205, 2, 1)
    """
    if not 0.0 < rate <= 1.0:
        msg = f'rate must lie in (0, 1], got {rate}'
        raise ValueError(msg)
    return clamp_dimension(math.floor(rate * d + 0.5), d)


def _check_dims(d: int, d_tilde: int) -> None:
    if not 1 <= d_tilde <= d:
        msg = f'Need 1 <= d_tilde <= d, got d={d}, d_tilde={d_tilde}'
        raise ValueError(msg)


def make_gaussian(d: int, d_tilde: int, seed: int) -> ProjectionMap:
    _check_dims(d, d_tilde)
    matrix = _rng(seed).standard_normal((d_tilde, d)) / math.sqrt(d_tilde)
    return ProjectionMap(Variant.gaussian, d, d_tilde, seed, matrix=matrix)


def make_binary(d: int, d_tilde: int, seed: int) -> ProjectionMap:
    _check_dims(d, d_tilde)
    entries = _rng(seed).choice(
        np.array([1.0, -1.0, 0.0]), size=(d_tilde, d), p=[1 / 6, 1 / 6, 2 / 3]
    )
    return ProjectionMap(
        Variant.binary, d, d_tilde, seed, matrix=entries * math.sqrt(3.0 / d_tilde)
    )


def make_fast(d: int, d_tilde: int, seed: int) -> ProjectionMap:
    """Subsampled randomized Hadamard transform; inputs are zero-padded to D = 2^m."""
    _check_dims(d, d_tilde)
    size = next_power_of_two(d)
    rng = _rng(seed)
    signs = rng.choice(np.array([-1.0, 1.0]), size=size)
    rows = rng.choice(size, size=d_tilde, replace=False).astype(np.intp)
    return ProjectionMap(Variant.fast, d, d_tilde, seed, signs=signs, rows=rows)


def make_orthonormal(d: int, d_tilde: int, seed: int) -> ProjectionMap:
    _check_dims(d, d_tilde)
    q, r = np.linalg.qr(_rng(seed).standard_normal((d, d)))
    q *= np.sign(np.diag(r))
    matrix = q[:d_tilde, :] * math.sqrt(d / d_tilde)
    return ProjectionMap(Variant.orthonormal, d, d_tilde, seed, matrix=matrix)


def make_identity(d: int, d_tilde: int | None = None, seed: int = 0) -> ProjectionMap:
    if d_tilde is not None and d_tilde != d:
        msg = f'The identity map needs d_tilde == d, got {d_tilde} != {d}'
        raise ValueError(msg)
    return ProjectionMap(Variant.none, d, d, seed)


_FACTORIES = {
    Variant.gaussian: make_gaussian,
    Variant.binary: make_binary,
    Variant.fast: make_fast,
    Variant.orthonormal: make_orthonormal,
    Variant.none: make_identity,
}


def make_projection(
    variant: Variant | str, d: int, d_tilde: int, seed: int
) -> ProjectionMap:
    """Build a map of the named variant."""
    try:
        kind = Variant(variant)
    except ValueError:
        msg = f'Unknown projection variant: {variant!r}'
        raise ValueError(msg) from None
    return _FACTORIES[kind](d, d_tilde, seed)


def apply(projection: ProjectionMap, P: PointSet) -> PointSet:
    """Map every point; output row i is the image of input row i."""
    if P.d != projection.source_dim:
        msg = f'Dimension mismatch: map expects d={projection.source_dim}, got {P.d}'
        raise DimensionMismatchError(msg)
    return PointSet(projection.apply_array(P.coords))


def recover(comb: ConvexCombination, originals: PointSet) -> Point:
    """Lift a convex combination back to the original space.

    >>> P = PointSet([[3.0, 0.0], [0.0, 3.0]])
    >>> recover(ConvexCombination([0, 1], [1 / 3, 2 / 3]), P).tolist()
    [1.0, 2.0]
    """
    comb.validate(originals.n)
    return comb.weights @ originals.coords[comb.indices]


def _relative_distortion(
    orig_sq: NDArray[np.float64], red_sq: NDArray[np.float64]
) -> NDArray[np.float64]:
    out = np.zeros_like(orig_sq)
    nonzero = orig_sq > 0.0
    out[nonzero] = np.abs(orig_sq[nonzero] - red_sq[nonzero]) / orig_sq[nonzero]
    out[~nonzero & (red_sq > 0.0)] = np.inf
    return out


def distortion_report(
    P: PointSet,
    projection: ProjectionMap,
    pair_sample: int | None = 1000,
    seed: int = 0,
    epsilon: float = 0.5,
) -> DistortionReport:
    """Measure |‖p-q‖² - ‖f(p)-f(q)‖²| / ‖p-q‖² over pairs of P.

    Args:
        P (PointSet): Original points.
        projection (ProjectionMap): The map under test.
        pair_sample (int | None, optional): Number of uniformly sampled pairs with
            p != q (when n > 1). None evaluates every pair. Defaults to 1000.
        seed (int, optional): Seed of the pair sampler. Defaults to 0.
        epsilon (float, optional): Threshold for `fraction_within`. Defaults to 0.5.

    Returns:
        DistortionReport: Max and mean relative distortion and the fraction of pairs
            within epsilon.
    """
    if pair_sample is not None and pair_sample < 1:
        msg = f'pair_sample must be at least 1, got {pair_sample}'
        raise ValueError(msg)
    X = P.coords
    Y = projection.apply_array(X)
    n = P.n
    if n == 1:
        first = second = np.zeros(1, dtype=np.intp)
    elif pair_sample is None:
        first, second = np.triu_indices(n, k=1)
    else:
        rng = _rng(seed)
        first = rng.integers(n, size=pair_sample)
        second = (first + rng.integers(1, n, size=pair_sample)) % n
    orig_sq = np.einsum('ij,ij->i', X[first] - X[second], X[first] - X[second])
    red_sq = np.einsum('ij,ij->i', Y[first] - Y[second], Y[first] - Y[second])
    rel = _relative_distortion(orig_sq, red_sq)
    report = DistortionReport(
        max_distortion=float(rel.max()),
        mean_distortion=float(rel.mean()),
        fraction_within=float(np.mean(rel <= epsilon)),
        epsilon=epsilon,
        pairs=int(rel.size),
    )
    logger.debug(
        'Distortion of %s map over %d pairs: %s', projection.variant.value, rel.size, report
    )
    return report


__all__ = [
    'JL_VARIANTS',
    'ConvexCombination',
    'DistortionReport',
    'ProjectionMap',
    'Variant',
    'apply',
    'clamp_dimension',
    'dimension_for_rate',
    'distortion_report',
    'epsilon_for_dimension',
    'make_binary',
    'make_fast',
    'make_gaussian',
    'make_identity',
    'make_orthonormal',
    'make_projection',
    'recover',
    'success_dimension',
    'target_dimension',
]
