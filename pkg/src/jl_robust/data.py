"""Datasets: CSV and sparse text loaders, synthetic clusters and outlier injection.

Every transformation returns a new dataset and records the indices of the points it
made into outliers, which is the ground truth for trimming metrics.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike, NDArray

from jl_robust.errors import (
    ConvergenceError,
    DatasetParseError,
    InvalidPointSetError,
    NonSeparableError,
)
from jl_robust.geometry import IndexArray, Point, PointSet, injection_count
from jl_robust.hull import bc_meb
from jl_robust.log import get_logger
from jl_robust.svm import default_blackbox_one_class

logger = get_logger(__name__)

_PANDAS_LINE = re.compile(r'line (\d+)')


@dataclass(frozen=True)
class LabeledDataset:
    """Points with optional integer labels and outlier ground truth.

    Attributes:
        points: The points, row i has identity i.
        labels: One integer label per point, or None for unlabeled data.
        provenance: Where the data came from (path or generator parameters).
        injected: Indices of points turned into outliers by an injection.
        cluster_ids: Generating cluster per point (-1 for injected points), if known.
    """

    points: PointSet
    labels: NDArray[np.int64] | None = None
    provenance: dict[str, Any] = field(default_factory=dict)
    injected: IndexArray = field(default_factory=lambda: np.empty(0, dtype=np.intp))
    cluster_ids: NDArray[np.int64] | None = None

    def __post_init__(self) -> None:
        n = self.points.n
        injected = np.unique(np.asarray(self.injected, dtype=np.intp))
        if injected.size and (injected[0] < 0 or injected[-1] >= n):
            msg = f'Injected outlier indices out of range for {n} points'
            raise InvalidPointSetError(msg)
        object.__setattr__(self, 'injected', injected)
        for name in ('labels', 'cluster_ids'):
            value = getattr(self, name)
            if value is None:
                continue
            arr = np.asarray(value, dtype=np.int64).reshape(-1)
            if arr.size != n:
                msg = f'{name} has {arr.size} entries for {n} points'
                raise InvalidPointSetError(msg)
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.points.n

    @property
    def d(self) -> int:
        return self.points.d

    @property
    def labeled(self) -> bool:
        return self.labels is not None

    def outlier_mask(self) -> NDArray[np.bool_]:
        mask = np.zeros(self.n, dtype=bool)
        mask[self.injected] = True
        return mask

    def subset(self, indices: ArrayLike) -> LabeledDataset:
        """Rows at `indices` in that order; injected indices follow their points."""
        idx = np.asarray(indices, dtype=np.intp)
        return LabeledDataset(
            points=self.points.subset(idx),
            labels=None if self.labels is None else self.labels[idx],
            provenance=self.provenance,
            injected=np.flatnonzero(self.outlier_mask()[idx]),
            cluster_ids=None if self.cluster_ids is None else self.cluster_ids[idx],
        )


def _parse_error(msg: str, line: int | None = None, column: int | None = None) -> DatasetParseError:
    return DatasetParseError(msg, line=line, column=column)


def load_csv(path: str | Path, labeled: bool = False) -> LabeledDataset:
    """Load comma-separated reals, one point per line.

    The dimension is taken from the first row; with `labeled` the last column is an
    integer label such as +1 or -1.

    Args:
        path (str | Path): CSV file without header.
        labeled (bool, optional): Whether the last column is a label. Defaults to False.

    Raises:
        DatasetParseError: Empty file, ragged row or non-numeric cell (with line number).

    Returns:
        LabeledDataset: The points and labels.
    """
    path = Path(path)
    try:
        frame = pd.read_csv(
            path,
            header=None,
            dtype=str,
            keep_default_na=False,
            skip_blank_lines=False,
        )
    except pd.errors.EmptyDataError:
        msg = f'{path}: empty file'
        raise _parse_error(msg) from None
    except pd.errors.ParserError as exc:
        found = _PANDAS_LINE.search(str(exc))
        line = int(found.group(1)) if found else None
        msg = f'{path}: ragged row at line {line}'
        raise _parse_error(msg, line) from None

    ragged = frame.isna().any(axis=1).to_numpy()
    if ragged.any():
        line = int(np.argmax(ragged)) + 1
        msg = f'{path}: ragged or blank row at line {line}, expected {frame.shape[1]} fields'
        raise _parse_error(msg, line)

    numeric = frame.apply(pd.to_numeric, errors='coerce').to_numpy(dtype=np.float64)
    bad = ~np.isfinite(numeric)
    if bad.any():
        row, col = (int(i) for i in np.argwhere(bad)[0])
        msg = (
            f'{path}: non-numeric value {frame.iat[row, col]!r} '
            f'at line {row + 1}, column {col + 1}'
        )
        raise _parse_error(msg, row + 1, col + 1)

    labels = None
    if labeled:
        if numeric.shape[1] < 2:
            msg = f'{path}: a labeled row needs at least one coordinate and a label'
            raise _parse_error(msg, 1)
        raw = numeric[:, -1]
        fractional = raw != np.round(raw)
        if fractional.any():
            line = int(np.argmax(fractional)) + 1
            msg = f'{path}: label at line {line} is not an integer'
            raise _parse_error(msg, line, numeric.shape[1])
        labels = raw.astype(np.int64)
        numeric = numeric[:, :-1]

    logger.info('Loaded %d points in %d dimensions from %s', *numeric.shape, path)
    return LabeledDataset(
        points=PointSet(numeric),
        labels=labels,
        provenance={'source': 'csv', 'path': str(path)},
    )


def write_csv(ds: LabeledDataset, path: str | Path) -> Path:
    """Write the dataset in the format read by `load_csv` (label last, if any)."""
    path = Path(path)
    frame = pd.DataFrame(ds.points.coords)
    if ds.labels is not None:
        frame[frame.shape[1]] = ds.labels
    frame.to_csv(path, header=False, index=False, lineterminator='\n')
    return path


def _parse_sparse_line(text: str, line: int) -> tuple[int, list[int], list[float]]:
    tokens = text.split()
    try:
        label = int(tokens[0])
    except ValueError:
        msg = f'line {line}, token 1: bad label {tokens[0]!r}'
        raise _parse_error(msg, line, 1) from None
    indices: list[int] = []
    values: list[float] = []
    for pos, token in enumerate(tokens[1:], start=2):
        key, sep, raw = token.partition(':')
        try:
            index = int(key)
            value = float(raw)
        except ValueError:
            index, value = 0, math.nan
        if not sep or index < 1 or not math.isfinite(value):
            msg = f'line {line}, token {pos}: malformed feature {token!r}'
            raise _parse_error(msg, line, pos)
        if indices and index <= indices[-1]:
            msg = (
                f'line {line}, token {pos}: index {index} does not increase '
                f'(previous {indices[-1]})'
            )
            raise _parse_error(msg, line, pos)
        indices.append(index)
        values.append(value)
    return label, indices, values


def load_sparse_labeled(path: str | Path) -> LabeledDataset:
    """Load "label i1:v1 i2:v2 ..." lines (1-based, strictly increasing indices).

    Blank lines are skipped. Every point is densified to the largest index seen in
    the file; absent features are 0.

    Examples:
        >>> import tempfile, os
        >>> with tempfile.TemporaryDirectory() as tmp:
        ...     target = os.path.join(tmp, 'a.txt')
        ...     _ = open(target, 'w').write('+1 1:0.5 3:2\\n')
        ...     ds = load_sparse_labeled(target)
        >>> ds.points.coords.tolist(), ds.labels.tolist()
        ([[0.5, 0.0, 2.0]], [1])
    """
    path = Path(path)
    rows = []
    with path.open(encoding='utf-8') as handle:
        for number, text in enumerate(handle, start=1):
            if text.strip():
                rows.append(_parse_sparse_line(text, number))
    if not rows:
        msg = f'{path}: no data lines'
        raise _parse_error(msg)
    d = max([max(idx, default=0) for _, idx, _ in rows] + [1])
    coords = np.zeros((len(rows), d))
    for i, (_, idx, vals) in enumerate(rows):
        coords[i, np.asarray(idx, dtype=np.intp) - 1] = vals
    logger.info('Loaded %d sparse rows, densified to d=%d, from %s', len(rows), d, path)
    return LabeledDataset(
        points=PointSet(coords),
        labels=np.array([label for label, _, _ in rows], dtype=np.int64),
        provenance={'source': 'sparse', 'path': str(path)},
    )


def _unit(v: NDArray[np.float64]) -> NDArray[np.float64]:
    return v / np.linalg.norm(v)


def synth_clusters(
    k: int,
    per_cluster: int,
    d: int,
    spread: float,
    separation: float,
    seed: int,
    offset: float = 0.0,
) -> LabeledDataset:
    """Gaussian blobs with centers offset * u + j * separation * w, j = 0..k-1.

    w and u are random orthogonal unit vectors, so centers are pairwise at least
    `separation` apart and `offset` moves the whole configuration away from the
    origin (one-class instances). Cluster j is labelled +1 for even j, -1 for odd j.
    """
    if min(k, per_cluster, d) < 1:
        msg = f'k, per_cluster and d must be at least 1, got {k}, {per_cluster}, {d}'
        raise ValueError(msg)
    if spread < 0.0 or separation < 0.0:
        msg = 'spread and separation must be non-negative'
        raise ValueError(msg)
    rng = np.random.default_rng(seed)
    w = _unit(rng.standard_normal(d))
    if d > 1:
        u = rng.standard_normal(d)
        u = _unit(u - (u @ w) * w)
    else:
        u = w
    centers = offset * u + np.outer(np.arange(k) * separation, w)
    cluster_ids = np.repeat(np.arange(k), per_cluster)
    coords = centers[cluster_ids] + spread * rng.standard_normal((k * per_cluster, d))
    return LabeledDataset(
        points=PointSet(coords),
        labels=np.where(cluster_ids % 2 == 0, 1, -1),
        provenance={
            'source': 'synth',
            'k': k,
            'per_cluster': per_cluster,
            'd': d,
            'spread': spread,
            'separation': separation,
            'offset': offset,
            'seed': seed,
        },
        cluster_ids=cluster_ids,
    )


def _check_fraction(fraction: float) -> None:
    if not 0.0 <= fraction < 1.0:
        msg = f'fraction must lie in [0, 1), got {fraction}'
        raise ValueError(msg)


def inject_label_flip(ds: LabeledDataset, fraction: float, seed: int) -> LabeledDataset:
    """Negate the labels of ceil(fraction n) uniformly chosen points.

    A point flipped twice is no longer counted as injected.
    """
    if ds.labels is None:
        msg = 'Label flipping needs a labeled dataset'
        raise ValueError(msg)
    _check_fraction(fraction)
    m = injection_count(ds.n, fraction)
    if m == 0:
        return ds
    flipped = np.sort(np.random.default_rng(seed).choice(ds.n, size=m, replace=False))
    labels = ds.labels.copy()
    labels[flipped] *= -1
    logger.info('Flipped %d labels', m)
    return replace(ds, labels=labels, injected=np.setxor1d(ds.injected, flipped))


@dataclass(frozen=True)
class ClusterBall:
    cluster: int
    center: Point
    radius: float
    label: int | None


def cluster_mebs(ds: LabeledDataset, eps: float = 0.1) -> list[ClusterBall]:
    """(1 + eps)-approximate MEB of every generating cluster (or of all points)."""
    ids = ds.cluster_ids if ds.cluster_ids is not None else np.zeros(ds.n, dtype=np.int64)
    balls = []
    for cluster in np.unique(ids[ids >= 0]):
        members = np.flatnonzero(ids == cluster)
        sol = bc_meb(ds.points.subset(members), eps)
        label = None if ds.labels is None else int(ds.labels[members[0]])
        balls.append(ClusterBall(int(cluster), sol.point, sol.value, label))
    return balls


def _append(
    ds: LabeledDataset, extra: NDArray[np.float64], labels: list[int | None]
) -> LabeledDataset:
    m = extra.shape[0]
    new_labels = None
    if ds.labels is not None:
        new_labels = np.concatenate((ds.labels, np.asarray(labels, dtype=np.int64)))
    cluster_ids = None
    if ds.cluster_ids is not None:
        cluster_ids = np.concatenate((ds.cluster_ids, np.full(m, -1, dtype=np.int64)))
    return LabeledDataset(
        points=PointSet(np.vstack((ds.points.coords, extra))),
        labels=new_labels,
        provenance=ds.provenance,
        injected=np.concatenate((ds.injected, np.arange(ds.n, ds.n + m))),
        cluster_ids=cluster_ids,
    )


def inject_ball_outliers(
    ds: LabeledDataset, fraction: float, scale: float = 3.0, seed: int = 0
) -> LabeledDataset:
    """Append ceil(fraction n) points on spheres of radius scale * r around cluster MEBs.

    Each outlier picks a cluster uniformly at random and a direction uniformly on the
    sphere (a normalized Gaussian vector). A cluster of radius 0 uses r = 1. Labels
    of appended points copy their cluster's label.
    """
    _check_fraction(fraction)
    if scale <= 1.0:
        msg = f'scale must exceed 1, got {scale}'
        raise ValueError(msg)
    m = injection_count(ds.n, fraction)
    if m == 0:
        return ds
    rng = np.random.default_rng(seed)
    balls = cluster_mebs(ds, eps=0.1)
    picks = rng.integers(len(balls), size=m)
    directions = rng.standard_normal((m, ds.d))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    extra = np.empty((m, ds.d))
    for row, (pick, direction) in enumerate(zip(picks, directions, strict=True)):
        ball = balls[pick]
        radius = ball.radius if ball.radius > 0.0 else 1.0
        extra[row] = ball.center + scale * radius * direction
    logger.info('Injected %d ball outliers around %d clusters', m, len(balls))
    return _append(ds, extra, [balls[p].label for p in picks])


def inject_halfspace_outliers(
    ds: LabeledDataset, fraction: float, scale: float = 1.0, seed: int = 0
) -> LabeledDataset:
    """Append ceil(fraction n) points on the origin side of the one-class hyperplane.

    The direction u comes from the default one-class black box on the clean points
    (falling back to their mean). Each outlier copies a random point p and moves it
    along u so that <q, u> = -scale * rho, rho being the clean margin along u.
    """
    _check_fraction(fraction)
    m = injection_count(ds.n, fraction)
    if m == 0:
        return ds
    try:
        v = default_blackbox_one_class(ds.points, 0.0).v
    except (NonSeparableError, ConvergenceError):
        v = ds.points.coords.mean(axis=0)
    if not np.any(v):
        msg = 'Cannot place half-space outliers: the points have no direction'
        raise ValueError(msg)
    u = _unit(v)
    rho = max(float(np.min(ds.points.coords @ u)), 0.0) or 1.0
    rng = np.random.default_rng(seed)
    sources = rng.integers(ds.n, size=m)
    base = ds.points.coords[sources]
    extra = base - np.outer(base @ u + scale * rho, u)
    labels = [None if ds.labels is None else int(ds.labels[s]) for s in sources]
    logger.info('Injected %d half-space outliers at depth %.4g', m, scale * rho)
    return _append(ds, extra, labels)


def train_test_split(
    ds: LabeledDataset, test_fraction: float = 0.5, seed: int = 0
) -> tuple[LabeledDataset, LabeledDataset]:
    """Random partition into (train, test); the default gives equal halves."""
    if not 0.0 < test_fraction < 1.0:
        msg = f'test_fraction must lie in (0, 1), got {test_fraction}'
        raise ValueError(msg)
    n_test = min(max(math.floor(test_fraction * ds.n + 0.5), 1), ds.n - 1)
    if n_test < 1:
        msg = f'Cannot split {ds.n} points'
        raise ValueError(msg)
    order = np.random.default_rng(seed).permutation(ds.n)
    return ds.subset(np.sort(order[n_test:])), ds.subset(np.sort(order[:n_test]))


def select_pair(ds: LabeledDataset, positive: int, negative: int) -> LabeledDataset:
    """Keep the rows labelled `positive` or `negative`, relabelled +1 / -1."""
    if ds.labels is None:
        msg = 'select_pair needs a labeled dataset'
        raise ValueError(msg)
    keep = np.flatnonzero((ds.labels == positive) | (ds.labels == negative))
    if keep.size == 0:
        msg = f'No rows labelled {positive} or {negative}'
        raise ValueError(msg)
    sub = ds.subset(keep)
    labels = np.where(sub.labels == positive, 1, -1)
    return replace(sub, labels=labels)


def split_classes(
    ds: LabeledDataset,
) -> tuple[PointSet, PointSet, IndexArray, IndexArray]:
    """Split a +1 / -1 dataset into (P1, P2, rows of P1, rows of P2)."""
    if ds.labels is None:
        msg = 'Two-class problems need a labeled dataset'
        raise ValueError(msg)
    if not np.all(np.isin(ds.labels, (1, -1))):
        msg = 'Two-class problems need labels +1 / -1; use select_pair first'
        raise ValueError(msg)
    pos = np.flatnonzero(ds.labels == 1)
    neg = np.flatnonzero(ds.labels == -1)
    if pos.size == 0 or neg.size == 0:
        msg = f'Both classes must be present, got {pos.size} (+1) and {neg.size} (-1)'
        raise ValueError(msg)
    return ds.points.subset(pos), ds.points.subset(neg), pos, neg
