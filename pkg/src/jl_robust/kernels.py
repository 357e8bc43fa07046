"""Compiled inner loops: the Walsh-Hadamard butterfly and the greedy disk cover."""

import numpy as np
from numba import njit, prange
from numpy.typing import NDArray


@njit(parallel=True, cache=True)
def fwht_rows(a: NDArray[np.float64]) -> None:  # pragma: no cover - compiled
    """Unnormalized Walsh-Hadamard transform of every row of `a`, in place.

    Row length must be a power of two. Costs O(n D log D) for an (n, D) input.
    """
    n, size = a.shape
    for r in prange(n):
        h = 1
        while h < size:
            for i in range(0, size, 2 * h):
                for j in range(i, i + h):
                    x = a[r, j]
                    y = a[r, j + h]
                    a[r, j] = x + y
                    a[r, j + h] = x - y
            h *= 2


@njit(cache=True)
def greedy_disk_cover(
    dist: NDArray[np.float64], k: int, r: float, limit: float
) -> tuple[NDArray[np.int64], NDArray[np.int64], int]:  # pragma: no cover - compiled
    """k rounds of "heaviest r-disk, then remove its `limit`-disk".

    Each round picks the point whose r-ball holds the most uncovered points (lowest
    index on ties) and marks every uncovered point within `limit` of it.

    Returns:
        tuple: Cluster label per point (-1 = uncovered), the center index of each
            round and the number of covered points.
    """
    n = dist.shape[0]
    labels = np.full(n, -1, dtype=np.int64)
    centers = np.full(k, -1, dtype=np.int64)
    covered = 0
    for c in range(k):
        best = 0
        best_count = -1
        for i in range(n):
            count = 0
            for j in range(n):
                if labels[j] < 0 and dist[i, j] <= r:
                    count += 1
            if count > best_count:
                best_count = count
                best = i
        centers[c] = best
        for j in range(n):
            if labels[j] < 0 and dist[best, j] <= limit:
                labels[j] = c
                covered += 1
    return labels, centers, covered
