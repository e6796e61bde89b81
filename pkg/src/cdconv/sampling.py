"""Point-cloud subsampling: farthest-point orderings and rejection sampling.

All four samplers are deterministic for a fixed input ordering. Ties in the
selection key (including the initial infinities) resolve to the lowest index.
"""

import heapq
from dataclasses import dataclass

import numpy as np

from .geometry import ball_search, build_grid_index


class QueueEmptyError(RuntimeError):
    """Raised when a selection pops from an exhausted priority queue."""


@dataclass(frozen=True)
class SampleResult:
    """Selected point indices (in selection order) plus the distance from
    every input point to its nearest selected point, infinity where the
    sampler never reached it."""

    indices: np.ndarray
    d_min: np.ndarray


class MaxDistanceQueue:
    """Max-priority queue over point indices keyed by distance.

    Keys only ever decrease; updates push a fresh heap entry and stale entries
    are skipped on pop (lazy invalidation). Each index pops at most once.
    """

    def __init__(self, keys):
        self._keys = np.array(keys, dtype=np.float64)
        self._done = np.zeros(self._keys.shape[0], dtype=bool)
        self._heap = [(-k, i) for i, k in enumerate(self._keys)]
        heapq.heapify(self._heap)

    def update(self, idx, key):
        """Lower the key of ``idx`` to min(current, key)."""
        if key < self._keys[idx]:
            self._keys[idx] = key
            heapq.heappush(self._heap, (-key, idx))

    def mark_removed(self, idx):
        """Exclude ``idx`` from future pops without yielding it."""
        self._done[idx] = True

    def pop(self):
        """Yield the live index with the largest key (ties: lowest index)."""
        while self._heap:
            neg_key, idx = heapq.heappop(self._heap)
            if self._done[idx] or -neg_key != self._keys[idx]:
                continue
            self._done[idx] = True
            return idx
        raise QueueEmptyError("priority queue exhausted")

    @property
    def keys(self):
        return self._keys.copy()


def ifp_sample(cloud, count):
    """Exact iterative farthest-point selection.

    Greedy: each step picks the point with the largest distance to the
    selected set and then refreshes distances against all points, so the cost
    is O(count * S). The first pick is index 0 (all keys start at infinity).
    """
    n = cloud.size
    if not 1 <= count <= n:
        raise ValueError(f"count must be in [1, {n}], got {count}")
    coords = cloud.coords
    d_min = np.full(n, np.inf)
    taken = np.zeros(n, dtype=bool)
    indices = np.empty(count, dtype=np.int64)
    for step in range(count):
        j = int(np.argmax(np.where(taken, -np.inf, d_min)))
        indices[step] = j
        taken[j] = True
        np.minimum(d_min, np.linalg.norm(coords - coords[j], axis=1), out=d_min)
    return SampleResult(indices, d_min)


def approx_ifp_sample(cloud, count, neighborhood, queue):
    """Farthest-point selection restricted to a precomputed self-ball
    neighborhood, with keys held in a max-priority queue.

    Each pop appends the largest-key index and lowers the keys of its
    neighbors only, giving O(count * mean_neighbors) instead of O(count * S).
    Raises QueueEmptyError if the queue runs out before ``count`` picks.
    """
    n = cloud.size
    if not 1 <= count <= n:
        raise ValueError(f"count must be in [1, {n}], got {count}")
    if neighborhood.num_out != n or neighborhood.num_in != n:
        raise ValueError("neighborhood must be a self-neighborhood of the cloud")
    splits = neighborhood.row_splits
    in_idx = neighborhood.in_idx
    edge_d = np.linalg.norm(neighborhood.offsets, axis=1)
    indices = np.empty(count, dtype=np.int64)
    for step in range(count):
        picked = queue.pop()
        indices[step] = picked
        for e in range(splits[picked], splits[picked + 1]):
            queue.update(in_idx[e], edge_d[e])
    return SampleResult(indices, queue.keys)


def approx_ifp_no_rejection(cloud, count, neighborhood):
    """Approximate farthest-point selection from an all-infinity queue."""
    queue = MaxDistanceQueue(np.full(cloud.size, np.inf))
    return approx_ifp_sample(cloud, count, neighborhood, queue)


def _rejection_scan(neighborhood):
    n = neighborhood.num_in
    splits = neighborhood.row_splits
    in_idx = neighborhood.in_idx
    edge_d = np.linalg.norm(neighborhood.offsets, axis=1)
    visited = np.zeros(n, dtype=bool)
    d_min = np.full(n, np.inf)
    indices = []
    for i in range(n):
        if visited[i]:
            continue
        indices.append(i)
        for e in range(splits[i], splits[i + 1]):
            j = in_idx[e]
            visited[j] = True
            if edge_d[e] < d_min[j]:
                d_min[j] = edge_d[e]
    return np.asarray(indices, dtype=np.int64), d_min


def rejection_sample(cloud, radius):
    """Scan-order selection that suppresses every point within ``radius`` of a
    pick.

    The output size is data dependent; selected points are pairwise more than
    ``radius`` apart and every input point lies within ``radius`` of some
    selected point.
    """
    if cloud.size == 0:
        raise ValueError("cloud must be nonempty")
    nb = ball_search(build_grid_index(cloud, radius), cloud, radius)
    indices, d_min = _rejection_scan(nb)
    return SampleResult(indices, d_min)


def approx_ifp_with_rejection(cloud, count, radius):
    """Rejection sampling topped up (or truncated) to exactly ``count`` picks.

    When rejection selects at least ``count`` points the first ``count`` are
    returned; otherwise its d_min seeds the priority queue and approximate
    farthest-point selection supplies the remainder, so the result always
    begins with the exact rejection output.
    """
    n = cloud.size
    if not 1 <= count <= n:
        raise ValueError(f"count must be in [1, {n}], got {count}")
    nb = ball_search(build_grid_index(cloud, radius), cloud, radius)
    indices, d_min = _rejection_scan(nb)
    if indices.shape[0] >= count:
        return SampleResult(indices[:count], d_min)
    queue = MaxDistanceQueue(d_min)
    for i in indices:
        queue.mark_removed(i)
    rest = approx_ifp_sample(cloud, count - indices.shape[0], nb, queue)
    return SampleResult(np.concatenate([indices, rest.indices]), rest.d_min)
