"""Exact (k+1)-nearest-neighbour search under the Euclidean metric.

Two routes return identical results: :func:`brute_knn` scans every training
point, :class:`NeighborIndex` prunes candidates with a k-d tree
(``scipy.spatial.cKDTree``) and then re-ranks them with the same distance
routine the brute-force scan uses.  Ties in distance go to the lower
training index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .core import LabeledDataset
from .errors import DimensionMismatchError, EmptyDatasetError, KTooLargeError

# Relative slack when trusting tree-computed distances for candidate pruning.
_SLACK = 1e-9
# Upper bound on coordinates gathered at once by batch queries.
_CHUNK = 1 << 22


@dataclass(frozen=True, eq=False)
class NeighborList:
    """The ``k + 1`` nearest training points of one query, nearest first."""

    indices: np.ndarray
    distances: np.ndarray

    @property
    def k(self) -> int:
        return len(self.indices) - 1

    def __eq__(self, other):
        if not isinstance(other, NeighborList):
            return NotImplemented
        return (np.array_equal(self.indices, other.indices)
                and np.array_equal(self.distances, other.distances))


def squared_distances(points: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances from ``q`` to each row of ``points``.

    ``points`` may carry leading batch axes; reduction is always over the
    last axis, so every search route produces bit-identical values.
    """
    diff = points - q
    return np.sum(diff * diff, axis=-1)


def _as_points(ds_or_points) -> np.ndarray:
    if isinstance(ds_or_points, LabeledDataset):
        return ds_or_points.points
    return np.atleast_2d(np.asarray(ds_or_points, dtype=float))


def _check_query(points, q, k):
    q = np.atleast_1d(np.asarray(q, dtype=float))
    if q.ndim != 1 or q.shape[0] != points.shape[1]:
        raise DimensionMismatchError(
            f"query has dimension {q.shape[-1]}, training points have {points.shape[1]}")
    k = int(k)
    if k < 0:
        raise ValueError("k must be nonnegative")
    if k + 1 > points.shape[0]:
        raise KTooLargeError(f"k + 1 = {k + 1} exceeds the {points.shape[0]} training points")
    return q, k


def _rank(idx: np.ndarray, sq: np.ndarray, count: int) -> NeighborList:
    order = np.lexsort((idx, sq))[:count]
    return NeighborList(idx[order].astype(np.intp), np.sqrt(sq[order]))


def brute_knn(ds, q, k: int) -> NeighborList:
    """Full scan plus partial sort; the reference result for the tree."""
    points = _as_points(ds)
    if points.shape[0] == 0:
        raise EmptyDatasetError("no training points")
    q, k = _check_query(points, q, k)
    sq = squared_distances(points, q)
    if k + 1 < sq.size:
        cutoff = np.partition(sq, k)[k]
        cand = np.flatnonzero(sq <= cutoff)
    else:
        cand = np.arange(sq.size)
    return _rank(cand, sq[cand], k + 1)


class NeighborIndex:
    """Immutable k-d tree over a fixed set of training points.

    Queries are safe to issue concurrently.
    """

    def __init__(self, ds):
        points = _as_points(ds)
        if points.shape[0] == 0 or points.size == 0:
            raise EmptyDatasetError("cannot index an empty dataset")
        self._points = points
        self._tree = cKDTree(points, balanced_tree=True, compact_nodes=True)

    @property
    def n(self) -> int:
        return self._points.shape[0]

    @property
    def d(self) -> int:
        return self._points.shape[1]

    def query(self, q, k: int) -> NeighborList:
        q, k = _check_query(self._points, q, k)
        approx, _ = self._tree.query(q, k=k + 1)
        radius = float(np.max(approx))
        radius = np.nextafter(radius * (1.0 + _SLACK), np.inf)
        cand = np.asarray(self._tree.query_ball_point(q, radius), dtype=np.intp)
        return _rank(cand, squared_distances(self._points[cand], q), k + 1)

    def query_many(self, queries, k: int):
        """Batch form of :meth:`query`.

        Returns ``(indices, distances)`` arrays of shape ``(m, k + 1)``.
        """
        queries = np.atleast_2d(np.asarray(queries, dtype=float))
        if queries.shape[1] != self.d:
            raise DimensionMismatchError(
                f"queries have dimension {queries.shape[1]}, training points have {self.d}")
        k = int(k)
        if k + 1 > self.n:
            raise KTooLargeError(f"k + 1 = {k + 1} exceeds the {self.n} training points")
        m = queries.shape[0]
        want = min(k + 2, self.n)  # one extra column detects boundary ties
        step = max(1, _CHUNK // (want * self.d))
        if m > step:
            parts = [self.query_many(queries[i:i + step], k) for i in range(0, m, step)]
            return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])
        if 4 * (k + 1) >= self.n:
            return self._scan_many(queries, k)
        _, idx = self._tree.query(queries, k=want)
        idx = np.asarray(idx, dtype=np.intp).reshape(m, want)
        # index order first, then a stable sort on distance: ties by index
        idx = np.sort(idx, axis=1)
        sq = squared_distances(self._points[idx], queries[:, None, :])
        order = np.argsort(sq, axis=1, kind="stable")
        idx = np.take_along_axis(idx, order, axis=1)
        sq = np.take_along_axis(sq, order, axis=1)

        out_idx = idx[:, :k + 1].copy()
        out_dist = np.sqrt(sq[:, :k + 1])
        if want > k + 1:
            last, extra = sq[:, k], sq[:, k + 1]
            for row in np.flatnonzero(extra <= last * (1.0 + 4 * _SLACK)):
                nl = self.query(queries[row], k)
                out_idx[row] = nl.indices
                out_dist[row] = nl.distances
        return out_idx, out_dist

    def _scan_many(self, queries, k):
        # When most points are wanted pruning buys nothing; a stable sort of
        # the full distance rows keeps the ascending-index tie rule.
        sq = squared_distances(self._points[None, :, :], queries[:, None, :])
        order = np.argsort(sq, axis=1, kind="stable")[:, :k + 1]
        return order.astype(np.intp), np.sqrt(np.take_along_axis(sq, order, axis=1))


def build_index(ds) -> NeighborIndex:
    return NeighborIndex(ds)


def knn_query(index: NeighborIndex, q, k: int) -> NeighborList:
    return index.query(q, k)
