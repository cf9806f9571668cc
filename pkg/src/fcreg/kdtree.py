"""Exact k-nearest-neighbor queries over an immutable 3D point cloud.

Backed by scipy's cKDTree for speed, with a post-processing layer that makes
results exact and deterministic: squared distances are recomputed with the
same arithmetic a brute-force scan would use, ties are broken by lower
original index, and tie groups that straddle the k-th rank are resolved by
re-querying until the group is complete.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .validation import check_points


class KdTree3:
    """Spatial index over a snapshot of a point cloud.

    Queries return original point indices; the tree never mutates after
    construction, so concurrent queries are safe.
    """

    def __init__(self, points):
        self.points = check_points(points, "cloud")
        self._tree = cKDTree(self.points)

    def __len__(self) -> int:
        return self.points.shape[0]

    def knn(self, query, k: int):
        """k nearest neighbors of ``query`` (a point or an (Q, 3) batch).

        Returns ``(indices, sq_dists)`` sorted by ascending squared distance,
        ties broken by lower index. Exact: matches an exhaustive scan.
        """
        n = len(self)
        if not 1 <= k <= n:
            raise ValueError(f"k must be in [1, {n}], got {k}")
        q = np.asarray(query, dtype=np.float64)
        single = q.ndim == 1
        q = np.atleast_2d(q)
        if q.shape[1] != 3:
            raise ValueError(f"query must have 3 coordinates, got shape {q.shape}")

        # One extra neighbor exposes ties that straddle the k-th rank.
        k_query = min(k + 1, n)
        _, idx = self._tree.query(q, k=k_query)
        idx = np.asarray(idx).reshape(q.shape[0], k_query)

        out_idx = np.empty((q.shape[0], k), dtype=np.intp)
        out_d2 = np.empty((q.shape[0], k))
        for row in range(q.shape[0]):
            cand = idx[row]
            d2 = self._sq_dist(cand, q[row])
            order = np.lexsort((cand, d2))
            cand, d2 = cand[order], d2[order]
            kth = d2[k - 1]
            if k_query > k and d2[k] == kth:
                cand, d2 = self._full_tie_group(q[row], k, kth)
            out_idx[row] = cand[:k]
            out_d2[row] = d2[:k]
        if single:
            return out_idx[0], out_d2[0]
        return out_idx, out_d2

    def _sq_dist(self, indices, point):
        diff = self.points[indices] - point
        return (diff * diff).sum(axis=-1)

    def _full_tie_group(self, point, k, kth):
        # Grow the candidate list until it strictly passes the k-th distance,
        # so every member of the boundary tie group is present.
        n = len(self)
        k_query = min(2 * k + 16, n)
        while True:
            _, cand = self._tree.query(point, k=k_query)
            cand = np.atleast_1d(cand)
            d2 = self._sq_dist(cand, point)
            order = np.lexsort((cand, d2))
            cand, d2 = cand[order], d2[order]
            if k_query == n or d2[-1] > kth:
                return cand, d2
            k_query = min(2 * k_query, n)


def build(cloud) -> KdTree3:
    return KdTree3(cloud)
