"""Exact nearest-neighbor search over fixed 3D point sets.

Ties at exactly equal distance resolve to the lowest insertion index, which
keeps every downstream consumer (registration correspondences, map metrics)
deterministic. Build once, query many; queries are safe to run concurrently.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

_TIE_EPS = 1e-12


class SpatialIndex:
    """k-d tree over an (n, 3) array with deterministic tie-breaking."""

    def __init__(self, xyz: np.ndarray):
        pts = np.asarray(xyz, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"expected (n, 3) points, got {pts.shape}")
        if len(pts) == 0:
            raise ValueError("cannot build an index over an empty cloud")
        self.points = pts
        self._tree = cKDTree(pts)

    def __len__(self) -> int:
        return len(self.points)

    def _refine(self, query: np.ndarray, d0: float) -> tuple[int, float]:
        """Resolve the winner among all points tied at the minimal distance."""
        radius = d0 + _TIE_EPS * (1.0 + d0)
        candidates = self._tree.query_ball_point(query, radius)
        cand = np.asarray(sorted(candidates), dtype=np.int64)
        dists = np.linalg.norm(self.points[cand] - query, axis=1)
        dmin = dists.min()
        winner = cand[dists == dmin][0]
        return int(winner), float(dmin)

    def nearest(self, query: np.ndarray) -> tuple[np.ndarray, int, float]:
        """Nearest point to `query`: returns (point, index, distance)."""
        q = np.asarray(query, dtype=np.float64).reshape(3)
        d0, _ = self._tree.query(q)
        idx, dist = self._refine(q, float(d0))
        return self.points[idx], idx, dist

    def nearest_many(self, queries: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized nearest lookup: returns (indices, distances).

        Fast path uses the raw tree; queries whose first and second neighbor
        distances collide within tolerance are re-resolved exactly.
        """
        qs = np.asarray(queries, dtype=np.float64)
        if qs.ndim == 1:
            qs = qs.reshape(1, 3)
        k = min(2, len(self.points))
        d, i = self._tree.query(qs, k=k)
        if k == 1:
            return np.zeros(len(qs), dtype=np.int64), np.asarray(d, dtype=np.float64).reshape(-1)
        idx = i[:, 0].astype(np.int64)
        dist = d[:, 0].astype(np.float64)
        ambiguous = np.nonzero(d[:, 1] - d[:, 0] <= _TIE_EPS * (1.0 + d[:, 0]))[0]
        for j in ambiguous:
            idx[j], dist[j] = self._refine(qs[j], dist[j])
        return idx, dist

    def query(self, queries: np.ndarray, k: int = 1):
        """Raw k-NN passthrough (no tie refinement); deterministic per build."""
        return self._tree.query(np.asarray(queries, dtype=np.float64), k=k)


def nearest_neighbor(index: SpatialIndex, query: np.ndarray) -> tuple[np.ndarray, float]:
    """Nearest indexed point and its Euclidean distance to `query`."""
    point, _, dist = index.nearest(query)
    return point, dist
