"""Incremental 2D Delaunay triangulation with 3D payloads per vertex.

Bowyer-Watson insertion against a bounding super-triangle. Each 2D vertex
(image coordinates) carries the 3D point it was projected from, so triangles
in pixel space can be lifted back to triangles in 3D space.
"""

from __future__ import annotations

from typing import List, Optional, Tuple

import numpy as np

DUPLICATE_EPS = 1e-9


def circumcircle(a: np.ndarray, b: np.ndarray, c: np.ndarray):
    """Center and squared radius of the circle through three 2D points.

    Returns (None, inf) for degenerate (collinear) triples.
    """
    d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]))
    if abs(d) < 1e-30:
        return None, np.inf
    a2 = a[0] * a[0] + a[1] * a[1]
    b2 = b[0] * b[0] + b[1] * b[1]
    c2 = c[0] * c[0] + c[1] * c[1]
    ux = (a2 * (b[1] - c[1]) + b2 * (c[1] - a[1]) + c2 * (a[1] - b[1])) / d
    uy = (a2 * (c[0] - b[0]) + b2 * (a[0] - c[0]) + c2 * (b[0] - a[0])) / d
    center = np.array([ux, uy])
    r2 = (a[0] - ux) ** 2 + (a[1] - uy) ** 2
    return center, r2


class Triangulation:
    """Mutable Delaunay triangulation over 2D vertices with 3D backing points.

    Internal vertex indices 0..2 are the super-triangle corners; user-facing
    indices skip them. Insertion restores the Delaunay property after every
    vertex; inserting a duplicate 2D position (within DUPLICATE_EPS) is a
    no-op.
    """

    def __init__(self, bounds: Tuple[float, float, float, float]):
        xmin, ymin, xmax, ymax = bounds
        span = max(xmax - xmin, ymax - ymin, 1.0)
        cx, cy = (xmin + xmax) / 2.0, (ymin + ymax) / 2.0
        m = 50.0 * span + 1000.0
        self._uv: List[np.ndarray] = [
            np.array([cx - m, cy - m]),
            np.array([cx + m, cy - m]),
            np.array([cx, cy + m]),
        ]
        self._xyz: List[Optional[np.ndarray]] = [None, None, None]
        self._tris: List[Tuple[int, int, int]] = [(0, 1, 2)]
        self._circum: List[Tuple[Optional[np.ndarray], float]] = [
            circumcircle(self._uv[0], self._uv[1], self._uv[2])
        ]

    @classmethod
    def from_points(
        cls, uv: np.ndarray, xyz: Optional[np.ndarray] = None
    ) -> "Triangulation":
        uv = np.asarray(uv, dtype=np.float64)
        lo = uv.min(axis=0)
        hi = uv.max(axis=0)
        tri = cls((lo[0], lo[1], hi[0], hi[1]))
        for i in range(len(uv)):
            tri.insert(uv[i], None if xyz is None else xyz[i])
        return tri

    @property
    def n_vertices(self) -> int:
        return len(self._uv) - 3

    def vertex(self, i: int) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        """User-facing vertex i: (2D coordinates, backing 3D point)."""
        return self._uv[i + 3], self._xyz[i + 3]

    @property
    def vertices_2d(self) -> np.ndarray:
        if self.n_vertices == 0:
            return np.zeros((0, 2))
        return np.vstack(self._uv[3:])

    @property
    def triangles(self) -> List[Tuple[int, int, int]]:
        """Triangles not touching the super-triangle, as user vertex indices."""
        out = []
        for (i, j, k) in self._tris:
            if i >= 3 and j >= 3 and k >= 3:
                out.append((i - 3, j - 3, k - 3))
        return out

    def insert(self, uv: np.ndarray, xyz: Optional[np.ndarray] = None) -> bool:
        """Insert one vertex; returns False when skipped as a duplicate."""
        p = np.asarray(uv, dtype=np.float64).reshape(2)
        for q in self._uv:
            if abs(p[0] - q[0]) <= DUPLICATE_EPS and abs(p[1] - q[1]) <= DUPLICATE_EPS:
                return False

        bad = []
        for ti, (center, r2) in enumerate(self._circum):
            if center is None:
                continue
            dx = p[0] - center[0]
            dy = p[1] - center[1]
            # strict containment with a relative guard keeps co-circular
            # configurations stable
            if dx * dx + dy * dy < r2 - 1e-12 * (1.0 + r2):
                bad.append(ti)
        if not bad:
            raise ValueError("vertex outside the supported insertion region")

        # boundary = edges of the cavity that belong to exactly one bad triangle
        edge_count: dict = {}
        for ti in bad:
            i, j, k = self._tris[ti]
            for e in ((i, j), (j, k), (k, i)):
                key = (min(e), max(e))
                edge_count[key] = edge_count.get(key, 0) + 1
        boundary = [e for e, n in edge_count.items() if n == 1]

        for ti in sorted(bad, reverse=True):
            del self._tris[ti]
            del self._circum[ti]

        self._uv.append(p)
        self._xyz.append(None if xyz is None else np.asarray(xyz, dtype=np.float64))
        pi = len(self._uv) - 1
        for (i, j) in sorted(boundary):
            self._tris.append((i, j, pi))
            self._circum.append(circumcircle(self._uv[i], self._uv[j], p))
        return True

    def triangle_corners_2d(self) -> List[np.ndarray]:
        """2D corner coordinates for every user-facing triangle."""
        return [
            np.vstack([self._uv[i + 3], self._uv[j + 3], self._uv[k + 3]])
            for (i, j, k) in self.triangles
        ]
