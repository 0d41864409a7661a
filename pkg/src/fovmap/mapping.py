"""Accumulated textured map: colored points in the local frame with a lazily
rebuilt spatial index. Append-only; existing points and colors are never
modified once written."""

from __future__ import annotations

from typing import Optional

import numpy as np

from fovmap.geometry import Frame, PointCloud
from fovmap.spatial import SpatialIndex


class TexturedMap:
    """Colored point accumulation in the local frame.

    Every point carries an RGB color and the id of the frame that produced it.
    The spatial index is invalidated on append and rebuilt on demand.
    """

    def __init__(self):
        self._xyz = np.zeros((0, 3), dtype=np.float64)
        self._colors = np.zeros((0, 3), dtype=np.uint8)
        self._frame_ids = np.zeros(0, dtype=np.int64)
        self._index: Optional[SpatialIndex] = None

    def __len__(self) -> int:
        return len(self._xyz)

    @property
    def is_empty(self) -> bool:
        return len(self) == 0

    @property
    def xyz(self) -> np.ndarray:
        return self._xyz

    @property
    def colors(self) -> np.ndarray:
        return self._colors

    @property
    def frame_ids(self) -> np.ndarray:
        return self._frame_ids

    @property
    def cloud(self) -> PointCloud:
        return PointCloud(self._xyz, Frame.LOCAL, colors=self._colors)

    def append(self, xyz: np.ndarray, colors: np.ndarray, frame_id: int) -> None:
        xyz = np.asarray(xyz, dtype=np.float64).reshape(-1, 3)
        colors = np.asarray(colors, dtype=np.uint8).reshape(-1, 3)
        if len(xyz) != len(colors):
            raise ValueError("points and colors must have equal length")
        if len(xyz) == 0:
            return
        self._xyz = np.vstack([self._xyz, xyz])
        self._colors = np.vstack([self._colors, colors])
        self._frame_ids = np.concatenate(
            [self._frame_ids, np.full(len(xyz), frame_id, dtype=np.int64)]
        )
        self._index = None

    def index(self) -> SpatialIndex:
        """Spatial index over the current points; rebuilt after appends."""
        if self.is_empty:
            raise ValueError("map is empty")
        if self._index is None:
            self._index = SpatialIndex(self._xyz)
        return self._index
