"""Foveal region membership: distance shells around the camera plus restricted
field-of-view slices in the image.

A point is foveal when its ray length lies in the white zone (between the near
blind and far blind shells), it projects into the image, and the projection
falls inside the union of a horizontal and a vertical angular slice centered
on the principal point. The inner radius is inclusive, the outer exclusive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from fovmap.geometry import CameraModel, PointCloud, project_points

DEFAULT_NEAR_BLIND_RADIUS = 3.0
DEFAULT_WHITE_ZONE_OUTER_RADIUS = 15.0
DEFAULT_SLICE_HALF_ANGLE = math.radians(5.0)


@dataclass(frozen=True)
class FovealConfig:
    """near_blind_radius / white_zone_outer_radius bound the white zone (m).
    horizontal_slice_half_angle: vertical half-extent of the horizontal band;
    vertical_slice_half_angle: horizontal half-extent of the vertical band
    (radians)."""

    near_blind_radius: float = DEFAULT_NEAR_BLIND_RADIUS
    white_zone_outer_radius: float = DEFAULT_WHITE_ZONE_OUTER_RADIUS
    horizontal_slice_half_angle: float = DEFAULT_SLICE_HALF_ANGLE
    vertical_slice_half_angle: float = DEFAULT_SLICE_HALF_ANGLE

    def __post_init__(self):
        if not 0 <= self.near_blind_radius < self.white_zone_outer_radius:
            raise ValueError("need 0 <= near_blind_radius < white_zone_outer_radius")
        if not (0 < self.horizontal_slice_half_angle < math.pi / 2):
            raise ValueError("horizontal_slice_half_angle out of range")
        if not (0 < self.vertical_slice_half_angle < math.pi / 2):
            raise ValueError("vertical_slice_half_angle out of range")


def foveal_mask(points: np.ndarray, cam: CameraModel, cfg: FovealConfig) -> np.ndarray:
    """Vectorized membership test for points in the camera's source frame."""
    proj = project_points(points, cam)
    in_zone = (proj.ray >= cfg.near_blind_radius) & (proj.ray < cfg.white_zone_outer_radius)
    row_band = np.abs(proj.v - cam.cy) <= math.tan(cfg.horizontal_slice_half_angle) * cam.fy
    col_band = np.abs(proj.u - cam.cx) <= math.tan(cfg.vertical_slice_half_angle) * cam.fx
    with np.errstate(invalid="ignore"):
        in_slices = np.where(proj.in_image, row_band | col_band, False)
    return proj.in_image & in_zone & in_slices


def in_foveal_region(point: np.ndarray, cam: CameraModel, cfg: FovealConfig) -> bool:
    return bool(foveal_mask(np.asarray(point, dtype=np.float64).reshape(1, 3), cam, cfg)[0])


def extract_foveal(cloud: PointCloud, cam: CameraModel, cfg: FovealConfig) -> PointCloud:
    """Order-preserving foveal subset of a cloud in the camera's source frame."""
    if cloud.is_empty:
        return cloud
    return cloud.select(foveal_mask(cloud.xyz, cam, cfg))
