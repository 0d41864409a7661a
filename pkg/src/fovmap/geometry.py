"""Core geometric types: point clouds, SE(3) poses, pinhole cameras, projections.

Conventions used throughout:
  - Points are float64 arrays of shape (3,) or (n, 3), in meters.
  - A RigidTransform maps points from its source frame into its target frame
    as p' = R @ p + t.
  - CameraModel.extrinsics maps points from the scan/vehicle frame into the
    camera frame (x right, y down, z forward).
  - Image coordinates: u is the column, v is the row; integer pixels are the
    floor of the dehomogenized projection.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Optional, Sequence

import numpy as np

ROTATION_TOL = 1e-9


class Frame(Enum):
    """Reference frame a cloud is expressed in."""

    VEHICLE = "vehicle"
    LOCAL = "local"
    CAMERA = "camera"


def _as_points(xyz) -> np.ndarray:
    pts = np.asarray(xyz, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts.reshape(1, 3)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"expected (n, 3) points, got shape {pts.shape}")
    return pts


@dataclass(frozen=True)
class PointCloud:
    """Immutable set of 3D points with optional per-point intensity and color.

    xyz:       (n, 3) float64, meters, all finite
    frame:     frame tag, fixed at construction
    intensity: optional (n,) float64 in [0, 1]
    colors:    optional (n, 3) uint8 RGB
    """

    xyz: np.ndarray
    frame: Frame
    intensity: Optional[np.ndarray] = None
    colors: Optional[np.ndarray] = None

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.xyz, dtype=np.float64))
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"xyz must be (n, 3), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("xyz contains non-finite coordinates")
        object.__setattr__(self, "xyz", pts)
        if self.intensity is not None:
            inten = np.ascontiguousarray(np.asarray(self.intensity, dtype=np.float64))
            if inten.shape != (len(pts),):
                raise ValueError("intensity length must match points")
            object.__setattr__(self, "intensity", inten)
            inten.setflags(write=False)
        if self.colors is not None:
            col = np.ascontiguousarray(np.asarray(self.colors, dtype=np.uint8))
            if col.shape != (len(pts), 3):
                raise ValueError("colors must be (n, 3)")
            object.__setattr__(self, "colors", col)
            col.setflags(write=False)
        pts.setflags(write=False)

    def __len__(self) -> int:
        return self.xyz.shape[0]

    @property
    def is_empty(self) -> bool:
        return len(self) == 0

    @classmethod
    def empty(cls, frame: Frame) -> "PointCloud":
        return cls(np.zeros((0, 3)), frame)

    def select(self, mask_or_indices) -> "PointCloud":
        """New cloud holding the selected points, attributes carried through."""
        return PointCloud(
            self.xyz[mask_or_indices],
            self.frame,
            None if self.intensity is None else self.intensity[mask_or_indices],
            None if self.colors is None else self.colors[mask_or_indices],
        )

    def with_frame(self, frame: Frame) -> "PointCloud":
        return PointCloud(self.xyz, frame, self.intensity, self.colors)


def concat_clouds(parts: Sequence[PointCloud]) -> PointCloud:
    """Concatenate clouds in order. Frames must agree; an optional attribute
    is kept only if every part carries it."""
    if not parts:
        raise ValueError("need at least one cloud")
    frame = parts[0].frame
    if any(p.frame is not frame for p in parts):
        raise ValueError("cannot concatenate clouds in different frames")
    xyz = np.vstack([p.xyz for p in parts])
    inten = None
    if all(p.intensity is not None for p in parts):
        inten = np.concatenate([p.intensity for p in parts])
    colors = None
    if all(p.colors is not None for p in parts):
        colors = np.vstack([p.colors for p in parts])
    return PointCloud(xyz, frame, inten, colors)


@dataclass(frozen=True)
class RigidTransform:
    """SE(3) pose: p' = rotation @ p + translation.

    rotation must be orthonormal with determinant +1 (Frobenius tolerance
    ROTATION_TOL on R @ R.T - I).
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.ascontiguousarray(np.asarray(self.rotation, dtype=np.float64))
        t = np.ascontiguousarray(np.asarray(self.translation, dtype=np.float64)).reshape(3)
        if R.shape != (3, 3):
            raise ValueError("rotation must be 3x3")
        if not np.all(np.isfinite(R)) or not np.all(np.isfinite(t)):
            raise ValueError("non-finite transform")
        err = np.linalg.norm(R @ R.T - np.eye(3))
        if err > 1e-6:
            raise ValueError(f"rotation not orthonormal (|RR^T - I| = {err:.3g})")
        if np.linalg.det(R) < 0:
            raise ValueError("rotation has negative determinant")
        # Snap to the nearest rotation when within loose tolerance but outside
        # the strict one, so composed chains stay valid.
        if err > ROTATION_TOL:
            U, _, Vt = np.linalg.svd(R)
            R = U @ Vt
            if np.linalg.det(R) < 0:
                U[:, -1] = -U[:, -1]
                R = U @ Vt
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)
        R.setflags(write=False)
        t.setflags(write=False)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "RigidTransform":
        m = np.asarray(m, dtype=np.float64)
        return cls(m[:3, :3], m[:3, 3])

    @classmethod
    def from_rotvec(cls, rotvec, translation=(0.0, 0.0, 0.0)) -> "RigidTransform":
        """Rodrigues exponential of an axis-angle vector (radians)."""
        w = np.asarray(rotvec, dtype=np.float64).reshape(3)
        theta = np.linalg.norm(w)
        if theta < 1e-14:
            return cls(np.eye(3), translation)
        axis = w / theta
        K = np.array(
            [
                [0.0, -axis[2], axis[1]],
                [axis[2], 0.0, -axis[0]],
                [-axis[1], axis[0], 0.0],
            ]
        )
        R = np.eye(3) + np.sin(theta) * K + (1.0 - np.cos(theta)) * (K @ K)
        return cls(R, translation)

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self ∘ other: apply `other` first, then `self`."""
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def inverse(self) -> "RigidTransform":
        Rt = self.rotation.T
        return RigidTransform(Rt, -Rt @ self.translation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim == 1:
            return self.rotation @ pts + self.translation
        return pts @ self.rotation.T + self.translation

    def rotation_angle(self) -> float:
        """Rotation magnitude in radians."""
        c = (np.trace(self.rotation) - 1.0) / 2.0
        return float(np.arccos(np.clip(c, -1.0, 1.0)))


def transform_cloud(
    cloud: PointCloud, T: RigidTransform, frame: Optional[Frame] = None
) -> PointCloud:
    """Apply a rigid transform to every point; attributes carried unchanged.

    `frame` declares the output frame tag; defaults to the input tag.
    """
    return PointCloud(
        T.apply(cloud.xyz),
        cloud.frame if frame is None else frame,
        cloud.intensity,
        cloud.colors,
    )


@dataclass(frozen=True)
class CameraModel:
    """Pinhole camera: intrinsic matrix K plus extrinsics into the camera frame.

    K is upper triangular with K[2, 2] == 1 and strictly positive focal
    entries. Pixels are p = K @ (R @ P + t), dehomogenized and floored.
    """

    intrinsics: np.ndarray
    extrinsics: RigidTransform
    image_width: int
    image_height: int

    def __post_init__(self):
        K = np.ascontiguousarray(np.asarray(self.intrinsics, dtype=np.float64))
        if K.shape != (3, 3):
            raise ValueError("intrinsics must be 3x3")
        if abs(K[2, 2] - 1.0) > 1e-12:
            raise ValueError("K[2][2] must be 1")
        if K[0, 0] <= 0 or K[1, 1] <= 0:
            raise ValueError("focal entries must be strictly positive")
        if max(abs(K[1, 0]), abs(K[2, 0]), abs(K[2, 1])) > 1e-9:
            raise ValueError("K must be upper triangular")
        if self.image_width <= 0 or self.image_height <= 0:
            raise ValueError("image dimensions must be positive")
        object.__setattr__(self, "intrinsics", K)
        K.setflags(write=False)

    @property
    def fx(self) -> float:
        return float(self.intrinsics[0, 0])

    @property
    def fy(self) -> float:
        return float(self.intrinsics[1, 1])

    @property
    def cx(self) -> float:
        return float(self.intrinsics[0, 2])

    @property
    def cy(self) -> float:
        return float(self.intrinsics[1, 2])

    def origin_in_source_frame(self) -> np.ndarray:
        """Camera optical center expressed in the frame extrinsics map from."""
        return self.extrinsics.inverse().translation


class Projection(NamedTuple):
    """Batched projection result.

    u, v:     float dehomogenized image coordinates
    col, row: integer pixel (floor of u, v); valid only where in_image
    depth:    camera-frame z
    ray:      Euclidean distance from the camera optical center, meters
    in_image: depth > 0 and pixel inside image bounds
    """

    u: np.ndarray
    v: np.ndarray
    col: np.ndarray
    row: np.ndarray
    depth: np.ndarray
    ray: np.ndarray
    in_image: np.ndarray


def project_points(points: np.ndarray, cam: CameraModel) -> Projection:
    """Project points (expressed in the extrinsics' source frame) into the image."""
    pts = _as_points(points)
    p_cam = cam.extrinsics.apply(pts)
    depth = p_cam[:, 2]
    ray = np.linalg.norm(p_cam, axis=1)
    front = depth > 0
    skew = float(cam.intrinsics[0, 1])
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(front, (cam.fx * p_cam[:, 0] + skew * p_cam[:, 1]) / depth + cam.cx, np.nan)
        v = np.where(front, cam.fy * p_cam[:, 1] / depth + cam.cy, np.nan)
    col = np.full(len(pts), -1, dtype=np.int64)
    row = np.full(len(pts), -1, dtype=np.int64)
    col[front] = np.floor(u[front]).astype(np.int64)
    row[front] = np.floor(v[front]).astype(np.int64)
    in_image = (
        front
        & (col >= 0)
        & (col < cam.image_width)
        & (row >= 0)
        & (row < cam.image_height)
    )
    return Projection(u=u, v=v, col=col, row=row, depth=depth, ray=ray, in_image=in_image)


def project_point(point: np.ndarray, cam: CameraModel):
    """Project one point; returns ((col, row), ray_length) or None when the
    point is behind the camera or outside the image."""
    proj = project_points(np.asarray(point, dtype=np.float64).reshape(1, 3), cam)
    if not proj.in_image[0]:
        return None
    return (int(proj.col[0]), int(proj.row[0])), float(proj.ray[0])
