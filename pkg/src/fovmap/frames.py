"""Time-synchronized sensor frame: one LIDAR scan, one image, one raw pose."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fovmap.geometry import CameraModel, Frame, PointCloud, RigidTransform


@dataclass
class FrameBundle:
    """scan: vehicle-frame cloud; image: (H, W, 3) uint8 RGB matching the
    camera model; raw_pose: vehicle-to-local navigation pose."""

    scan: PointCloud
    image: np.ndarray
    raw_pose: RigidTransform
    cam: CameraModel
    timestamp: float = 0.0
    frame_id: int = 0

    def __post_init__(self):
        img = np.asarray(self.image)
        if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
            raise ValueError("image must be (H, W, 3) uint8")
        if img.shape[0] != self.cam.image_height or img.shape[1] != self.cam.image_width:
            raise ValueError(
                f"image is {img.shape[1]}x{img.shape[0]} but camera expects "
                f"{self.cam.image_width}x{self.cam.image_height}"
            )
        if self.scan.is_empty:
            raise ValueError("scan must be non-empty")
        if self.scan.frame is not Frame.VEHICLE:
            raise ValueError("scan must be expressed in the vehicle frame")
        object.__setattr__(self, "image", img)
