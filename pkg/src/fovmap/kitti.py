"""KITTI raw sequence ingestion: velodyne binary scans, rectified color
images, OXTS navigation records, and the calibration chain from the velodyne
frame into the rectified camera.

Layout expected under the sequence root:
    velodyne_points/data/*.bin   float32 (x, y, z, reflectance) records
    image_02/data/*.png          8-bit RGB rasters
    oxts/data/*.txt              30-field navigation records
    calib_velo_to_cam.txt, calib_cam_to_cam.txt
    calib_imu_to_velo.txt        optional; identity assumed when absent
    timestamps under velodyne_points/ are used when present

Poses: latitude/longitude/altitude go through the Mercator projection scaled
by cos(first latitude); roll/pitch/yaw build the rotation as Rz(yaw) @
Ry(pitch) @ Rx(roll). The first frame anchors the local frame (identity pose).
"""

from __future__ import annotations

import math
import os
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
from PIL import Image

from fovmap.frames import FrameBundle
from fovmap.geometry import CameraModel, Frame, PointCloud, RigidTransform

EARTH_RADIUS = 6378137.0
OXTS_FIELDS = 30


def read_velodyne_bin(path: str | os.PathLike) -> PointCloud:
    """Decode one scan file of float32 (x, y, z, reflectance) quadruples."""
    raw = np.fromfile(path, dtype=np.float32)
    if raw.size % 4 != 0:
        raise ValueError(f"truncated velodyne file {path}: {raw.size * 4} bytes")
    pts = raw.reshape(-1, 4).astype(np.float64)
    return PointCloud(pts[:, :3], Frame.VEHICLE, intensity=np.clip(pts[:, 3], 0.0, 1.0))


def read_image(path: str | os.PathLike) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def parse_calib_file(path: str | os.PathLike) -> dict:
    """Parse 'key: v v v ...' calibration lines into float arrays."""
    out = {}
    with open(path) as fh:
        for line in fh:
            if ":" not in line:
                continue
            key, _, rest = line.partition(":")
            try:
                out[key.strip()] = np.array([float(x) for x in rest.split()])
            except ValueError:
                out[key.strip()] = rest.strip()
    return out


def _rotation_rpy(roll: float, pitch: float, yaw: float) -> np.ndarray:
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    Rx = np.array([[1, 0, 0], [0, cr, -sr], [0, sr, cr]])
    Ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]])
    Rz = np.array([[cy, -sy, 0], [sy, cy, 0], [0, 0, 1]])
    return Rz @ Ry @ Rx


def oxts_to_pose(fields: Sequence[float], scale: float) -> RigidTransform:
    """World pose of one OXTS record under the scaled Mercator convention."""
    lat, lon, alt = fields[0], fields[1], fields[2]
    roll, pitch, yaw = fields[3], fields[4], fields[5]
    x = scale * math.radians(lon) * EARTH_RADIUS
    y = scale * EARTH_RADIUS * math.log(math.tan(math.radians(90.0 + lat) / 2.0))
    return RigidTransform(_rotation_rpy(roll, pitch, yaw), np.array([x, y, alt]))


def read_oxts_file(path: str | os.PathLike) -> np.ndarray:
    fields = np.loadtxt(path)
    if fields.ndim != 1 or fields.size < OXTS_FIELDS:
        raise ValueError(f"OXTS record {path} has {fields.size} fields, expected {OXTS_FIELDS}")
    return fields


def load_camera_model(root: Path, camera: int = 2) -> CameraModel:
    """Compose the velodyne-to-rectified-camera chain from calibration files."""
    c2c = parse_calib_file(root / "calib_cam_to_cam.txt")
    v2c = parse_calib_file(root / "calib_velo_to_cam.txt")
    for key in ("R", "T"):
        if key not in v2c:
            raise ValueError(f"calib_velo_to_cam.txt missing key {key!r}")
    cam_id = f"{camera:02d}"
    for key in (f"R_rect_00", f"P_rect_{cam_id}", f"S_rect_{cam_id}"):
        if key not in c2c:
            raise ValueError(f"calib_cam_to_cam.txt missing key {key!r}")

    R_vc = v2c["R"].reshape(3, 3)
    t_vc = v2c["T"].reshape(3)
    R_rect = c2c["R_rect_00"].reshape(3, 3)
    P = c2c[f"P_rect_{cam_id}"].reshape(3, 4)
    width, height = (int(round(v)) for v in c2c[f"S_rect_{cam_id}"][:2])

    K = P[:, :3]
    # the fourth projection column is a K-premultiplied camera offset
    t_extra = np.linalg.solve(K, P[:, 3])
    R_e = R_rect @ R_vc
    t_e = R_rect @ t_vc + t_extra
    # rectifying rotations from calibration files are orthonormal only to
    # calibration precision; RigidTransform snaps them
    return CameraModel(K / K[2, 2], RigidTransform(R_e, t_e), width, height)


def _imu_to_velo(root: Path) -> RigidTransform:
    path = root / "calib_imu_to_velo.txt"
    if not path.exists():
        return RigidTransform.identity()
    calib = parse_calib_file(path)
    return RigidTransform(calib["R"].reshape(3, 3), calib["T"].reshape(3))


def _read_timestamps(path: Path, n: int) -> List[float]:
    if not path.exists():
        return [float(i) * 0.1 for i in range(n)]
    stamps = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            clock = line.split(" ")[-1]
            h, m, s = clock.split(":")
            stamps.append(int(h) * 3600.0 + int(m) * 60.0 + float(s))
    if len(stamps) < n:
        return [float(i) * 0.1 for i in range(n)]
    t0 = stamps[0]
    return [t - t0 for t in stamps[:n]]


def iter_kitti_sequence(
    root_path: str | os.PathLike,
    frame_range: Optional[Tuple[int, int]] = None,
    camera: int = 2,
):
    """Yield frame bundles of a KITTI raw sequence directory, one at a time.

    frame_range: optional (start, count). Calibration files are taken from the
    sequence directory or its parent (the KITTI date directory). The local
    frame is anchored at the sequence's first record even when a sub-range is
    requested, so poses from different ranges compose.
    """
    root = Path(root_path)
    if not root.is_dir():
        raise FileNotFoundError(f"sequence directory not found: {root}")

    calib_root = root
    if not (calib_root / "calib_cam_to_cam.txt").exists():
        if (root.parent / "calib_cam_to_cam.txt").exists():
            calib_root = root.parent
        else:
            raise FileNotFoundError(f"calib_cam_to_cam.txt not found under {root} or its parent")

    scan_files = sorted((root / "velodyne_points" / "data").glob("*.bin"))
    image_files = sorted((root / f"image_{camera:02d}" / "data").glob("*.png"))
    oxts_files = sorted((root / "oxts" / "data").glob("*.txt"))
    if not scan_files:
        raise FileNotFoundError(f"no velodyne scans under {root}")
    if not (len(scan_files) == len(image_files) == len(oxts_files)):
        raise ValueError(
            f"stream length mismatch under {root}: "
            f"{len(scan_files)} scans, {len(image_files)} images, {len(oxts_files)} oxts records"
        )

    cam = load_camera_model(calib_root, camera)
    imu_to_velo = _imu_to_velo(calib_root)
    velo_from_imu = imu_to_velo.inverse()

    first_fields = read_oxts_file(oxts_files[0])
    scale = math.cos(math.radians(first_fields[0]))
    origin_world = oxts_to_pose(first_fields, scale).compose(velo_from_imu)
    origin_inv = origin_world.inverse()

    indices = range(len(scan_files))
    if frame_range is not None:
        start, count = frame_range
        indices = range(start, min(start + count, len(scan_files)))

    timestamps = _read_timestamps(root / "velodyne_points" / "timestamps.txt", len(scan_files))

    for i in indices:
        scan = read_velodyne_bin(scan_files[i])
        image = read_image(image_files[i])
        if image.shape[0] != cam.image_height or image.shape[1] != cam.image_width:
            raise ValueError(
                f"{image_files[i]} is {image.shape[1]}x{image.shape[0]} but calibration "
                f"says {cam.image_width}x{cam.image_height}"
            )
        fields = read_oxts_file(oxts_files[i])
        world = oxts_to_pose(fields, scale).compose(velo_from_imu)
        pose = origin_inv.compose(world)
        yield FrameBundle(
            scan=scan,
            image=image,
            raw_pose=pose,
            cam=cam,
            timestamp=timestamps[i],
            frame_id=i,
        )


def load_kitti_sequence(
    root_path: str | os.PathLike,
    frame_range: Optional[Tuple[int, int]] = None,
    camera: int = 2,
) -> List[FrameBundle]:
    """Load a KITTI raw sequence directory into a list of frame bundles."""
    return list(iter_kitti_sequence(root_path, frame_range, camera))
