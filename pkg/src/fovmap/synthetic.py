"""Synthetic test scenes: colored planar rectangles and boxes sampled by an
exact ray-casting beam model, with a matching pinhole render of the camera
view and per-point ground truth (true position, true color, exact visibility).

Everything is constructed by ray-primitive intersection, so generated scan
points lie exactly on their surfaces and visibility bits are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from fovmap.geometry import CameraModel, Frame, PointCloud, RigidTransform

RAY_EPS = 1e-9


@dataclass(frozen=True)
class Rectangle:
    """Finite colored rectangle: center, two orthogonal unit in-plane axes,
    half extents along each."""

    center: np.ndarray
    u_axis: np.ndarray
    v_axis: np.ndarray
    half_u: float
    half_v: float
    color: Tuple[int, int, int]

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64))
        u = np.asarray(self.u_axis, dtype=np.float64)
        v = np.asarray(self.v_axis, dtype=np.float64)
        object.__setattr__(self, "u_axis", u / np.linalg.norm(u))
        object.__setattr__(self, "v_axis", v / np.linalg.norm(v))

    @property
    def normal(self) -> np.ndarray:
        return np.cross(self.u_axis, self.v_axis)

    def intersect(self, origins: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        n = self.normal
        denom = dirs @ n
        with np.errstate(divide="ignore", invalid="ignore"):
            t = ((self.center - origins) @ n) / denom
            hit = (np.abs(denom) > 1e-12) & (t > RAY_EPS)
            p = origins + np.where(hit, t, 0.0)[:, None] * dirs
            rel = p - self.center
            a = rel @ self.u_axis
            b = rel @ self.v_axis
            hit &= (np.abs(a) <= self.half_u) & (np.abs(b) <= self.half_v)
        return np.where(hit, t, np.inf)

    def distance(self, points: np.ndarray) -> np.ndarray:
        rel = points - self.center
        a = np.clip(rel @ self.u_axis, -self.half_u, self.half_u)
        b = np.clip(rel @ self.v_axis, -self.half_v, self.half_v)
        closest = self.center + a[:, None] * self.u_axis + b[:, None] * self.v_axis
        return np.linalg.norm(points - closest, axis=1)


@dataclass(frozen=True)
class Box:
    """Axis-aligned colored box."""

    min_corner: np.ndarray
    max_corner: np.ndarray
    color: Tuple[int, int, int]

    def __post_init__(self):
        object.__setattr__(self, "min_corner", np.asarray(self.min_corner, dtype=np.float64))
        object.__setattr__(self, "max_corner", np.asarray(self.max_corner, dtype=np.float64))

    def intersect(self, origins: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / dirs
            t1 = (self.min_corner - origins) * inv
            t2 = (self.max_corner - origins) * inv
        tnear = np.nanmax(np.minimum(t1, t2), axis=1)
        tfar = np.nanmin(np.maximum(t1, t2), axis=1)
        hit = (tnear <= tfar) & (tfar > RAY_EPS)
        t = np.where(tnear > RAY_EPS, tnear, tfar)
        return np.where(hit, t, np.inf)

    def distance(self, points: np.ndarray) -> np.ndarray:
        lo = self.min_corner - points
        hi = points - self.max_corner
        outside = np.maximum(np.maximum(lo, hi), 0.0)
        d_out = np.linalg.norm(outside, axis=1)
        inside_margin = np.minimum(points - self.min_corner, self.max_corner - points)
        d_in = np.where(np.all(inside_margin > 0, axis=1), inside_margin.min(axis=1), 0.0)
        return d_out + d_in


@dataclass
class BeamModel:
    """Spinning LIDAR sampling pattern: elevation rings by azimuth steps."""

    elevations_deg: np.ndarray
    azimuths_deg: np.ndarray

    @classmethod
    def spinning(
        cls,
        n_rings: int = 64,
        elevation_range_deg: Tuple[float, float] = (-24.8, 2.0),
        azimuth_step_deg: float = 0.2,
    ) -> "BeamModel":
        return cls(
            elevations_deg=np.linspace(elevation_range_deg[0], elevation_range_deg[1], n_rings),
            azimuths_deg=np.arange(0.0, 360.0, azimuth_step_deg),
        )

    def directions(self) -> np.ndarray:
        """Unit ray directions in the vehicle frame (x forward, z up)."""
        el = np.radians(self.elevations_deg)
        az = np.radians(self.azimuths_deg)
        el_g, az_g = np.meshgrid(el, az, indexing="ij")
        ce = np.cos(el_g).ravel()
        return np.column_stack(
            [ce * np.cos(az_g).ravel(), ce * np.sin(az_g).ravel(), np.sin(el_g.ravel())]
        )


def forward_camera(
    image_width: int = 256,
    image_height: int = 160,
    focal: float = 200.0,
    offset: Tuple[float, float, float] = (0.0, 0.0, 0.0),
) -> CameraModel:
    """Forward-looking camera: vehicle x becomes optical axis z. `offset` is
    the camera center expressed in the vehicle frame."""
    K = np.array(
        [
            [focal, 0.0, image_width / 2.0],
            [0.0, focal, image_height / 2.0],
            [0.0, 0.0, 1.0],
        ]
    )
    # camera axes in vehicle coordinates: x_cam = -y_v, y_cam = -z_v, z_cam = x_v
    R = np.array([[0.0, -1.0, 0.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0]])
    t = -R @ np.asarray(offset, dtype=np.float64)
    return CameraModel(K, RigidTransform(R, t), image_width, image_height)


@dataclass
class SyntheticScene:
    """Scene geometry, sensor rig, and trajectory for synthetic frames."""

    primitives: List
    trajectory: List[RigidTransform]
    camera: CameraModel
    beams: BeamModel
    background: Tuple[int, int, int] = (0, 0, 0)
    name: str = "scene"

    def cast(self, origins: np.ndarray, dirs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Nearest intersection along each ray: (t, primitive index); misses
        get t = inf and index -1."""
        ts = np.stack([prim.intersect(origins, dirs) for prim in self.primitives])
        prim_idx = np.argmin(ts, axis=0)
        t = ts[prim_idx, np.arange(ts.shape[1])]
        prim_idx = np.where(np.isfinite(t), prim_idx, -1)
        return t, prim_idx

    def colors_of(self, prim_idx: np.ndarray) -> np.ndarray:
        palette = np.array([p.color for p in self.primitives], dtype=np.uint8)
        out = np.zeros((len(prim_idx), 3), dtype=np.uint8)
        hit = prim_idx >= 0
        out[hit] = palette[prim_idx[hit]]
        out[~hit] = self.background
        return out

    def surface_distance(self, points_local: np.ndarray) -> np.ndarray:
        """Exact distance from each point to the nearest primitive surface."""
        d = np.stack([prim.distance(points_local) for prim in self.primitives])
        return d.min(axis=0)

    def nearest_primitive(self, points_local: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(distance, primitive index) of the closest surface per point."""
        d = np.stack([prim.distance(points_local) for prim in self.primitives])
        idx = np.argmin(d, axis=0)
        return d[idx, np.arange(d.shape[1])], idx


@dataclass
class FrameGroundTruth:
    """Exact per-point truth for one rendered frame."""

    points_local: np.ndarray
    colors: np.ndarray
    visible_from_camera: np.ndarray
    primitive_index: np.ndarray
    true_pose: RigidTransform


def render_image(scene: SyntheticScene, pose: RigidTransform) -> np.ndarray:
    """Pinhole render of the camera view from a vehicle pose (local frame)."""
    cam = scene.camera
    W, H = cam.image_width, cam.image_height
    us, vs = np.meshgrid(np.arange(W) + 0.5, np.arange(H) + 0.5)
    Kinv = np.linalg.inv(cam.intrinsics)
    pix = np.column_stack([us.ravel(), vs.ravel(), np.ones(W * H)])
    dirs_cam = pix @ Kinv.T
    cam_to_vehicle = cam.extrinsics.inverse()
    dirs_vehicle = dirs_cam @ cam_to_vehicle.rotation.T
    dirs_local = dirs_vehicle @ pose.rotation.T
    dirs_local /= np.linalg.norm(dirs_local, axis=1, keepdims=True)
    origin_local = pose.apply(cam.origin_in_source_frame())
    origins = np.broadcast_to(origin_local, dirs_local.shape)
    _, prim_idx = scene.cast(origins, dirs_local)
    return scene.colors_of(prim_idx).reshape(H, W, 3)


def render_synthetic_frame(
    scene: SyntheticScene,
    pose_index: int,
    raw_pose: Optional[RigidTransform] = None,
    frame_id: Optional[int] = None,
):
    """One synthetic frame plus exact ground truth.

    The scan comes from exact ray-primitive intersection along the beam model;
    `raw_pose` (defaulting to the true pose) stands in for noisy navigation.
    Returns (FrameBundle, FrameGroundTruth).
    """
    from fovmap.frames import FrameBundle

    pose = scene.trajectory[pose_index]
    dirs_vehicle = scene.beams.directions()
    dirs_local = dirs_vehicle @ pose.rotation.T
    origins = np.broadcast_to(pose.translation, dirs_local.shape)
    t, prim_idx = scene.cast(origins, dirs_local)
    hit = np.isfinite(t)
    points_local = origins[hit] + t[hit, None] * dirs_local[hit]
    prim_idx = prim_idx[hit]
    colors = scene.colors_of(prim_idx)

    cam_origin_local = pose.apply(scene.camera.origin_in_source_frame())
    to_pts = points_local - cam_origin_local
    dist = np.linalg.norm(to_pts, axis=1)
    safe = np.maximum(dist, 1e-12)
    vdirs = to_pts / safe[:, None]
    vt, vprim = scene.cast(np.broadcast_to(cam_origin_local, vdirs.shape), vdirs)
    visible = (vprim == prim_idx) & (np.abs(vt - dist) <= 1e-9 * (1.0 + dist))

    scan_vehicle = pose.inverse().apply(points_local)
    image = render_image(scene, pose)
    bundle = FrameBundle(
        scan=PointCloud(scan_vehicle, Frame.VEHICLE),
        image=image,
        raw_pose=pose if raw_pose is None else raw_pose,
        cam=scene.camera,
        timestamp=float(pose_index) * 0.1,
        frame_id=pose_index if frame_id is None else frame_id,
    )
    gt = FrameGroundTruth(
        points_local=points_local,
        colors=colors,
        visible_from_camera=visible,
        primitive_index=prim_idx,
        true_pose=pose,
    )
    return bundle, gt


def straight_trajectory(n_frames: int, step: float = 0.5) -> List[RigidTransform]:
    return [
        RigidTransform(np.eye(3), np.array([i * step, 0.0, 0.0])) for i in range(n_frames)
    ]


def noisy_raw_poses(
    trajectory: Sequence[RigidTransform],
    sigma_t: float = 0.02,
    sigma_r: float = 0.002,
    seed: int = 0,
) -> List[RigidTransform]:
    """Simulated navigation poses: the true trajectory with additive noise.
    The first pose is kept exact so the local frame anchor is shared."""
    rng = np.random.default_rng(seed)
    out = [trajectory[0]]
    for pose in trajectory[1:]:
        dt = rng.normal(0.0, sigma_t, 3)
        dr = rng.normal(0.0, sigma_r, 3)
        noise = RigidTransform.from_rotvec(dr, dt)
        out.append(noise.compose(pose))
    return out


def _striped_wall(
    x0: float,
    x1: float,
    y: float,
    z0: float,
    z1: float,
    stripe: float,
    palette: Sequence[Tuple[int, int, int]],
    facing: float,
) -> List[Rectangle]:
    """Vertical wall in the x-z plane at fixed y, split into colored stripes."""
    walls = []
    n = max(1, int(math.ceil((x1 - x0) / stripe)))
    for i in range(n):
        a = x0 + i * stripe
        b = min(x0 + (i + 1) * stripe, x1)
        walls.append(
            Rectangle(
                center=np.array([(a + b) / 2.0, y, (z0 + z1) / 2.0]),
                u_axis=np.array([facing, 0.0, 0.0]),
                v_axis=np.array([0.0, 0.0, 1.0]),
                half_u=(b - a) / 2.0,
                half_v=(z1 - z0) / 2.0,
                color=palette[i % len(palette)],
            )
        )
    return walls


PALETTE = [
    (200, 60, 40),
    (60, 180, 75),
    (0, 120, 200),
    (230, 200, 40),
    (150, 80, 180),
    (240, 130, 30),
]


def make_corridor_scene(
    n_frames: int = 20,
    step: float = 0.5,
    width: float = 7.0,
    beams: Optional[BeamModel] = None,
    camera: Optional[CameraModel] = None,
) -> SyntheticScene:
    """Straight corridor with striped walls, a ground plane, and wall-side
    pillars that pin the along-track direction for scan matching."""
    length = n_frames * step + 20.0
    prims: List = []
    prims += _striped_wall(-5.0, length, width / 2.0, -1.6, 2.5, 2.0, PALETTE, -1.0)
    prims += _striped_wall(-5.0, length, -width / 2.0, -1.6, 2.5, 2.0, PALETTE[::-1], 1.0)
    prims.append(
        Rectangle(
            center=np.array([length / 2.0 - 2.5, 0.0, -1.6]),
            u_axis=np.array([1.0, 0.0, 0.0]),
            v_axis=np.array([0.0, 1.0, 0.0]),
            half_u=length / 2.0 + 3.0,
            half_v=width / 2.0,
            color=(120, 120, 120),
        )
    )
    x = 2.0
    side = 1.0
    i = 0
    while x < length - 2.0:
        y = side * (width / 2.0 - 0.6)
        prims.append(
            Box(
                min_corner=np.array([x - 0.3, y - 0.35, -1.6]),
                max_corner=np.array([x + 0.3, y + 0.35, 1.8]),
                color=PALETTE[(i + 3) % len(PALETTE)],
            )
        )
        side = -side
        x += 4.0
        i += 1
    return SyntheticScene(
        primitives=prims,
        trajectory=straight_trajectory(n_frames, step),
        camera=camera or forward_camera(),
        beams=beams or BeamModel.spinning(n_rings=48, azimuth_step_deg=0.5),
        name="corridor",
    )


def make_occlusion_scene(
    n_frames: int = 8,
    step: float = 0.4,
    camera_offset_y: float = 0.8,
    beams: Optional[BeamModel] = None,
) -> SyntheticScene:
    """Dark box straight ahead of a bright striped wall, camera mounted well to
    the side of the LIDAR: a band of wall points stays LIDAR-visible while the
    camera sees only the box, so direct projection texturing paints them with
    box pixels. Both box and wall remain inside the white zone over the whole
    trajectory."""
    wall_x = 12.0
    prims: List = []
    # wall facing -x, striped along y
    stripe = 1.2
    y0, y1 = -6.0, 8.0
    n = int(math.ceil((y1 - y0) / stripe))
    for i in range(n):
        a = y0 + i * stripe
        b = min(y0 + (i + 1) * stripe, y1)
        prims.append(
            Rectangle(
                center=np.array([wall_x, (a + b) / 2.0, 0.5]),
                u_axis=np.array([0.0, 1.0, 0.0]),
                v_axis=np.array([0.0, 0.0, 1.0]),
                half_u=(b - a) / 2.0,
                half_v=2.3,
                color=PALETTE[i % len(PALETTE)],
            )
        )
    prims.append(
        Rectangle(
            center=np.array([8.0, 1.0, -1.8]),
            u_axis=np.array([1.0, 0.0, 0.0]),
            v_axis=np.array([0.0, 1.0, 0.0]),
            half_u=14.0,
            half_v=9.0,
            color=(110, 110, 110),
        )
    )
    prims.append(
        Box(
            min_corner=np.array([7.0, -1.6, -1.8]),
            max_corner=np.array([8.5, 0.6, 1.5]),
            color=(12, 12, 12),
        )
    )
    return SyntheticScene(
        primitives=prims,
        trajectory=straight_trajectory(n_frames, step),
        camera=forward_camera(offset=(0.0, camera_offset_y, 0.0)),
        beams=beams or BeamModel.spinning(n_rings=48, azimuth_step_deg=0.4),
        name="occlusion",
    )


def make_box_scene(
    seed: int = 0,
    n_boxes: int = 4,
    n_frames: int = 2,
    step: float = 0.5,
    n_rings: int = 16,
) -> SyntheticScene:
    """Random boxes ahead of the sensor, sampled sparsely; used for
    registration stress tests with few elevation rings."""
    rng = np.random.default_rng(seed)
    prims: List = [
        Rectangle(
            center=np.array([12.0, 0.0, -1.7]),
            u_axis=np.array([1.0, 0.0, 0.0]),
            v_axis=np.array([0.0, 1.0, 0.0]),
            half_u=18.0,
            half_v=12.0,
            color=(100, 100, 100),
        )
    ]
    for i in range(n_boxes):
        cx = rng.uniform(5.0, 14.0)
        cy = rng.uniform(-5.0, 5.0)
        sx = rng.uniform(0.6, 1.8)
        sy = rng.uniform(0.6, 1.8)
        sz = rng.uniform(1.0, 2.6)
        prims.append(
            Box(
                min_corner=np.array([cx - sx, cy - sy, -1.7]),
                max_corner=np.array([cx + sx, cy + sy, -1.7 + sz]),
                color=PALETTE[i % len(PALETTE)],
            )
        )
    return SyntheticScene(
        primitives=prims,
        trajectory=straight_trajectory(n_frames, step),
        camera=forward_camera(),
        beams=BeamModel.spinning(n_rings=n_rings, elevation_range_deg=(-15.0, 1.0), azimuth_step_deg=0.4),
        name=f"boxes-{seed}",
    )


def scene_to_document(scene: SyntheticScene) -> dict:
    """Structured key-value description of a scene (JSON-serializable)."""
    prims = []
    for p in scene.primitives:
        if isinstance(p, Rectangle):
            prims.append(
                {
                    "kind": "rectangle",
                    "center": p.center.tolist(),
                    "u_axis": p.u_axis.tolist(),
                    "v_axis": p.v_axis.tolist(),
                    "half_u": p.half_u,
                    "half_v": p.half_v,
                    "color": list(p.color),
                }
            )
        elif isinstance(p, Box):
            prims.append(
                {
                    "kind": "box",
                    "min_corner": p.min_corner.tolist(),
                    "max_corner": p.max_corner.tolist(),
                    "color": list(p.color),
                }
            )
        else:
            raise ValueError(f"unknown primitive {type(p)}")
    cam = scene.camera
    return {
        "name": scene.name,
        "background": list(scene.background),
        "primitives": prims,
        "camera": {
            "intrinsics": cam.intrinsics.tolist(),
            "rotation": cam.extrinsics.rotation.tolist(),
            "translation": cam.extrinsics.translation.tolist(),
            "width": cam.image_width,
            "height": cam.image_height,
        },
        "beams": {
            "elevations_deg": scene.beams.elevations_deg.tolist(),
            "azimuths_deg": scene.beams.azimuths_deg.tolist(),
        },
        "trajectory": [
            {"rotation": p.rotation.tolist(), "translation": p.translation.tolist()}
            for p in scene.trajectory
        ],
    }


def scene_from_document(doc: dict) -> SyntheticScene:
    prims: List = []
    for p in doc["primitives"]:
        if p["kind"] == "rectangle":
            prims.append(
                Rectangle(
                    center=np.array(p["center"]),
                    u_axis=np.array(p["u_axis"]),
                    v_axis=np.array(p["v_axis"]),
                    half_u=float(p["half_u"]),
                    half_v=float(p["half_v"]),
                    color=tuple(p["color"]),
                )
            )
        elif p["kind"] == "box":
            prims.append(
                Box(
                    min_corner=np.array(p["min_corner"]),
                    max_corner=np.array(p["max_corner"]),
                    color=tuple(p["color"]),
                )
            )
        else:
            raise ValueError(f"unknown primitive kind {p['kind']!r}")
    cam_doc = doc["camera"]
    camera = CameraModel(
        np.array(cam_doc["intrinsics"]),
        RigidTransform(np.array(cam_doc["rotation"]), np.array(cam_doc["translation"])),
        int(cam_doc["width"]),
        int(cam_doc["height"]),
    )
    beams = BeamModel(
        elevations_deg=np.array(doc["beams"]["elevations_deg"]),
        azimuths_deg=np.array(doc["beams"]["azimuths_deg"]),
    )
    trajectory = [
        RigidTransform(np.array(p["rotation"]), np.array(p["translation"]))
        for p in doc["trajectory"]
    ]
    return SyntheticScene(
        primitives=prims,
        trajectory=trajectory,
        camera=camera,
        beams=beams,
        background=tuple(doc.get("background", (0, 0, 0))),
        name=doc.get("name", "scene"),
    )


BUILTIN_SCENES = {
    "corridor": make_corridor_scene,
    "occlusion": make_occlusion_scene,
    "boxes": make_box_scene,
}


def make_scene(name: str, **kwargs) -> SyntheticScene:
    if name not in BUILTIN_SCENES:
        raise ValueError(f"unknown scene {name!r}; available: {sorted(BUILTIN_SCENES)}")
    return BUILTIN_SCENES[name](**kwargs)
