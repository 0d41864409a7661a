import numpy as np
import pytest

from fovmap.geometry import CameraModel, RigidTransform


def make_camera(width=320, height=240, focal=300.0, extrinsics=None) -> CameraModel:
    K = np.array([[focal, 0.0, width / 2.0], [0.0, focal, height / 2.0], [0.0, 0.0, 1.0]])
    return CameraModel(K, extrinsics or RigidTransform.identity(), width, height)


def forward_vehicle_camera(width=320, height=240, focal=300.0, offset=(0.0, 0.0, 0.0)):
    """Camera whose optical axis is the vehicle +x axis."""
    from fovmap.synthetic import forward_camera

    return forward_camera(width, height, focal, offset)


def random_rotation(rng) -> np.ndarray:
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = rng.uniform(0.0, np.pi)
    return RigidTransform.from_rotvec(axis * angle).rotation


def random_transform(rng, t_scale=5.0) -> RigidTransform:
    return RigidTransform(random_rotation(rng), rng.uniform(-t_scale, t_scale, 3))


def structured_scene_points(n, rng, extent=10.0):
    """Points sampled over orthogonal planes and two boxes; rich in 3D
    structure so every ICP variant is fully constrained."""
    quota = [n // 4, n // 4, n // 4, n - 3 * (n // 4)]
    parts = []
    # floor
    pts = np.column_stack(
        [rng.uniform(0, extent, quota[0]), rng.uniform(-extent / 2, extent / 2, quota[0]), np.zeros(quota[0])]
    )
    parts.append(pts)
    # two walls
    pts = np.column_stack(
        [rng.uniform(0, extent, quota[1]), np.full(quota[1], -extent / 2), rng.uniform(0, 3.0, quota[1])]
    )
    parts.append(pts)
    pts = np.column_stack(
        [np.full(quota[2], extent), rng.uniform(-extent / 2, extent / 2, quota[2]), rng.uniform(0, 3.0, quota[2])]
    )
    parts.append(pts)
    # box surfaces
    m = quota[3]
    face = rng.integers(0, 3, m)
    box = np.column_stack(
        [rng.uniform(3, 5, m), rng.uniform(-1, 1, m), rng.uniform(0, 1.5, m)]
    )
    box[face == 0, 0] = 3.0
    box[face == 1, 1] = -1.0
    box[face == 2, 2] = 1.5
    parts.append(box)
    return np.vstack(parts)


@pytest.fixture
def rng():
    return np.random.default_rng(20240813)
