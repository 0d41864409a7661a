"""Pairwise scan alignment: Standard, Point-to-Plane, and Generalized ICP,
plus the pose-refinement wrapper that densifies camera-visible non-ground
points before aligning consecutive scans.

All variants share the outer loop: find correspondences from the transformed
source into the target, reject pairs beyond a distance gate, solve for an
incremental update, repeat until the pose delta falls below both convergence
thresholds. Standard ICP solves each step in closed form (SVD); the other two
linearize around the current pose and solve a 6-dof least-squares system.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional

import numpy as np
from scipy.spatial import cKDTree

from fovmap.geometry import CameraModel, PointCloud, RigidTransform, concat_clouds, project_points
from fovmap.ground import DEFAULT_Z_THRESHOLD, split_ground
from fovmap.upsample import UpsampleConfig, upsample

logger = logging.getLogger(__name__)


class IcpVariant(Enum):
    STANDARD = "standard"
    POINT_TO_PLANE = "point_to_plane"
    GENERALIZED = "generalized"


@dataclass(frozen=True)
class IcpConfig:
    variant: IcpVariant = IcpVariant.GENERALIZED
    max_iterations: int = 50
    correspondence_max_distance: float = 1.0
    convergence_translation_eps: float = 1e-4
    convergence_rotation_eps: float = 1e-4
    gicp_covariance_epsilon: float = 1e-3
    normal_estimation_k: int = 20

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if min(
            self.correspondence_max_distance,
            self.convergence_translation_eps,
            self.convergence_rotation_eps,
            self.gicp_covariance_epsilon,
        ) <= 0:
            raise ValueError("distance and convergence thresholds must be > 0")
        if self.normal_estimation_k < 3:
            raise ValueError("normal_estimation_k must be >= 3")


@dataclass
class RegistrationResult:
    """transform maps source points into the target frame."""

    transform: RigidTransform
    converged: bool
    iterations_used: int
    mean_correspondence_error: float
    elapsed: float
    objective_history: List[float] = field(default_factory=list)


def _neighborhoods(xyz: np.ndarray, k: int) -> np.ndarray:
    """(n, k, 3) nearest-neighbor stacks (each point included in its own set)."""
    k = min(k, len(xyz))
    tree = cKDTree(xyz)
    _, idx = tree.query(xyz, k=k)
    if k == 1:
        idx = idx[:, None]
    return xyz[idx]


def estimate_normals(xyz: np.ndarray, k: int = 20) -> np.ndarray:
    """Unit surface normals from local PCA over k neighbors."""
    hoods = _neighborhoods(xyz, k)
    centered = hoods - hoods.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered) / hoods.shape[1]
    _, vecs = np.linalg.eigh(cov)
    normals = vecs[:, :, 0]
    normals = normals / np.linalg.norm(normals, axis=1, keepdims=True)
    return normals


def regularized_covariances(xyz: np.ndarray, k: int = 20, epsilon: float = 1e-3) -> np.ndarray:
    """Per-point surface covariances with eigenvalues replaced by (eps, 1, 1).

    The smallest-eigenvalue direction (the local normal) is flattened to eps,
    so every matrix is symmetric positive definite.
    """
    hoods = _neighborhoods(xyz, k)
    centered = hoods - hoods.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered) / hoods.shape[1]
    _, vecs = np.linalg.eigh(cov)
    scale = np.array([epsilon, 1.0, 1.0])
    return np.einsum("nij,j,nkj->nik", vecs, scale, vecs)


def _cross_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.cross(a, b)


def _solve_standard(p: np.ndarray, q: np.ndarray) -> RigidTransform:
    """Closed-form least-squares rigid alignment of matched pairs (Horn/SVD)."""
    pc = p.mean(axis=0)
    qc = q.mean(axis=0)
    H = (p - pc).T @ (q - qc)
    U, _, Vt = np.linalg.svd(H)
    d = np.sign(np.linalg.det(Vt.T @ U.T))
    D = np.diag([1.0, 1.0, d])
    R = Vt.T @ D @ U.T
    t = qc - R @ pc
    return RigidTransform(R, t)


def _delta_from_vector(delta: np.ndarray) -> RigidTransform:
    return RigidTransform.from_rotvec(delta[:3], delta[3:])


def _solve_point_to_plane(p, q, n) -> np.ndarray:
    """Linearized 6-dof update for point-to-plane residuals n . (q - p)."""
    b = np.einsum("ij,ij->i", q - p, n)
    A = np.hstack([_cross_rows(p, n), n])
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    return sol


def _solve_gicp(p, q, M) -> np.ndarray:
    """Gauss-Newton step for the plane-to-plane Mahalanobis objective.

    Residual r = q - p with information matrix M; jacobian of the moved point
    w.r.t. (rotvec, translation) is J = [-[p]x | I].
    """
    r = q - p
    n = len(p)
    J = np.zeros((n, 3, 6))
    px = p[:, 0]
    py = p[:, 1]
    pz = p[:, 2]
    # rotational block is -[p]x so that J @ (dw, dt) = dw x p + dt
    J[:, 0, 1] = pz
    J[:, 0, 2] = -py
    J[:, 1, 0] = -pz
    J[:, 1, 2] = px
    J[:, 2, 0] = py
    J[:, 2, 1] = -px
    J[:, 0, 3] = 1.0
    J[:, 1, 4] = 1.0
    J[:, 2, 5] = 1.0
    MJ = np.einsum("nij,njk->nik", M, J)
    H = np.einsum("nij,nik->jk", J, MJ)
    g = np.einsum("nij,ni->j", MJ, r)
    return np.linalg.solve(H + 1e-12 * np.eye(6), g)


def _objective(variant, p, q, normals=None, M=None) -> float:
    r = q - p
    if variant is IcpVariant.STANDARD:
        return float(np.mean(np.einsum("ij,ij->i", r, r)))
    if variant is IcpVariant.POINT_TO_PLANE:
        d = np.einsum("ij,ij->i", r, normals)
        return float(np.mean(d * d))
    return float(np.mean(np.einsum("ni,nij,nj->n", r, M, r)))


def align(
    source: PointCloud,
    target: PointCloud,
    initial_guess: RigidTransform,
    cfg: IcpConfig,
) -> RegistrationResult:
    """Align source onto target starting from initial_guess.

    Non-convergence is reported through the `converged` flag, not raised.
    """
    if source.is_empty or target.is_empty:
        raise ValueError("cannot align empty clouds")

    t_start = time.perf_counter()
    src = source.xyz
    tgt = target.xyz
    tree = cKDTree(tgt)

    normals = None
    cov_src = None
    cov_tgt = None
    if cfg.variant is IcpVariant.POINT_TO_PLANE:
        normals = estimate_normals(tgt, cfg.normal_estimation_k)
    elif cfg.variant is IcpVariant.GENERALIZED:
        cov_src = regularized_covariances(src, cfg.normal_estimation_k, cfg.gicp_covariance_epsilon)
        cov_tgt = regularized_covariances(tgt, cfg.normal_estimation_k, cfg.gicp_covariance_epsilon)

    T = initial_guess
    converged = False
    iterations = 0
    history: List[float] = []

    for it in range(cfg.max_iterations):
        iterations = it + 1
        moved = T.apply(src)
        dist, idx = tree.query(moved)
        inlier = dist <= cfg.correspondence_max_distance
        if not np.any(inlier):
            logger.warning("registration lost all correspondences at iteration %d", iterations)
            break
        p = moved[inlier]
        q = tgt[idx[inlier]]

        if cfg.variant is IcpVariant.STANDARD:
            if not history:
                history.append(_objective(cfg.variant, p, q))
            delta = _solve_standard(p, q)
            T_new = delta.compose(T)
            obj = _objective(cfg.variant, delta.apply(p), q)
        else:
            if cfg.variant is IcpVariant.POINT_TO_PLANE:
                n = normals[idx[inlier]]
                kwargs = {"normals": n}
                vec = _solve_point_to_plane(p, q, n)
            else:
                R = T.rotation
                M = np.linalg.inv(cov_tgt[idx[inlier]] + np.einsum("ij,njk,lk->nil", R, cov_src[inlier], R))
                kwargs = {"M": M}
                vec = _solve_gicp(p, q, M)
            prev = _objective(cfg.variant, p, q, **kwargs)
            if not history:
                history.append(prev)
            # step halving keeps each update non-increasing on its own matches
            for _ in range(12):
                delta = _delta_from_vector(vec)
                obj = _objective(cfg.variant, delta.apply(p), q, **kwargs)
                if obj <= prev * (1.0 + 1e-12) + 1e-18:
                    break
                vec = vec / 2.0
            T_new = delta.compose(T)

        history.append(obj)
        T = T_new
        if (
            np.linalg.norm(delta.translation) < cfg.convergence_translation_eps
            and delta.rotation_angle() < cfg.convergence_rotation_eps
        ):
            converged = True
            break

    moved = T.apply(src)
    dist, _ = tree.query(moved)
    inlier = dist <= cfg.correspondence_max_distance
    mean_err = float(dist[inlier].mean()) if np.any(inlier) else float("inf")

    return RegistrationResult(
        transform=T,
        converged=converged,
        iterations_used=iterations,
        mean_correspondence_error=mean_err,
        elapsed=time.perf_counter() - t_start,
        objective_history=history,
    )


def prepare_scan_for_alignment(
    scan: PointCloud,
    cam: CameraModel,
    up: UpsampleConfig,
    z_threshold: float = DEFAULT_Z_THRESHOLD,
) -> PointCloud:
    """Alignment-side view of a scan: camera-visible (non-ground) points are
    densified; ground points are merged back untouched when the config is
    constrained. Points outside the camera view are not aligned against."""
    if up.constrained:
        split = split_ground(scan, z_threshold)
        candidate, ground = split.non_ground, split.ground
    else:
        candidate, ground = scan, None

    vis = project_points(candidate.xyz, cam).in_image
    visible = candidate.select(vis)
    dense = upsample(visible, cam, up)
    if ground is not None and not ground.is_empty:
        return concat_clouds([dense, ground])
    return dense


def refine_pose(
    source,
    target,
    cfg: IcpConfig,
    up: UpsampleConfig,
    z_threshold: float = DEFAULT_Z_THRESHOLD,
    prepared_target: Optional[PointCloud] = None,
) -> RegistrationResult:
    """Constrained-upsampling pose refinement between two frame bundles.

    Scans are densified via `prepare_scan_for_alignment` and aligned with the
    relative raw pose as initial guess. `prepared_target` lets callers reuse
    the target-side preparation across consecutive frames.
    """
    prepared_source = prepare_scan_for_alignment(source.scan, source.cam, up, z_threshold)
    if prepared_target is None:
        prepared_target = prepare_scan_for_alignment(target.scan, target.cam, up, z_threshold)
    guess = target.raw_pose.inverse().compose(source.raw_pose)
    return align(prepared_source, prepared_target, guess, cfg)
