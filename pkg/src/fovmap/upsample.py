"""Point-cloud densification by Delaunay triangulation of image projections.

Per pass: triangulate the projected points in pixel space, lift each pixel
triangle to its 3D counterpart, and insert the 3D centroid of every triangle
whose three 3D edges are all shorter than the edge threshold. The number of
passes equals the configured rate; each pass works from the triangle set
frozen at its start, so results are deterministic.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial import Delaunay, QhullError

from fovmap.geometry import CameraModel, PointCloud, project_points

logger = logging.getLogger(__name__)

DEFAULT_EDGE_THRESHOLD = 0.3


@dataclass(frozen=True)
class UpsampleConfig:
    """rate: insertion passes; edge_threshold_tau: max 3D edge length (m) for a
    triangle to receive a centroid; constrained: callers exclude ground points
    before densifying when set."""

    rate: int = 0
    edge_threshold_tau: float = DEFAULT_EDGE_THRESHOLD
    constrained: bool = False

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError("rate must be >= 0")
        if self.edge_threshold_tau <= 0:
            raise ValueError("edge_threshold_tau must be > 0")


def _qualifying_centroids(xyz: np.ndarray, simplices: np.ndarray, tau: float):
    """3D centroids of triangles whose three 3D edges are all < tau."""
    a = xyz[simplices[:, 0]]
    b = xyz[simplices[:, 1]]
    c = xyz[simplices[:, 2]]
    ok = (
        (np.linalg.norm(a - b, axis=1) < tau)
        & (np.linalg.norm(b - c, axis=1) < tau)
        & (np.linalg.norm(c - a, axis=1) < tau)
    )
    return (a[ok] + b[ok] + c[ok]) / 3.0, simplices[ok]


def upsample(cloud: PointCloud, cam: CameraModel, cfg: UpsampleConfig) -> PointCloud:
    """Densify a cloud expressed in the camera's source frame.

    Points that do not project into the image are passed through to the output
    but excluded from triangulation. Inserted points inherit intensity/color as
    the mean of their triangle's vertices. Output order: input points first,
    then insertions in pass order.
    """
    if cfg.rate == 0 or len(cloud) < 3:
        return cloud

    proj = project_points(cloud.xyz, cam)
    visible = proj.in_image
    if int(visible.sum()) < 3:
        return cloud

    uv = np.column_stack([proj.u[visible], proj.v[visible]])
    xyz = cloud.xyz[visible]
    inten = None if cloud.intensity is None else cloud.intensity[visible]
    colors = None if cloud.colors is None else cloud.colors[visible].astype(np.float64)

    new_xyz = []
    new_inten = []
    new_colors = []
    for _ in range(cfg.rate):
        try:
            tri = Delaunay(uv)
        except QhullError:
            # degenerate (e.g. collinear) projections: nothing to triangulate
            logger.debug("skipping degenerate triangulation pass")
            break
        centroids, kept = _qualifying_centroids(xyz, tri.simplices, cfg.edge_threshold_tau)
        if len(centroids) == 0:
            break
        cproj = project_points(centroids, cam)
        # centroids of in-image triangles project inside them; the mask is a guard
        keep = cproj.in_image
        centroids = centroids[keep]
        kept = kept[keep]
        cuv = np.column_stack([cproj.u[keep], cproj.v[keep]])

        new_xyz.append(centroids)
        uv = np.vstack([uv, cuv])
        xyz = np.vstack([xyz, centroids])
        if inten is not None:
            ci = inten[kept].mean(axis=1)
            new_inten.append(ci)
            inten = np.concatenate([inten, ci])
        if colors is not None:
            cc = colors[kept].mean(axis=1)
            new_colors.append(cc)
            colors = np.vstack([colors, cc])

    if not new_xyz:
        return cloud

    added = np.vstack(new_xyz)
    out_xyz = np.vstack([cloud.xyz, added])
    out_inten = None
    if cloud.intensity is not None:
        out_inten = np.concatenate([cloud.intensity, np.concatenate(new_inten)])
    out_colors = None
    if cloud.colors is not None:
        out_colors = np.vstack(
            [cloud.colors, np.rint(np.vstack(new_colors)).astype(np.uint8)]
        )
    return PointCloud(out_xyz, cloud.frame, out_inten, out_colors)
