"""Map quality metrics: geometric map error, texture error, and their combined
mean texture mapping error, evaluated over raw scan points against their
nearest neighbors in the accumulated map.

For each ground-truth point the nearest map point is found; the map error is
the population mean/std of the 3D distances, the texture error the population
mean/std of the color distances, and the combined metric the mean of the
per-point products of the two distances.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from fovmap.geometry import PointCloud, RigidTransform, project_points
from fovmap.mapping import TexturedMap

logger = logging.getLogger(__name__)


@dataclass
class MetricReport:
    """mu_me/sigma_me in meters; mu_te/sigma_te in RGB distance units
    (range 0..255*sqrt(3)); mtme in meters times RGB units."""

    mu_me: float
    sigma_me: float
    mu_te: float
    sigma_te: float
    mtme: float
    n_scans: int
    n_points: int
    skipped_frames: int = 0

    def to_dict(self) -> dict:
        return {
            "mu_me_m": self.mu_me,
            "sigma_me_m": self.sigma_me,
            "mu_te": self.mu_te,
            "sigma_te": self.sigma_te,
            "mtme": self.mtme,
            "n_scans": self.n_scans,
            "n_points": self.n_points,
            "skipped_frames": self.skipped_frames,
        }

    def to_text(self) -> str:
        return "\n".join(f"{k}: {v}" for k, v in self.to_dict().items()) + "\n"

    def to_json_line(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True) + "\n"

    def write(self, path: str) -> None:
        """Write the text record to `path` and a JSON line to `path`.jsonl."""
        with open(path, "w") as fh:
            fh.write(self.to_text())
        with open(str(path) + ".jsonl", "a") as fh:
            fh.write(self.to_json_line())


@dataclass
class GroundTruthFrame:
    """One frame's raw-scan ground truth (vehicle frame) plus its map pose.

    `keep_mask` optionally drops points from evaluation (e.g. manually tagged
    moving objects); True entries are kept.
    """

    cloud: PointCloud
    pose: Optional[RigidTransform]
    frame_id: int = -1
    keep_mask: Optional[np.ndarray] = None


def generate_texture_ground_truth(bundle) -> PointCloud:
    """Raw scan points that project into the image, colored by their pixel.

    No densification is applied; out-of-view points are excluded.
    """
    proj = project_points(bundle.scan.xyz, bundle.cam)
    m = proj.in_image
    colors = bundle.image[proj.row[m], proj.col[m]]
    return PointCloud(
        bundle.scan.xyz[m],
        bundle.scan.frame,
        None if bundle.scan.intensity is None else bundle.scan.intensity[m],
        colors,
    )


def _color_distance(gt: PointCloud, gt_sel: np.ndarray, map_colors: np.ndarray) -> np.ndarray:
    if gt.colors is not None:
        return np.linalg.norm(
            gt.colors[gt_sel].astype(np.float64) - map_colors.astype(np.float64), axis=1
        )
    if gt.intensity is not None:
        map_int = map_colors.astype(np.float64).mean(axis=1) / 255.0
        return np.abs(gt.intensity[gt_sel] - map_int) * 255.0
    raise ValueError("ground-truth cloud carries neither color nor intensity")


def evaluate(tmap: TexturedMap, gt_frames: Sequence[GroundTruthFrame]) -> MetricReport:
    """Metrics of a map against per-frame ground-truth clouds.

    Frames without a pose are skipped with a warning, never silently.
    """
    if tmap.is_empty:
        raise ValueError("cannot evaluate an empty map")
    index = tmap.index()

    pos_err = []
    col_err = []
    n_scans = 0
    skipped = 0
    for gt in gt_frames:
        if gt.pose is None:
            skipped += 1
            logger.warning("skipping ground-truth frame %d: no pose available", gt.frame_id)
            continue
        cloud = gt.cloud
        if gt.keep_mask is not None:
            if len(gt.keep_mask) != len(cloud):
                raise ValueError("keep_mask length must match the ground-truth cloud")
            cloud = cloud.select(np.asarray(gt.keep_mask, dtype=bool))
        if cloud.is_empty:
            n_scans += 1
            continue
        pts_local = gt.pose.apply(cloud.xyz)
        nn_idx, nn_dist = index.nearest_many(pts_local)
        pos_err.append(nn_dist)
        col_err.append(_color_distance(cloud, slice(None), tmap.colors[nn_idx]))
        n_scans += 1

    if not pos_err:
        return MetricReport(0.0, 0.0, 0.0, 0.0, 0.0, n_scans, 0, skipped)

    dp = np.concatenate(pos_err)
    dc = np.concatenate(col_err)
    n = len(dp)
    mu_me = float(dp.mean())
    sigma_me = float(np.sqrt(np.mean((dp - mu_me) ** 2)))
    mu_te = float(dc.mean())
    sigma_te = float(np.sqrt(np.mean((dc - mu_te) ** 2)))
    mtme = float(np.mean(dp * dc))
    return MetricReport(mu_me, sigma_me, mu_te, sigma_te, mtme, n_scans, n, skipped)
