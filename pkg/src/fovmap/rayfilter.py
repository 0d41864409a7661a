"""Occlusion-aware texture transfer: per-pixel shortest-ray conflict test,
windowed statistical depth-outlier test, color assignment, map accumulation.

Every candidate point (new scan and foveal map alike) casts a ray to the
camera; rays landing on a common pixel compete and the shortest wins. A new
scan point that wins a pixel also hit by a map ray would hide existing map
content and is discarded as occluding. Surviving scan points are tested
against the ray-length statistics of their pixel neighborhood and discarded
as occluded when they sit more than `c` standard deviations behind it.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from fovmap.foveal import FovealConfig, extract_foveal
from fovmap.geometry import CameraModel, PointCloud, RigidTransform, transform_cloud
from fovmap.mapping import TexturedMap

TIE_EPS = 1e-9
SIGMA_DEGENERATE = 1e-9

ORIGIN_NONE = -1
ORIGIN_MAP = 0
ORIGIN_SCAN = 1


class Verdict(IntEnum):
    VISIBLE = 0
    OCCLUDING = 1
    OCCLUDED = 2


@dataclass(frozen=True)
class RayFilterConfig:
    """window_size: odd M of the MxM statistics window (pixels);
    outlier_rate: c, lower values reject more points as occluded."""

    window_size: int = 5
    outlier_rate: float = 1.0

    def __post_init__(self):
        if self.window_size < 1 or self.window_size % 2 == 0:
            raise ValueError("window_size must be odd and >= 1")
        if self.outlier_rate <= 0:
            raise ValueError("outlier_rate must be > 0")


@dataclass
class RayBuffer:
    """Per-pixel winning rays.

    depth:   (H, W) winning ray length, +inf where no ray landed
    origin:  (H, W) ORIGIN_MAP / ORIGIN_SCAN / ORIGIN_NONE
    index:   (H, W) winner's index into its source cloud, -1 where empty
    has_map_ray: (H, W) True where at least one map ray landed
    """

    depth: np.ndarray
    origin: np.ndarray
    index: np.ndarray
    has_map_ray: np.ndarray

    @property
    def height(self) -> int:
        return self.depth.shape[0]

    @property
    def width(self) -> int:
        return self.depth.shape[1]


def build_ray_buffer(
    scan_pts: PointCloud, map_foveal_pts: PointCloud, cam: CameraModel
) -> RayBuffer:
    """Rasterize scan and map rays; per pixel the minimal ray length wins.

    Rays within TIE_EPS of the pixel minimum count as tied; ties resolve to
    map points first, then to the lower point index.
    """
    from fovmap.geometry import project_points

    H, W = cam.image_height, cam.image_width
    depth = np.full((H, W), np.inf)
    origin = np.full((H, W), ORIGIN_NONE, dtype=np.int8)
    index = np.full((H, W), -1, dtype=np.int64)
    has_map = np.zeros((H, W), dtype=bool)

    parts = []
    for origin_code, cloud in ((ORIGIN_MAP, map_foveal_pts), (ORIGIN_SCAN, scan_pts)):
        if cloud.is_empty:
            continue
        proj = project_points(cloud.xyz, cam)
        m = proj.in_image
        flat = proj.row[m] * W + proj.col[m]
        if origin_code == ORIGIN_MAP:
            has_map.reshape(-1)[flat] = True
        idx = np.nonzero(m)[0]
        rank = np.full(len(flat), origin_code, dtype=np.int8)
        parts.append((flat, proj.ray[m], rank, idx))
    if not parts:
        return RayBuffer(depth, origin, index, has_map)

    flat = np.concatenate([p[0] for p in parts])
    d = np.concatenate([p[1] for p in parts])
    rank = np.concatenate([p[2] for p in parts])
    idx = np.concatenate([p[3] for p in parts])

    dmin = np.full(H * W, np.inf)
    np.minimum.at(dmin, flat, d)
    eligible = d <= dmin[flat] + TIE_EPS
    ef, ed, er, ei = flat[eligible], d[eligible], rank[eligible], idx[eligible]
    # group by pixel, then origin (map first), then index; first of each group wins
    order = np.lexsort((ei, er, ef))
    ef, ed, er, ei = ef[order], ed[order], er[order], ei[order]
    first = np.ones(len(ef), dtype=bool)
    first[1:] = ef[1:] != ef[:-1]
    rows, cols = ef[first] // W, ef[first] % W
    depth[rows, cols] = ed[first]
    origin[rows, cols] = er[first]
    index[rows, cols] = ei[first]
    return RayBuffer(depth, origin, index, has_map)


def _duplicate_ray_mask(
    map_pts: PointCloud,
    cam: CameraModel,
    rows: np.ndarray,
    cols: np.ndarray,
    d_t: np.ndarray,
) -> np.ndarray:
    """True where a map ray already lands on the candidate's pixel at the same
    ray length (within TIE_EPS): the candidate duplicates mapped content.

    Ray lengths are quantized at TIE_EPS resolution so the membership test
    vectorizes; exact re-observations always quantize to adjacent cells.
    """
    from fovmap.geometry import project_points

    out = np.zeros(len(rows), dtype=bool)
    if map_pts.is_empty:
        return out
    proj = project_points(map_pts.xyz, cam)
    m = proj.in_image & (proj.ray < float(1 << 40) * TIE_EPS)
    if not np.any(m):
        return out
    W = cam.image_width
    flat = (proj.row[m] * W + proj.col[m]).astype(np.int64)
    q = np.round(proj.ray[m] / TIE_EPS).astype(np.int64)
    keys = np.sort((flat << 41) + q)

    cand_ok = d_t < float(1 << 40) * TIE_EPS
    cand_flat = (rows * W + cols).astype(np.int64)
    cand_q = np.round(d_t / TIE_EPS).astype(np.int64)
    base = (cand_flat << 41) + cand_q
    for offset in (-1, 0, 1):
        pos = np.searchsorted(keys, base + offset)
        hit = (pos < len(keys)) & (keys[np.minimum(pos, len(keys) - 1)] == base + offset)
        out |= hit & cand_ok
    return out


def occluding_test(buffer: RayBuffer, pixel: tuple[int, int], scan_index: int) -> bool:
    """True (discard) iff the scan point wins its pixel while a map ray also
    landed there, i.e. accepting it would hide existing map content."""
    col, row = pixel
    return bool(
        buffer.origin[row, col] == ORIGIN_SCAN
        and buffer.index[row, col] == scan_index
        and buffer.has_map_ray[row, col]
    )


def _window_stats(
    buffer: RayBuffer,
    rows: np.ndarray,
    cols: np.ndarray,
    d_t: np.ndarray,
    is_winner: np.ndarray,
    M: int,
):
    """Mean/deviation of winning ray lengths in the MxM window around each
    candidate, with the candidate's own ray included in the population."""
    H, W = buffer.depth.shape
    half = M // 2
    n = len(rows)
    layers = []
    for dr in range(-half, half + 1):
        for dc in range(-half, half + 1):
            rr = rows + dr
            cc = cols + dc
            ok = (rr >= 0) & (rr < H) & (cc >= 0) & (cc < W)
            vals = np.full(n, np.nan)
            rri = rr[ok]
            cci = cc[ok]
            v = buffer.depth[rri, cci]
            occupied = buffer.origin[rri, cci] != ORIGIN_NONE
            tmp = np.where(occupied, v, np.nan)
            vals[ok] = tmp
            layers.append(vals)
    layers.append(np.where(is_winner, np.nan, d_t))
    stack = np.vstack(layers)
    count = np.sum(~np.isnan(stack), axis=0)
    mu = np.nansum(stack, axis=0) / np.maximum(count, 1)
    var = np.nansum((stack - mu) ** 2, axis=0) / np.maximum(count, 1)
    return mu, np.sqrt(var), count


def occluded_mask(
    buffer: RayBuffer,
    rows: np.ndarray,
    cols: np.ndarray,
    d_t: np.ndarray,
    scan_indices: np.ndarray,
    cfg: RayFilterConfig,
) -> np.ndarray:
    """Statistical outlier verdicts for in-image scan points.

    Degenerate windows (fewer than two rays, or zero spread) are visible.
    """
    is_winner = (buffer.origin[rows, cols] == ORIGIN_SCAN) & (
        buffer.index[rows, cols] == scan_indices
    )
    mu, sigma, count = _window_stats(buffer, rows, cols, d_t, is_winner, cfg.window_size)
    degenerate = (count < 2) | (sigma < SIGMA_DEGENERATE)
    with np.errstate(divide="ignore", invalid="ignore"):
        score = np.abs(d_t - mu) / sigma
    return ~degenerate & (score > cfg.outlier_rate)


def occluded_test(
    buffer: RayBuffer,
    pixel: tuple[int, int],
    ray_length: float,
    cfg: RayFilterConfig,
    scan_index: int = -1,
) -> bool:
    col, row = pixel
    return bool(
        occluded_mask(
            buffer,
            np.array([row]),
            np.array([col]),
            np.array([ray_length]),
            np.array([scan_index]),
            cfg,
        )[0]
    )


def classify_scan_points(
    buffer: RayBuffer,
    rows: np.ndarray,
    cols: np.ndarray,
    d_t: np.ndarray,
    scan_indices: np.ndarray,
    cfg: RayFilterConfig,
) -> np.ndarray:
    """Visible / Occluding / Occluded verdicts for projected scan points."""
    verdicts = np.full(len(rows), Verdict.VISIBLE, dtype=np.int8)
    occluding = (
        (buffer.origin[rows, cols] == ORIGIN_SCAN)
        & (buffer.index[rows, cols] == scan_indices)
        & buffer.has_map_ray[rows, cols]
    )
    verdicts[occluding] = Verdict.OCCLUDING
    rest = ~occluding
    occluded = occluded_mask(
        buffer, rows[rest], cols[rest], d_t[rest], scan_indices[rest], cfg
    )
    rest_idx = np.nonzero(rest)[0]
    verdicts[rest_idx[occluded]] = Verdict.OCCLUDED
    return verdicts


@dataclass
class AccumulationStats:
    n_candidates: int = 0
    n_visible: int = 0
    n_occluding: int = 0
    n_occluded: int = 0
    n_duplicate: int = 0
    n_added: int = 0
    append_seconds: float = 0.0


def filter_texture_accumulate(
    scan: PointCloud,
    tmap: TexturedMap,
    bundle,
    refined_pose: RigidTransform,
    ray_cfg: RayFilterConfig,
    foveal_cfg: FovealConfig,
    enabled: bool = True,
) -> AccumulationStats:
    """Ray-filter a prepared (foveal, densified) vehicle-frame scan against the
    map's foveal content, texture the survivors from the frame image, and
    append them to the map in the local frame.

    Colors are a direct pixel lookup at insertion time and never change
    afterwards. A scan point whose pixel already holds any map ray at the same
    ray length (within TIE_EPS) re-observes mapped content and is skipped.
    With `enabled` False every projectable point is accepted (ablation mode).
    """
    from fovmap.geometry import Frame, project_points

    cam = bundle.cam
    image = bundle.image
    if image.shape[0] != cam.image_height or image.shape[1] != cam.image_width:
        raise ValueError(
            f"image is {image.shape[1]}x{image.shape[0]} but camera expects "
            f"{cam.image_width}x{cam.image_height}"
        )

    stats = AccumulationStats()
    if scan.is_empty:
        return stats

    proj = project_points(scan.xyz, cam)
    cand = proj.in_image
    rows = proj.row[cand]
    cols = proj.col[cand]
    d_t = proj.ray[cand]
    cand_idx = np.nonzero(cand)[0]
    stats.n_candidates = len(cand_idx)
    if stats.n_candidates == 0:
        return stats

    if enabled and not tmap.is_empty:
        map_vehicle = transform_cloud(tmap.cloud, refined_pose.inverse(), Frame.VEHICLE)
        map_foveal = extract_foveal(map_vehicle, cam, foveal_cfg)
    else:
        map_foveal = PointCloud.empty(Frame.VEHICLE)

    if enabled:
        buffer = build_ray_buffer(scan.select(cand_idx), map_foveal, cam)
        local_indices = np.arange(stats.n_candidates, dtype=np.int64)
        verdicts = classify_scan_points(buffer, rows, cols, d_t, local_indices, ray_cfg)
        duplicate = _duplicate_ray_mask(map_foveal, cam, rows, cols, d_t)
        accepted = (verdicts == Verdict.VISIBLE) & ~duplicate
        stats.n_visible = int(np.sum(verdicts == Verdict.VISIBLE))
        stats.n_occluding = int(np.sum(verdicts == Verdict.OCCLUDING))
        stats.n_occluded = int(np.sum(verdicts == Verdict.OCCLUDED))
        stats.n_duplicate = int(np.sum(duplicate & (verdicts == Verdict.VISIBLE)))
    else:
        accepted = np.ones(stats.n_candidates, dtype=bool)
        stats.n_visible = stats.n_candidates

    colors = image[rows[accepted], cols[accepted]]
    pts_local = refined_pose.apply(scan.xyz[cand_idx[accepted]])
    t0 = time.perf_counter()
    tmap.append(pts_local, colors, bundle.frame_id)
    stats.append_seconds = time.perf_counter() - t0
    stats.n_added = int(accepted.sum())
    return stats
