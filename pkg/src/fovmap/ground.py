"""Ground / non-ground partition of a vehicle-frame scan by z threshold."""

from __future__ import annotations

from dataclasses import dataclass

from fovmap.geometry import PointCloud

DEFAULT_Z_THRESHOLD = -1.55


@dataclass(frozen=True)
class GroundSplit:
    """Exact partition of a scan: ground has z < z_threshold, non-ground z >= it."""

    ground: PointCloud
    non_ground: PointCloud
    z_threshold: float


def split_ground(scan: PointCloud, z_threshold: float = DEFAULT_Z_THRESHOLD) -> GroundSplit:
    """Partition a scan by z. Ordering within each subset preserves input order;
    empty subsets are legal."""
    mask = scan.xyz[:, 2] < z_threshold
    return GroundSplit(
        ground=scan.select(mask),
        non_ground=scan.select(~mask),
        z_threshold=float(z_threshold),
    )
