"""Incremental LIDAR-camera fusion into dense textured 3D point-cloud maps."""

from fovmap.config import PipelineConfig, config_from_flat, get_preset, load_config_file
from fovmap.foveal import FovealConfig, extract_foveal, in_foveal_region
from fovmap.frames import FrameBundle
from fovmap.geometry import (
    CameraModel,
    Frame,
    PointCloud,
    RigidTransform,
    concat_clouds,
    project_point,
    project_points,
    transform_cloud,
)
from fovmap.ground import GroundSplit, split_ground
from fovmap.mapping import TexturedMap
from fovmap.metrics import MetricReport, evaluate, generate_texture_ground_truth
from fovmap.pipeline import PipelineState, process_frame, run_sequence
from fovmap.rayfilter import RayFilterConfig, build_ray_buffer, filter_texture_accumulate
from fovmap.registration import IcpConfig, IcpVariant, align, refine_pose
from fovmap.spatial import SpatialIndex, nearest_neighbor
from fovmap.upsample import UpsampleConfig, upsample

__version__ = "0.1.0"

__all__ = [
    "CameraModel",
    "FovealConfig",
    "Frame",
    "FrameBundle",
    "GroundSplit",
    "IcpConfig",
    "IcpVariant",
    "MetricReport",
    "PipelineConfig",
    "PipelineState",
    "PointCloud",
    "RayFilterConfig",
    "RigidTransform",
    "SpatialIndex",
    "TexturedMap",
    "UpsampleConfig",
    "align",
    "build_ray_buffer",
    "concat_clouds",
    "config_from_flat",
    "evaluate",
    "extract_foveal",
    "filter_texture_accumulate",
    "generate_texture_ground_truth",
    "get_preset",
    "in_foveal_region",
    "load_config_file",
    "nearest_neighbor",
    "process_frame",
    "project_point",
    "project_points",
    "refine_pose",
    "run_sequence",
    "split_ground",
    "transform_cloud",
    "upsample",
    "__version__",
]
