"""Pipeline configuration: one flat dotted-key namespace covering every stage,
plus the E0-E11 experiment presets (three ICP variants crossed with four
upsampling rates).

Config files are JSON objects whose keys are the dotted names below; any key
can be overridden individually.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Dict, Optional

from fovmap.foveal import FovealConfig
from fovmap.ground import DEFAULT_Z_THRESHOLD
from fovmap.rayfilter import RayFilterConfig
from fovmap.registration import IcpConfig, IcpVariant
from fovmap.upsample import UpsampleConfig

_VARIANT_ALIASES = {
    "standard": IcpVariant.STANDARD,
    "std": IcpVariant.STANDARD,
    "std-icp": IcpVariant.STANDARD,
    "point_to_plane": IcpVariant.POINT_TO_PLANE,
    "p2p": IcpVariant.POINT_TO_PLANE,
    "p2p-icp": IcpVariant.POINT_TO_PLANE,
    "generalized": IcpVariant.GENERALIZED,
    "gen": IcpVariant.GENERALIZED,
    "gen-icp": IcpVariant.GENERALIZED,
    "gicp": IcpVariant.GENERALIZED,
}


def parse_variant(name: str) -> IcpVariant:
    key = str(name).strip().lower()
    if key not in _VARIANT_ALIASES:
        raise ValueError(f"unknown ICP variant {name!r}")
    return _VARIANT_ALIASES[key]


@dataclass(frozen=True)
class PipelineConfig:
    """Aggregated per-stage configuration for the incremental pipeline."""

    icp: IcpConfig = field(default_factory=IcpConfig)
    upsample_registration: UpsampleConfig = field(
        default_factory=lambda: UpsampleConfig(rate=0, constrained=True)
    )
    upsample_texture: UpsampleConfig = field(
        default_factory=lambda: UpsampleConfig(rate=0, constrained=False)
    )
    foveal: FovealConfig = field(default_factory=FovealConfig)
    rayfilter: RayFilterConfig = field(default_factory=RayFilterConfig)
    rayfilter_enabled: bool = True
    ground_z_threshold: float = DEFAULT_Z_THRESHOLD
    experiment_label: str = ""

    def to_flat(self) -> Dict[str, Any]:
        return {
            "ground.z_threshold_m": self.ground_z_threshold,
            "upsample.rate": self.upsample_registration.rate,
            "upsample.tau_m": self.upsample_registration.edge_threshold_tau,
            "upsample_texture.rate": self.upsample_texture.rate,
            "upsample_texture.tau_m": self.upsample_texture.edge_threshold_tau,
            "icp.variant": self.icp.variant.value,
            "icp.max_iter": self.icp.max_iterations,
            "icp.max_corr_dist_m": self.icp.correspondence_max_distance,
            "icp.eps_t_m": self.icp.convergence_translation_eps,
            "icp.eps_r_rad": self.icp.convergence_rotation_eps,
            "icp.gicp_epsilon": self.icp.gicp_covariance_epsilon,
            "icp.normal_k": self.icp.normal_estimation_k,
            "foveal.near_m": self.foveal.near_blind_radius,
            "foveal.far_m": self.foveal.white_zone_outer_radius,
            "foveal.h_half_angle_deg": math.degrees(self.foveal.horizontal_slice_half_angle),
            "foveal.v_half_angle_deg": math.degrees(self.foveal.vertical_slice_half_angle),
            "rayfilter.window_M": self.rayfilter.window_size,
            "rayfilter.c": self.rayfilter.outlier_rate,
            "rayfilter.enabled": self.rayfilter_enabled,
            "experiment.label": self.experiment_label,
        }


def config_from_flat(flat: Dict[str, Any], base: Optional[PipelineConfig] = None) -> PipelineConfig:
    """Build a PipelineConfig from flat dotted keys, overriding `base`."""
    merged = (base or PipelineConfig()).to_flat()
    unknown = set(flat) - set(merged)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    merged.update(flat)
    icp = IcpConfig(
        variant=parse_variant(merged["icp.variant"]),
        max_iterations=int(merged["icp.max_iter"]),
        correspondence_max_distance=float(merged["icp.max_corr_dist_m"]),
        convergence_translation_eps=float(merged["icp.eps_t_m"]),
        convergence_rotation_eps=float(merged["icp.eps_r_rad"]),
        gicp_covariance_epsilon=float(merged["icp.gicp_epsilon"]),
        normal_estimation_k=int(merged["icp.normal_k"]),
    )
    return PipelineConfig(
        icp=icp,
        upsample_registration=UpsampleConfig(
            rate=int(merged["upsample.rate"]),
            edge_threshold_tau=float(merged["upsample.tau_m"]),
            constrained=True,
        ),
        upsample_texture=UpsampleConfig(
            rate=int(merged["upsample_texture.rate"]),
            edge_threshold_tau=float(merged["upsample_texture.tau_m"]),
            constrained=False,
        ),
        foveal=FovealConfig(
            near_blind_radius=float(merged["foveal.near_m"]),
            white_zone_outer_radius=float(merged["foveal.far_m"]),
            horizontal_slice_half_angle=math.radians(float(merged["foveal.h_half_angle_deg"])),
            vertical_slice_half_angle=math.radians(float(merged["foveal.v_half_angle_deg"])),
        ),
        rayfilter=RayFilterConfig(
            window_size=int(merged["rayfilter.window_M"]),
            outlier_rate=float(merged["rayfilter.c"]),
        ),
        rayfilter_enabled=bool(merged["rayfilter.enabled"]),
        ground_z_threshold=float(merged["ground.z_threshold_m"]),
        experiment_label=str(merged["experiment.label"]),
    )


def load_config_file(path: str, base: Optional[PipelineConfig] = None) -> PipelineConfig:
    with open(path) as fh:
        flat = json.load(fh)
    if not isinstance(flat, dict):
        raise ValueError(f"config file {path} must hold a JSON object of dotted keys")
    return config_from_flat(flat, base)


_PRESET_VARIANTS = ["generalized", "standard", "point_to_plane"]


def preset_names() -> list[str]:
    return [f"E{i}" for i in range(12)]


def get_preset(name: str) -> PipelineConfig:
    """E0-E11 grid: variant = GEN (E0-E3), STD (E4-E7), P2P (E8-E11);
    upsampling rate = index mod 4 for both the registration and texture
    stages."""
    name = name.upper()
    try:
        packaged = resources.files("fovmap").joinpath(f"presets/{name}.json")
        if packaged.is_file():
            flat = json.loads(packaged.read_text())
            return config_from_flat(flat)
    except (FileNotFoundError, ModuleNotFoundError):
        pass
    return _build_preset(name)


def _build_preset(name: str) -> PipelineConfig:
    if name not in preset_names():
        raise ValueError(f"unknown preset {name!r}; expected E0..E11")
    i = int(name[1:])
    variant = _PRESET_VARIANTS[i // 4]
    rate = i % 4
    return config_from_flat(
        {
            "icp.variant": variant,
            "upsample.rate": rate,
            "upsample_texture.rate": rate,
            "experiment.label": name,
        }
    )


def preset_flat(name: str) -> Dict[str, Any]:
    return _build_preset(name.upper()).to_flat()
