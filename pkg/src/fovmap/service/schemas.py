"""Request/response models for the mapping service.

Configs travel as flat dotted-key objects (the same keys the config files
use); frame data is referenced by dataset path or synthetic scene rather than
shipped inline, since clients and the service share a filesystem.
"""

from __future__ import annotations

from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class PresetInfo(BaseModel):
    name: str
    config: Dict[str, Any]


class MetricsModel(BaseModel):
    mu_me_m: float
    sigma_me_m: float
    mu_te: float
    sigma_te: float
    mtme: float
    n_scans: int
    n_points: int
    skipped_frames: int = 0


class TimingModel(BaseModel):
    upsample_s: float
    align_s: float
    foveal_s: float
    rayfilter_s: float
    accumulate_s: float
    n_frames: int


class FrameStatsModel(BaseModel):
    frame_id: int
    converged: bool
    fallback_to_raw: bool
    mean_correspondence_error: float
    n_candidates: int
    n_added: int
    n_occluding: int
    n_occluded: int
    n_duplicate: int


class KittiSource(BaseModel):
    kind: Literal["kitti"] = "kitti"
    root: str
    start: int = 0
    count: Optional[int] = None
    camera: int = 2


class SyntheticSource(BaseModel):
    kind: Literal["synthetic"] = "synthetic"
    scene: Optional[str] = "corridor"
    scene_document: Optional[Dict[str, Any]] = None
    n_frames: Optional[int] = None
    pose_noise_t: float = 0.0
    pose_noise_r: float = 0.0
    seed: int = 0


class RunRequest(BaseModel):
    source: KittiSource | SyntheticSource = Field(discriminator="kind")
    preset: Optional[str] = None
    config: Dict[str, Any] = Field(default_factory=dict)
    export_path: Optional[str] = None
    export_format: str = "ply"
    report_path: Optional[str] = None


class RunResponse(BaseModel):
    n_map_points: int
    metrics: Optional[MetricsModel]
    timing: TimingModel
    frames: List[FrameStatsModel]
    failed_frames: List[int]
    export_path: Optional[str] = None
    report_path: Optional[str] = None


class EvalRequest(BaseModel):
    map_path: str
    source: KittiSource | SyntheticSource = Field(discriminator="kind")
    preset: Optional[str] = None
    config: Dict[str, Any] = Field(default_factory=dict)
    report_path: Optional[str] = None


class EvalResponse(BaseModel):
    metrics: MetricsModel
    report_path: Optional[str] = None


class ExportRequest(BaseModel):
    in_path: str
    out_path: str
    format: str = "ply"


class ExportResponse(BaseModel):
    out_path: str
    n_points: int


class SessionCreateRequest(BaseModel):
    preset: Optional[str] = None
    config: Dict[str, Any] = Field(default_factory=dict)
    collect_ground_truth: bool = True


class SessionInfo(BaseModel):
    session_id: str
    n_frames: int
    n_map_points: int
    config: Dict[str, Any]


class FrameFeedRequest(BaseModel):
    source: KittiSource | SyntheticSource = Field(discriminator="kind")
    index: int = 0


class FrameFeedResponse(BaseModel):
    session_id: str
    stats: FrameStatsModel
    n_map_points: int


class SessionExportRequest(BaseModel):
    path: str
    format: str = "ply"


class SessionMetricsResponse(BaseModel):
    session_id: str
    metrics: MetricsModel
