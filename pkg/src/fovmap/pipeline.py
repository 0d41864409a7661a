"""Incremental mapping driver: per frame, refine the pose against the previous
frame, extract and densify the foveal subset, ray-filter against the map's
foveal content, texture the survivors, and accumulate.

Frames are processed strictly in order; the map and the refined pose chain are
the only state carried between frames. The first frame's raw pose is accepted
as refined and its scan is accumulated without alignment.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Iterable, List, Optional

from fovmap.config import PipelineConfig
from fovmap.foveal import extract_foveal
from fovmap.frames import FrameBundle
from fovmap.geometry import PointCloud, RigidTransform
from fovmap.mapping import TexturedMap
from fovmap.metrics import GroundTruthFrame, MetricReport, evaluate, generate_texture_ground_truth
from fovmap.rayfilter import AccumulationStats, filter_texture_accumulate
from fovmap.registration import align, prepare_scan_for_alignment
from fovmap.upsample import upsample

logger = logging.getLogger(__name__)

STAGES = ("upsample", "align", "foveal", "rayfilter", "accumulate")


@dataclass
class TimingReport:
    """Per-stage wall-clock seconds per frame, averaged over frames."""

    upsample: float = 0.0
    align: float = 0.0
    foveal: float = 0.0
    rayfilter: float = 0.0
    accumulate: float = 0.0
    n_frames: int = 0

    def to_dict(self) -> dict:
        return {
            "upsample_s": self.upsample,
            "align_s": self.align,
            "foveal_s": self.foveal,
            "rayfilter_s": self.rayfilter,
            "accumulate_s": self.accumulate,
            "n_frames": self.n_frames,
        }


@dataclass
class FrameStats:
    frame_id: int
    converged: bool
    fallback_to_raw: bool
    mean_correspondence_error: float
    accumulation: AccumulationStats
    timings: dict = field(default_factory=dict)


@dataclass
class PipelineState:
    """Mutable state threaded through process_frame calls."""

    config: PipelineConfig
    map: TexturedMap = field(default_factory=TexturedMap)
    refined_poses: List[RigidTransform] = field(default_factory=list)
    frame_stats: List[FrameStats] = field(default_factory=list)
    gt_frames: List[GroundTruthFrame] = field(default_factory=list)
    collect_ground_truth: bool = True
    _prev_bundle: Optional[FrameBundle] = None
    _prev_prepared: Optional[PointCloud] = None

    @property
    def n_frames(self) -> int:
        return len(self.refined_poses)

    @property
    def current_pose(self) -> Optional[RigidTransform]:
        return self.refined_poses[-1] if self.refined_poses else None


def process_frame(state: PipelineState, bundle: FrameBundle) -> FrameStats:
    """Fold one frame into the map; returns the frame's statistics."""
    cfg = state.config
    timings = {}

    t0 = time.perf_counter()
    prepared = prepare_scan_for_alignment(
        bundle.scan, bundle.cam, cfg.upsample_registration, cfg.ground_z_threshold
    )
    timings["upsample"] = time.perf_counter() - t0

    converged = True
    fallback = False
    mean_err = 0.0
    t0 = time.perf_counter()
    if state._prev_bundle is None:
        refined = bundle.raw_pose
    else:
        guess = state._prev_bundle.raw_pose.inverse().compose(bundle.raw_pose)
        result = align(prepared, state._prev_prepared, guess, cfg.icp)
        converged = result.converged
        mean_err = result.mean_correspondence_error
        relative = result.transform
        if not converged:
            # no recovery strategy beyond trusting navigation for this frame
            logger.warning(
                "frame %d: registration did not converge, falling back to raw relative pose",
                bundle.frame_id,
            )
            relative = guess
            fallback = True
        refined = state.current_pose.compose(relative)
    timings["align"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    fov = extract_foveal(bundle.scan, bundle.cam, cfg.foveal)
    timings["foveal"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    textured_input = upsample(fov, bundle.cam, cfg.upsample_texture)
    timings["upsample"] += time.perf_counter() - t0

    t0 = time.perf_counter()
    acc = filter_texture_accumulate(
        textured_input,
        state.map,
        bundle,
        refined,
        cfg.rayfilter,
        cfg.foveal,
        enabled=cfg.rayfilter_enabled,
    )
    t1 = time.perf_counter()
    timings["rayfilter"] = (t1 - t0) - acc.append_seconds
    timings["accumulate"] = acc.append_seconds

    state.refined_poses.append(refined)
    state._prev_bundle = bundle
    state._prev_prepared = prepared
    if state.collect_ground_truth:
        state.gt_frames.append(
            GroundTruthFrame(
                cloud=generate_texture_ground_truth(bundle),
                pose=refined,
                frame_id=bundle.frame_id,
            )
        )

    stats = FrameStats(
        frame_id=bundle.frame_id,
        converged=converged,
        fallback_to_raw=fallback,
        mean_correspondence_error=mean_err,
        accumulation=acc,
        timings=timings,
    )
    state.frame_stats.append(stats)
    return stats


@dataclass
class RunResult:
    map: TexturedMap
    metrics: Optional[MetricReport]
    timing: TimingReport
    frame_stats: List[FrameStats]
    refined_poses: List[RigidTransform]
    failed_frames: List[int] = field(default_factory=list)


def run_sequence(
    frames: Iterable[FrameBundle],
    cfg: PipelineConfig,
    collect_ground_truth: bool = True,
) -> RunResult:
    """Fold frames into a map and evaluate against per-frame ground truth.

    A frame that raises is skipped with a logged reason and recorded in
    failed_frames, never silently dropped.
    """
    state = PipelineState(config=cfg, collect_ground_truth=collect_ground_truth)
    failed = []
    for bundle in frames:
        try:
            process_frame(state, bundle)
        except Exception:
            logger.exception("skipping frame %d after processing error", bundle.frame_id)
            failed.append(bundle.frame_id)

    timing = TimingReport(n_frames=len(state.frame_stats))
    if state.frame_stats:
        for stage in STAGES:
            mean = sum(s.timings.get(stage, 0.0) for s in state.frame_stats) / len(state.frame_stats)
            setattr(timing, stage, mean)

    metrics = None
    if collect_ground_truth and not state.map.is_empty:
        metrics = evaluate(state.map, state.gt_frames)
    return RunResult(
        map=state.map,
        metrics=metrics,
        timing=timing,
        frame_stats=state.frame_stats,
        refined_poses=state.refined_poses,
        failed_frames=failed,
    )
