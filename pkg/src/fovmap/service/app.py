"""FastAPI application exposing the mapping pipeline.

Stateless endpoints (/run, /eval, /synth-style runs, /export) wrap whole
sequences; /sessions manages long-lived incremental mapping sessions that
accept frames one at a time.
"""

from __future__ import annotations

import threading
import uuid
from typing import Dict, Iterator, List, Optional

import numpy as np
from fastapi import FastAPI, HTTPException

import fovmap
from fovmap.config import PipelineConfig, config_from_flat, get_preset, preset_flat, preset_names
from fovmap.frames import FrameBundle
from fovmap.kitti import iter_kitti_sequence, load_kitti_sequence
from fovmap.mapio import export_map, import_map
from fovmap.mapping import TexturedMap
from fovmap.metrics import GroundTruthFrame, MetricReport, evaluate, generate_texture_ground_truth
from fovmap.pipeline import FrameStats, PipelineState, RunResult, process_frame, run_sequence
from fovmap.service import schemas as sch
from fovmap.synthetic import (
    make_scene,
    noisy_raw_poses,
    render_synthetic_frame,
    scene_from_document,
)


def _build_config(preset: Optional[str], flat: dict) -> PipelineConfig:
    try:
        base = get_preset(preset) if preset else None
        return config_from_flat(flat, base)
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc))


def _resolve_scene(src: sch.SyntheticSource):
    try:
        if src.scene_document is not None:
            return scene_from_document(src.scene_document)
        kwargs = {}
        if src.n_frames is not None:
            kwargs["n_frames"] = src.n_frames
        return make_scene(src.scene or "corridor", **kwargs)
    except (KeyError, ValueError, TypeError) as exc:
        raise HTTPException(status_code=422, detail=f"invalid scene: {exc}")


def _synthetic_frames(src: sch.SyntheticSource) -> Iterator[FrameBundle]:
    scene = _resolve_scene(src)
    raw_poses = scene.trajectory
    if src.pose_noise_t > 0 or src.pose_noise_r > 0:
        raw_poses = noisy_raw_poses(
            scene.trajectory, sigma_t=src.pose_noise_t, sigma_r=src.pose_noise_r, seed=src.seed
        )
    for i in range(len(scene.trajectory)):
        bundle, _ = render_synthetic_frame(scene, i, raw_pose=raw_poses[i])
        yield bundle


def _load_frames(source) -> Iterator[FrameBundle]:
    if isinstance(source, sch.KittiSource):
        frame_range = None if source.count is None else (source.start, source.count)
        try:
            # instantiating the generator validates the directory immediately;
            # frames stream lazily afterwards
            frames = iter_kitti_sequence(source.root, frame_range, camera=source.camera)
            first = next(frames, None)
        except (FileNotFoundError, ValueError) as exc:
            raise HTTPException(status_code=404, detail=str(exc))

        def chained():
            if first is not None:
                yield first
            yield from frames

        return chained()
    return _synthetic_frames(source)


def _load_one_frame(source, index: int) -> FrameBundle:
    if isinstance(source, sch.KittiSource):
        try:
            bundles = load_kitti_sequence(source.root, (index, 1), camera=source.camera)
        except (FileNotFoundError, ValueError) as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        if not bundles:
            raise HTTPException(status_code=404, detail=f"frame {index} out of range")
        return bundles[0]
    scene = _resolve_scene(source)
    if index >= len(scene.trajectory):
        raise HTTPException(status_code=404, detail=f"frame {index} out of range")
    raw_poses = scene.trajectory
    if source.pose_noise_t > 0 or source.pose_noise_r > 0:
        raw_poses = noisy_raw_poses(
            scene.trajectory, sigma_t=source.pose_noise_t, sigma_r=source.pose_noise_r, seed=source.seed
        )
    bundle, _ = render_synthetic_frame(scene, index, raw_pose=raw_poses[index])
    return bundle


def _metrics_model(report: Optional[MetricReport]) -> Optional[sch.MetricsModel]:
    if report is None:
        return None
    return sch.MetricsModel(**report.to_dict())


def _frame_stats_model(s: FrameStats) -> sch.FrameStatsModel:
    return sch.FrameStatsModel(
        frame_id=s.frame_id,
        converged=s.converged,
        fallback_to_raw=s.fallback_to_raw,
        mean_correspondence_error=s.mean_correspondence_error,
        n_candidates=s.accumulation.n_candidates,
        n_added=s.accumulation.n_added,
        n_occluding=s.accumulation.n_occluding,
        n_occluded=s.accumulation.n_occluded,
        n_duplicate=s.accumulation.n_duplicate,
    )


def _run_response(result: RunResult, export_path, export_format, report_path) -> sch.RunResponse:
    if export_path:
        export_map(result.map, export_path, export_format)
    if report_path and result.metrics is not None:
        result.metrics.write(report_path)
    return sch.RunResponse(
        n_map_points=len(result.map),
        metrics=_metrics_model(result.metrics),
        timing=sch.TimingModel(**result.timing.to_dict()),
        frames=[_frame_stats_model(s) for s in result.frame_stats],
        failed_frames=result.failed_frames,
        export_path=export_path,
        report_path=report_path,
    )


class _Session:
    def __init__(self, config: PipelineConfig, collect_ground_truth: bool):
        self.lock = threading.Lock()
        self.state = PipelineState(config=config, collect_ground_truth=collect_ground_truth)


def create_app() -> FastAPI:
    app = FastAPI(title="fovmap", version=fovmap.__version__)
    sessions: Dict[str, _Session] = {}
    registry_lock = threading.Lock()

    def _get_session(session_id: str) -> _Session:
        with registry_lock:
            if session_id not in sessions:
                raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
            return sessions[session_id]

    @app.get("/health", response_model=sch.HealthResponse)
    def health():
        return sch.HealthResponse(status="ok", version=fovmap.__version__)

    @app.get("/presets", response_model=List[sch.PresetInfo])
    def presets():
        return [sch.PresetInfo(name=n, config=preset_flat(n)) for n in preset_names()]

    @app.post("/run", response_model=sch.RunResponse)
    def run(req: sch.RunRequest):
        cfg = _build_config(req.preset, req.config)
        frames = _load_frames(req.source)
        try:
            result = run_sequence(frames, cfg)
            return _run_response(result, req.export_path, req.export_format, req.report_path)
        except (OSError, ValueError) as exc:
            # mid-stream decode failures surface here; per-frame processing
            # errors are already skipped inside run_sequence
            raise HTTPException(status_code=400, detail=str(exc))

    @app.post("/eval", response_model=sch.EvalResponse)
    def eval_map(req: sch.EvalRequest):
        _build_config(req.preset, req.config)  # validates keys
        try:
            xyz, colors = import_map(req.map_path)
        except (FileNotFoundError, ValueError) as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        tmap = TexturedMap()
        tmap.append(xyz.astype(np.float64), colors, frame_id=-1)
        gt_frames = []
        for bundle in _load_frames(req.source):
            gt_frames.append(
                GroundTruthFrame(
                    cloud=generate_texture_ground_truth(bundle),
                    pose=bundle.raw_pose,
                    frame_id=bundle.frame_id,
                )
            )
        report = evaluate(tmap, gt_frames)
        if req.report_path:
            report.write(req.report_path)
        return sch.EvalResponse(metrics=_metrics_model(report), report_path=req.report_path)

    @app.post("/export", response_model=sch.ExportResponse)
    def export(req: sch.ExportRequest):
        try:
            xyz, colors = import_map(req.in_path)
        except (FileNotFoundError, ValueError) as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        tmap = TexturedMap()
        tmap.append(xyz.astype(np.float64), colors, frame_id=-1)
        try:
            export_map(tmap, req.out_path, req.format)
        except (OSError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return sch.ExportResponse(out_path=req.out_path, n_points=len(tmap))

    @app.post("/sessions", response_model=sch.SessionInfo)
    def create_session(req: sch.SessionCreateRequest):
        cfg = _build_config(req.preset, req.config)
        session_id = uuid.uuid4().hex[:12]
        with registry_lock:
            sessions[session_id] = _Session(cfg, req.collect_ground_truth)
        return sch.SessionInfo(
            session_id=session_id, n_frames=0, n_map_points=0, config=cfg.to_flat()
        )

    @app.get("/sessions/{session_id}", response_model=sch.SessionInfo)
    def session_info(session_id: str):
        sess = _get_session(session_id)
        with sess.lock:
            return sch.SessionInfo(
                session_id=session_id,
                n_frames=sess.state.n_frames,
                n_map_points=len(sess.state.map),
                config=sess.state.config.to_flat(),
            )

    @app.delete("/sessions/{session_id}")
    def delete_session(session_id: str):
        with registry_lock:
            if session_id not in sessions:
                raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
            del sessions[session_id]
        return {"deleted": session_id}

    @app.post("/sessions/{session_id}/frames", response_model=sch.FrameFeedResponse)
    def feed_frame(session_id: str, req: sch.FrameFeedRequest):
        sess = _get_session(session_id)
        bundle = _load_one_frame(req.source, req.index)
        with sess.lock:
            stats = process_frame(sess.state, bundle)
            return sch.FrameFeedResponse(
                session_id=session_id,
                stats=_frame_stats_model(stats),
                n_map_points=len(sess.state.map),
            )

    @app.get("/sessions/{session_id}/metrics", response_model=sch.SessionMetricsResponse)
    def session_metrics(session_id: str):
        sess = _get_session(session_id)
        with sess.lock:
            if sess.state.map.is_empty:
                raise HTTPException(status_code=400, detail="session map is empty")
            report = evaluate(sess.state.map, sess.state.gt_frames)
        return sch.SessionMetricsResponse(session_id=session_id, metrics=_metrics_model(report))

    @app.post("/sessions/{session_id}/export", response_model=sch.ExportResponse)
    def session_export(session_id: str, req: sch.SessionExportRequest):
        sess = _get_session(session_id)
        with sess.lock:
            try:
                export_map(sess.state.map, req.path, req.format)
            except (OSError, ValueError) as exc:
                raise HTTPException(status_code=400, detail=str(exc))
            return sch.ExportResponse(out_path=req.path, n_points=len(sess.state.map))

    return app


app = create_app()
