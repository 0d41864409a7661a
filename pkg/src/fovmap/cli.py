"""Command-line client for the mapping service.

Every verb talks to the HTTP API: against a remote server when --server is
given, otherwise against an in-process instance of the same application. Verbs:

    run      KITTI sequence -> map + metric/timing reports
    synth    generate a synthetic scene and run the pipeline over it
    eval     evaluate an exported map against dataset ground truth
    export   convert a map file between PLY and ASCII XYZRGB
    presets  list the E0-E11 experiment presets
    serve    run the HTTP service
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Dict, Optional

import httpx


def _client(server: Optional[str]) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=None)
    # no server given: stand the application up in-process and speak to it
    # over the same HTTP surface
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from starlette.testclient import TestClient

    from fovmap.service.app import create_app

    return TestClient(create_app(), base_url="http://fovmap.local")


def _collect_config(args) -> Dict:
    """Merge a config file, dedicated flags, and --set overrides (in that order)."""
    flat: Dict = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            loaded = json.load(fh)
        if not isinstance(loaded, dict):
            raise SystemExit(f"config file {args.config} must hold a JSON object")
        flat.update(loaded)
    direct = {
        "upsample.rate": getattr(args, "upsample_rate", None),
        "upsample.tau_m": getattr(args, "tau", None),
        "upsample_texture.rate": getattr(args, "texture_rate", None),
        "icp.variant": getattr(args, "icp_variant", None),
        "icp.max_iter": getattr(args, "icp_max_iter", None),
        "icp.max_corr_dist_m": getattr(args, "icp_max_corr_dist", None),
        "icp.eps_t_m": getattr(args, "icp_eps_t", None),
        "icp.eps_r_rad": getattr(args, "icp_eps_r", None),
        "ground.z_threshold_m": getattr(args, "ground_z", None),
        "rayfilter.window_M": getattr(args, "window_m", None),
        "rayfilter.c": getattr(args, "outlier_rate", None),
        "rayfilter.enabled": getattr(args, "rayfilter", None),
    }
    flat.update({k: v for k, v in direct.items() if v is not None})
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise SystemExit(f"--set expects key=value, got {item!r}")
        key, _, value = item.partition("=")
        try:
            flat[key] = json.loads(value)
        except json.JSONDecodeError:
            flat[key] = value
    return flat


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", help="experiment preset E0..E11")
    p.add_argument("--config", help="JSON config file of flat dotted keys")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")
    p.add_argument("--upsample-rate", type=int, dest="upsample_rate")
    p.add_argument("--tau", type=float, help="upsampling edge threshold, meters")
    p.add_argument("--texture-rate", type=int, dest="texture_rate")
    p.add_argument("--icp-variant", dest="icp_variant", help="standard | point_to_plane | generalized")
    p.add_argument("--icp-max-iter", type=int, dest="icp_max_iter")
    p.add_argument("--icp-max-corr-dist", type=float, dest="icp_max_corr_dist")
    p.add_argument("--icp-eps-t", type=float, dest="icp_eps_t")
    p.add_argument("--icp-eps-r", type=float, dest="icp_eps_r")
    p.add_argument("--ground-z", type=float, dest="ground_z")
    p.add_argument("--window-m", type=int, dest="window_m")
    p.add_argument("--outlier-rate", type=float, dest="outlier_rate")
    p.add_argument("--no-rayfilter", dest="rayfilter", action="store_false", default=None)


def _print_metrics(metrics: Optional[dict]) -> None:
    if not metrics:
        return
    for key, value in metrics.items():
        print(f"{key}: {value}")


def _fail(resp: httpx.Response) -> None:
    try:
        detail = resp.json().get("detail", resp.text)
    except Exception:
        detail = resp.text
    print(f"error ({resp.status_code}): {detail}", file=sys.stderr)
    raise SystemExit(1)


def _post(client: httpx.Client, path: str, payload: dict) -> dict:
    resp = client.post(path, json=payload)
    if resp.status_code != 200:
        _fail(resp)
    return resp.json()


def cmd_run(args) -> int:
    source = {
        "kind": "kitti",
        "root": args.dataset,
        "start": args.start,
        "count": args.frames,
        "camera": args.camera,
    }
    payload = {
        "source": source,
        "preset": args.preset,
        "config": _collect_config(args),
        "export_path": args.export,
        "export_format": args.export_format,
        "report_path": args.report,
    }
    with _client(args.server) as client:
        body = _post(client, "/run", payload)
    print(f"frames processed: {body['timing']['n_frames']}  map points: {body['n_map_points']}")
    if body["failed_frames"]:
        print(f"failed frames: {body['failed_frames']}", file=sys.stderr)
    _print_metrics(body.get("metrics"))
    for key, value in body["timing"].items():
        if key != "n_frames":
            print(f"timing.{key}: {value:.4f}")
    return 0


def cmd_synth(args) -> int:
    source = {
        "kind": "synthetic",
        "scene": args.scene,
        "n_frames": args.frames,
        "pose_noise_t": args.pose_noise_t,
        "pose_noise_r": args.pose_noise_r,
        "seed": args.seed,
    }
    if args.scene_file:
        with open(args.scene_file) as fh:
            source["scene_document"] = json.load(fh)
        source["scene"] = None
    payload = {
        "source": source,
        "preset": args.preset,
        "config": _collect_config(args),
        "export_path": args.export,
        "export_format": args.export_format,
        "report_path": args.report,
    }
    with _client(args.server) as client:
        body = _post(client, "/run", payload)
    print(f"frames processed: {body['timing']['n_frames']}  map points: {body['n_map_points']}")
    _print_metrics(body.get("metrics"))
    return 0


def cmd_eval(args) -> int:
    if args.dataset:
        source = {
            "kind": "kitti",
            "root": args.dataset,
            "start": args.start,
            "count": args.frames,
            "camera": args.camera,
        }
    else:
        source = {"kind": "synthetic", "scene": args.scene, "n_frames": args.frames}
    payload = {
        "map_path": args.map,
        "source": source,
        "preset": args.preset,
        "config": _collect_config(args),
        "report_path": args.report,
    }
    with _client(args.server) as client:
        body = _post(client, "/eval", payload)
    _print_metrics(body["metrics"])
    return 0


def cmd_export(args) -> int:
    payload = {"in_path": args.input, "out_path": args.output, "format": args.format}
    with _client(args.server) as client:
        body = _post(client, "/export", payload)
    print(f"wrote {body['n_points']} points to {body['out_path']}")
    return 0


def cmd_presets(args) -> int:
    with _client(args.server) as client:
        resp = client.get("/presets")
        if resp.status_code != 200:
            _fail(resp)
        for preset in resp.json():
            cfg = preset["config"]
            print(
                f"{preset['name']}: icp.variant={cfg['icp.variant']} "
                f"upsample.rate={cfg['upsample.rate']}"
            )
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("fovmap.service.app:app", host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fovmap", description="textured 3D mapping from LIDAR, camera, and navigation data"
    )
    parser.add_argument("--server", help="remote service URL; defaults to in-process execution")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="process a KITTI-format sequence into a textured map")
    p.add_argument("dataset", help="sequence directory (KITTI raw layout)")
    p.add_argument("--start", type=int, default=0)
    p.add_argument("--frames", type=int, default=None, help="number of frames to process")
    p.add_argument("--camera", type=int, default=2)
    p.add_argument("--export", help="write the map here (PLY or XYZRGB)")
    p.add_argument("--export-format", default="ply", choices=["ply", "xyzrgb"])
    p.add_argument("--report", help="write metric reports here (text + .jsonl)")
    _add_config_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("synth", help="render a synthetic scene and run the pipeline over it")
    p.add_argument("--scene", default="corridor", help="built-in scene name")
    p.add_argument("--scene-file", help="JSON scene document")
    p.add_argument("--frames", type=int, default=None)
    p.add_argument("--pose-noise-t", type=float, default=0.0)
    p.add_argument("--pose-noise-r", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--export", help="write the map here")
    p.add_argument("--export-format", default="ply", choices=["ply", "xyzrgb"])
    p.add_argument("--report")
    _add_config_flags(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="evaluate an exported map against ground truth")
    p.add_argument("map", help="map file (PLY or XYZRGB)")
    p.add_argument("--dataset", help="KITTI sequence directory providing ground truth")
    p.add_argument("--scene", default="corridor", help="synthetic scene when no dataset given")
    p.add_argument("--start", type=int, default=0)
    p.add_argument("--frames", type=int, default=None)
    p.add_argument("--camera", type=int, default=2)
    p.add_argument("--report")
    _add_config_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export", help="convert a map file between formats")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--format", default="ply", choices=["ply", "xyzrgb"])
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("presets", help="list experiment presets")
    p.set_defaults(func=cmd_presets)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except httpx.HTTPError as exc:
        print(f"transport error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
