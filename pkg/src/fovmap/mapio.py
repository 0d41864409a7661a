"""Colored point-cloud export/import: binary little-endian PLY (float32
coordinates, 8-bit colors) and a plain ASCII XYZRGB format. Exports round-trip
losslessly through the importer at float32 precision."""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

PLY_FORMAT = "ply"
XYZRGB_FORMAT = "xyzrgb"
FORMATS = (PLY_FORMAT, XYZRGB_FORMAT)

_PLY_HEADER = """ply
format binary_little_endian 1.0
element vertex {n}
property float x
property float y
property float z
property uchar red
property uchar green
property uchar blue
end_header
"""

_VERTEX_DTYPE = np.dtype(
    [
        ("x", "<f4"),
        ("y", "<f4"),
        ("z", "<f4"),
        ("red", "u1"),
        ("green", "u1"),
        ("blue", "u1"),
    ]
)


def export_map(tmap, path: str | os.PathLike, fmt: str = PLY_FORMAT) -> None:
    """Write an accumulated map (or any object with xyz/colors arrays)."""
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}; expected one of {FORMATS}")
    xyz = np.asarray(tmap.xyz, dtype=np.float64)
    colors = np.asarray(tmap.colors, dtype=np.uint8)
    if len(xyz) == 0:
        raise ValueError("refusing to export an empty map")
    if len(xyz) != len(colors):
        raise ValueError("coordinate/color length mismatch")
    path = Path(path)
    try:
        if fmt == PLY_FORMAT:
            _write_ply(xyz, colors, path)
        else:
            _write_xyzrgb(xyz, colors, path)
    except OSError as exc:
        raise OSError(f"failed writing map to {path}: {exc}") from exc


def _write_ply(xyz: np.ndarray, colors: np.ndarray, path: Path) -> None:
    rec = np.empty(len(xyz), dtype=_VERTEX_DTYPE)
    f32 = xyz.astype("<f4")
    rec["x"], rec["y"], rec["z"] = f32[:, 0], f32[:, 1], f32[:, 2]
    rec["red"], rec["green"], rec["blue"] = colors[:, 0], colors[:, 1], colors[:, 2]
    with open(path, "wb") as fh:
        fh.write(_PLY_HEADER.format(n=len(xyz)).encode("ascii"))
        fh.write(rec.tobytes())


def _write_xyzrgb(xyz: np.ndarray, colors: np.ndarray, path: Path) -> None:
    f32 = xyz.astype(np.float32)
    with open(path, "w") as fh:
        for (x, y, z), (r, g, b) in zip(f32, colors):
            # repr of the exact float64 value round-trips the float32 bits
            fh.write(f"{float(x)!r} {float(y)!r} {float(z)!r} {r} {g} {b}\n")


def import_map(path: str | os.PathLike) -> tuple[np.ndarray, np.ndarray]:
    """Read a map written by export_map; returns (xyz float32, colors uint8)."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"map file not found: {path}")
    with open(path, "rb") as fh:
        magic = fh.read(3)
    if magic == b"ply":
        return _read_ply(path)
    return _read_xyzrgb(path)


def _read_ply(path: Path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, "rb") as fh:
        header_lines = []
        while True:
            line = fh.readline()
            if not line:
                raise ValueError(f"{path}: truncated PLY header")
            header_lines.append(line.decode("ascii", errors="replace").strip())
            if header_lines[-1] == "end_header":
                break
        n = None
        for line in header_lines:
            if line.startswith("element vertex"):
                n = int(line.split()[-1])
        if n is None:
            raise ValueError(f"{path}: PLY header lacks a vertex element")
        if "format binary_little_endian 1.0" not in header_lines:
            raise ValueError(f"{path}: only binary little-endian PLY is supported")
        body = fh.read(n * _VERTEX_DTYPE.itemsize)
        have = len(body) // _VERTEX_DTYPE.itemsize
        if have != n:
            raise ValueError(f"{path}: expected {n} vertices, file holds {have}")
        rec = np.frombuffer(body, dtype=_VERTEX_DTYPE)
    xyz = np.column_stack([rec["x"], rec["y"], rec["z"]])
    colors = np.column_stack([rec["red"], rec["green"], rec["blue"]])
    return xyz, colors


def _read_xyzrgb(path: Path) -> tuple[np.ndarray, np.ndarray]:
    xyz = []
    colors = []
    with open(path) as fh:
        for ln, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 6:
                raise ValueError(f"{path}:{ln}: expected 6 fields, got {len(parts)}")
            xyz.append([np.float32(parts[0]), np.float32(parts[1]), np.float32(parts[2])])
            colors.append([int(parts[3]), int(parts[4]), int(parts[5])])
    if not xyz:
        raise ValueError(f"{path}: no points")
    return np.array(xyz, dtype=np.float32), np.array(colors, dtype=np.uint8)
