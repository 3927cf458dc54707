"""The file formats shared with the consumer pipeline.

These are this package's only coupling to the downstream library: the
feature-container byte layout, the camera manifest JSON, and plain OFF/OBJ
meshes. The container layout (little-endian): magic "CFV1", version u32,
kind u8 (1 = view_maps), 3 reserved bytes, dims u32 (N, H, W, C), payload
f32 row-major (features then 0/1 masks), CRC32 trailer.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"CFV1"
VERSION = 1
KIND_VIEW_MAPS = 1


class FormatError(Exception):
    """Malformed container, manifest, or mesh file."""


def write_view_maps(path, features: np.ndarray, masks: np.ndarray) -> None:
    """Write an (N, H, W, C) feature stack with (N, H, W) masks."""
    feats = np.ascontiguousarray(features, dtype=np.float32)
    m = np.ascontiguousarray(masks, dtype=np.float32)
    if feats.ndim != 4 or m.shape != feats.shape[:3]:
        raise FormatError(f"need features (N,H,W,C) and masks (N,H,W); got "
                          f"{feats.shape} and {m.shape}")
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<IB3x", VERSION, KIND_VIEW_MAPS)
    blob += struct.pack("<4I", *feats.shape)
    blob += feats.astype("<f4").tobytes()
    blob += m.astype("<f4").tobytes()
    blob += struct.pack("<I", zlib.crc32(bytes(blob)) & 0xFFFFFFFF)
    Path(path).write_bytes(bytes(blob))


def read_view_maps(path):
    """Read back an exported container; returns (features, masks)."""
    blob = Path(path).read_bytes()
    if len(blob) < 28 or blob[:4] != MAGIC:
        raise FormatError(f"{path}: not a feature container")
    version, kind = struct.unpack("<IB3x", blob[4:12])
    if version != VERSION or kind != KIND_VIEW_MAPS:
        raise FormatError(f"{path}: unsupported version/kind "
                          f"{version}/{kind}")
    n, h, w, c = struct.unpack("<4I", blob[12:28])
    expected = 28 + 4 * (n * h * w * c + n * h * w) + 4
    if len(blob) != expected:
        raise FormatError(f"{path}: size mismatch")
    if struct.unpack("<I", blob[-4:])[0] != (zlib.crc32(blob[:-4]) &
                                             0xFFFFFFFF):
        raise FormatError(f"{path}: checksum mismatch")
    flat = np.frombuffer(blob[28:-4], dtype="<f4")
    features = flat[:n * h * w * c].reshape(n, h, w, c)
    masks = flat[n * h * w * c:].reshape(n, h, w)
    return features, masks


@dataclass(frozen=True)
class Camera:
    """One entry of the camera manifest (world-to-camera convention)."""

    index: int
    rotation: np.ndarray     # (3, 3)
    translation: np.ndarray  # (3,)
    fx: float
    fy: float
    cx: float
    cy: float
    height: int
    width: int


def load_cameras(path) -> list[Camera]:
    try:
        manifest = json.loads(Path(path).read_text(encoding="utf-8"))
        entries = manifest["views"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise FormatError(f"{path}: bad camera manifest ({exc})") from None
    cameras = []
    for entry in entries:
        cameras.append(Camera(
            index=int(entry["index"]),
            rotation=np.asarray(entry["rotation"],
                                dtype=np.float64).reshape(3, 3),
            translation=np.asarray(entry["translation"], dtype=np.float64),
            fx=float(entry["fx"]), fy=float(entry["fy"]),
            cx=float(entry["cx"]), cy=float(entry["cy"]),
            height=int(entry["height"]), width=int(entry["width"])))
    if not cameras:
        raise FormatError(f"{path}: empty camera manifest")
    return cameras


def load_mesh(path):
    """Minimal OFF/OBJ triangle mesh reader; returns (vertices, faces)."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".off":
        verts, faces = _load_off(path)
    elif suffix == ".obj":
        verts, faces = _load_obj(path)
    else:
        raise FormatError(f"{path}: unsupported mesh format {suffix!r}")
    v = np.asarray(verts, dtype=np.float64).reshape(-1, 3)
    f = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    if f.size and (f.min() < 0 or f.max() >= len(v)):
        raise FormatError(f"{path}: face index out of range")
    return v, f


def _content_lines(path):
    for raw in path.read_text(encoding="utf-8").splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            yield line.split()


def _load_off(path):
    lines = _content_lines(path)
    head = next(lines, None)
    if head is None or head[0] != "OFF":
        raise FormatError(f"{path}: missing OFF header")
    counts = head[1:] or next(lines, None)
    if counts is None or len(counts) < 2:
        raise FormatError(f"{path}: missing counts")
    n_verts, n_faces = int(counts[0]), int(counts[1])
    verts = [[float(t) for t in next(lines)[:3]] for _ in range(n_verts)]
    faces = []
    for _ in range(n_faces):
        toks = next(lines)
        if int(toks[0]) != 3:
            raise FormatError(f"{path}: only triangles are supported")
        faces.append([int(t) for t in toks[1:4]])
    return verts, faces


def _load_obj(path):
    verts, faces = [], []
    for toks in _content_lines(path):
        if toks[0] == "v":
            verts.append([float(t) for t in toks[1:4]])
        elif toks[0] == "f":
            if len(toks) != 4:
                raise FormatError(f"{path}: only triangles are supported")
            idx = []
            for t in toks[1:]:
                i = int(t.split("/")[0])
                idx.append(i - 1 if i > 0 else len(verts) + i)
            faces.append(idx)
    return verts, faces


def write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")
