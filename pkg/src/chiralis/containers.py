"""Binary feature containers and their JSON sidecar manifests.

Container layout, little-endian throughout:

    magic "CFV1" (4 bytes)
    version      u32
    kind         u8   (1 = view_maps, 2 = vertex_features)
    reserved     3 bytes (zero)
    dims         u32 each: (N, H, W, C) for view_maps, (V, D) for
                 vertex_features
    payload      f32 row-major:
                 view_maps:        N*H*W*C feature values, then N*H*W
                                   mask values (0.0 or 1.0)
                 vertex_features:  V*D feature values, then V view counts
    crc32        u32 over every preceding byte

Features upstream are f32, so storage is lossless for them; float64
inputs are quantized on write.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ContainerError, ValidationError
from .projection import FeatureMap

MAGIC = b"CFV1"
VERSION = 1

KIND_VIEW_MAPS = 1
KIND_VERTEX_FEATURES = 2

_KIND_NAMES = {KIND_VIEW_MAPS: "view_maps",
               KIND_VERTEX_FEATURES: "vertex_features"}


@dataclass(frozen=True)
class FeatureContainer:
    """In-memory form of one container file."""

    kind: str                # "view_maps" or "vertex_features"
    data: np.ndarray         # (N,H,W,C) or (V,D) float32
    aux: np.ndarray          # masks (N,H,W) float32 or view counts (V,) float32
    version: int = VERSION

    def __post_init__(self):
        if self.kind not in _KIND_NAMES.values():
            raise ValidationError(f"unknown container kind {self.kind!r}")
        data = np.ascontiguousarray(self.data, dtype=np.float32)
        aux = np.ascontiguousarray(self.aux, dtype=np.float32)
        if self.kind == "view_maps":
            if data.ndim != 4 or aux.shape != data.shape[:3]:
                raise ValidationError(
                    f"view_maps needs data (N,H,W,C) and masks (N,H,W); got "
                    f"{data.shape} and {aux.shape}")
        else:
            if data.ndim != 2 or aux.shape != (len(data),):
                raise ValidationError(
                    f"vertex_features needs data (V,D) and counts (V,); got "
                    f"{data.shape} and {aux.shape}")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "aux", aux)


def container_from_maps(maps: list[FeatureMap]) -> FeatureContainer:
    if not maps:
        raise ValidationError("need at least one feature map")
    shapes = {m.data.shape for m in maps}
    if len(shapes) != 1:
        raise ValidationError(f"feature maps disagree on shape: {shapes}")
    data = np.stack([m.data for m in maps]).astype(np.float32)
    masks = np.stack([m.mask for m in maps]).astype(np.float32)
    return FeatureContainer(kind="view_maps", data=data, aux=masks)


def maps_from_container(container: FeatureContainer) -> list[FeatureMap]:
    if container.kind != "view_maps":
        raise ValidationError(
            f"expected a view_maps container, got {container.kind}")
    return [FeatureMap(container.data[i].astype(np.float64),
                       container.aux[i] > 0.5)
            for i in range(len(container.data))]


def container_from_vertex_features(features: np.ndarray,
                                   view_count: np.ndarray) -> FeatureContainer:
    return FeatureContainer(kind="vertex_features",
                            data=np.asarray(features, dtype=np.float32),
                            aux=np.asarray(view_count, dtype=np.float32))


def vertex_features_from_container(container: FeatureContainer):
    """Returns (features (V,D) float64, view_count (V,) int64)."""
    if container.kind != "vertex_features":
        raise ValidationError(
            f"expected a vertex_features container, got {container.kind}")
    return (container.data.astype(np.float64),
            container.aux.astype(np.int64))


def write_container(path, container: FeatureContainer) -> None:
    kind_code = {v: k for k, v in _KIND_NAMES.items()}[container.kind]
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<IB3x", VERSION, kind_code)
    dims = container.data.shape
    blob += struct.pack(f"<{len(dims)}I", *dims)
    blob += container.data.astype("<f4").tobytes()
    blob += container.aux.astype("<f4").tobytes()
    blob += struct.pack("<I", zlib.crc32(bytes(blob)) & 0xFFFFFFFF)
    Path(path).write_bytes(bytes(blob))


def read_container(path) -> FeatureContainer:
    blob = Path(path).read_bytes()
    if len(blob) < 12:
        raise ContainerError(f"{path}: file too short to be a container")
    if blob[:4] != MAGIC:
        raise ContainerError(f"{path}: bad magic {blob[:4]!r}")
    version, kind_code = struct.unpack("<IB3x", blob[4:12])
    if version != VERSION:
        raise ContainerError(f"{path}: unsupported version {version}")
    if kind_code not in _KIND_NAMES:
        raise ContainerError(f"{path}: unknown kind code {kind_code}")
    kind = _KIND_NAMES[kind_code]
    n_dims = 4 if kind == "view_maps" else 2
    header_end = 12 + 4 * n_dims
    if len(blob) < header_end:
        raise ContainerError(f"{path}: truncated header")
    dims = struct.unpack(f"<{n_dims}I", blob[12:header_end])

    if kind == "view_maps":
        n, h, w, c = dims
        data_count = n * h * w * c
        aux_count = n * h * w
        aux_shape = (n, h, w)
    else:
        v, d = dims
        data_count = v * d
        aux_count = v
        aux_shape = (v,)
    expected = header_end + 4 * (data_count + aux_count) + 4
    if len(blob) != expected:
        raise ContainerError(
            f"{path}: size mismatch (got {len(blob)} bytes, expected "
            f"{expected} for dims {dims})")
    stored_crc = struct.unpack("<I", blob[-4:])[0]
    if stored_crc != (zlib.crc32(blob[:-4]) & 0xFFFFFFFF):
        raise ContainerError(f"{path}: checksum mismatch")

    flat = np.frombuffer(blob[header_end:-4], dtype="<f4")
    data = flat[:data_count].reshape(dims)
    aux = flat[data_count:].reshape(aux_shape)
    return FeatureContainer(kind=kind, data=data, aux=aux, version=version)


# ---------------------------------------------------------------------------
# JSON sidecar manifests


def write_manifest(path, manifest: dict) -> None:
    Path(path).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n",
        encoding="utf-8")


def read_manifest(path) -> dict:
    try:
        manifest = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(manifest, dict):
        raise ValidationError(f"{path}: manifest must be a JSON object")
    return manifest
