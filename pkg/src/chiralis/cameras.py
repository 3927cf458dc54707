"""Camera poses on a ring around the origin, plus JSON manifest I/O.

Conventions: world-to-camera transform is ``x_cam = R @ x_world + t`` with
camera axes x right, y down, z forward (z > 0 in front of the camera).
Pixel coordinates: ``u = fx * x/z + cx`` along the width, ``v = fy * y/z + cy``
along the height; pixel (row, col) covers [col, col+1) x [row, row+1) with
its center at (col + 0.5, row + 0.5).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParameterError, ValidationError

ORTHONORMAL_TOL = 1e-6


@dataclass(frozen=True)
class CameraView:
    """A posed pinhole camera with pixel intrinsics."""

    index: int
    rotation: np.ndarray     # (3, 3) world-to-camera
    translation: np.ndarray  # (3,)
    fx: float
    fy: float
    cx: float
    cy: float
    height: int
    width: int

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=np.float64)
        if rot.shape != (3, 3):
            raise ValidationError(f"rotation must be 3x3, got {rot.shape}")
        residual = np.abs(rot @ rot.T - np.eye(3)).max()
        if residual >= ORTHONORMAL_TOL:
            raise ValidationError(
                f"rotation is not orthonormal (residual {residual:.2e})")
        tr = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if self.height <= 0 or self.width <= 0:
            raise ValidationError("image size must be positive")
        rot = np.ascontiguousarray(rot)
        rot.setflags(write=False)
        tr = np.ascontiguousarray(tr)
        tr.setflags(write=False)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", tr)

    def world_to_camera(self, points: np.ndarray) -> np.ndarray:
        return points @ self.rotation.T + self.translation


def _look_at(position: np.ndarray) -> np.ndarray:
    """World-to-camera rotation for a camera at `position` facing the origin."""
    forward = -position / np.linalg.norm(position)
    up_hint = np.array([0.0, 1.0, 0.0])
    if abs(forward @ up_hint) > 0.999:
        up_hint = np.array([0.0, 0.0, 1.0])
    side = np.cross(forward, up_hint)
    side /= np.linalg.norm(side)
    up = np.cross(side, forward)
    # rows: x right, y down, z forward
    return np.stack([side, -up, forward], axis=0)


def generate_camera_ring(
    n_views: int,
    radius: float = 2.0,
    elevations_deg=(-15.0, 15.0),
    image_size: int = 256,
    focal: float = None,
) -> list[CameraView]:
    """Evenly spaced azimuth ring of cameras per elevation, all facing the origin.

    The caller is expected to have centered the shape at the origin and
    scaled it into the unit bounding sphere. `n_views` cameras are placed
    per elevation; view indices run elevation-major. The default focal
    length keeps the unit sphere inside the frame for radius >= 1.3.
    """
    if n_views <= 0:
        raise ParameterError(f"n_views must be positive, got {n_views}")
    if radius <= 0:
        raise ParameterError(f"radius must be positive, got {radius}")
    if image_size <= 0:
        raise ParameterError(f"image_size must be positive, got {image_size}")
    elevations = list(elevations_deg)
    if not elevations:
        raise ParameterError("at least one elevation is required")
    if focal is None:
        focal = 0.75 * image_size
    center = image_size / 2.0

    views = []
    index = 0
    for elev in elevations:
        el = math.radians(elev)
        for j in range(n_views):
            az = 2.0 * math.pi * j / n_views
            position = radius * np.array([
                math.cos(el) * math.cos(az),
                math.sin(el),
                math.cos(el) * math.sin(az),
            ])
            rotation = _look_at(position)
            translation = -rotation @ position
            views.append(CameraView(
                index=index, rotation=rotation, translation=translation,
                fx=focal, fy=focal, cx=center, cy=center,
                height=image_size, width=image_size))
            index += 1
    return views


# ---------------------------------------------------------------------------
# manifest I/O


def views_to_manifest(views: list[CameraView]) -> dict:
    return {
        "views": [
            {
                "index": v.index,
                "rotation": [float(x) for x in v.rotation.reshape(-1)],
                "translation": [float(x) for x in v.translation],
                "fx": v.fx, "fy": v.fy, "cx": v.cx, "cy": v.cy,
                "height": v.height, "width": v.width,
            }
            for v in views
        ]
    }


def views_from_manifest(manifest: dict) -> list[CameraView]:
    try:
        entries = manifest["views"]
    except (KeyError, TypeError):
        raise ValidationError("camera manifest has no 'views' list") from None
    views = []
    for entry in entries:
        try:
            views.append(CameraView(
                index=int(entry["index"]),
                rotation=np.asarray(entry["rotation"],
                                    dtype=np.float64).reshape(3, 3),
                translation=np.asarray(entry["translation"], dtype=np.float64),
                fx=float(entry["fx"]), fy=float(entry["fy"]),
                cx=float(entry["cx"]), cy=float(entry["cy"]),
                height=int(entry["height"]), width=int(entry["width"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"bad camera manifest entry: {exc}") from None
    return views


def save_camera_manifest(path, views: list[CameraView]) -> None:
    Path(path).write_text(
        json.dumps(views_to_manifest(views), indent=2, sort_keys=True) + "\n",
        encoding="utf-8")


def load_camera_manifest(path) -> list[CameraView]:
    try:
        manifest = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON ({exc})") from None
    return views_from_manifest(manifest)
