"""Guidance-map rendering: depth, camera-space normals, foreground mask.

A plain numpy z-buffer rasterizer that also tracks the winning face per
pixel, from which the normal map is filled in. Depth for model guidance is
normalized to [0, 1] inside the mask (near = 1, far = 0, the common depth
conditioning convention).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .formats import Camera

Z_NEAR = 1e-9


@dataclass(frozen=True)
class RenderedView:
    """Untextured render of one camera view."""

    depth: np.ndarray      # (H, W) camera z, +inf outside the mask
    depth_01: np.ndarray   # (H, W) in [0, 1], 0 outside the mask
    normals: np.ndarray    # (H, W, 3) camera-space unit normals, 0 outside
    mask: np.ndarray       # (H, W) bool

    @property
    def height(self):
        return self.mask.shape[0]

    @property
    def width(self):
        return self.mask.shape[1]


def flip_view_horizontal(view: RenderedView) -> RenderedView:
    """Mirror a render left-right; the x-component of the normals flips."""
    normals = view.normals[:, ::-1].copy()
    normals[:, :, 0] *= -1.0
    return RenderedView(
        depth=np.ascontiguousarray(view.depth[:, ::-1]),
        depth_01=np.ascontiguousarray(view.depth_01[:, ::-1]),
        normals=normals,
        mask=np.ascontiguousarray(view.mask[:, ::-1]))


def render_view(vertices: np.ndarray, faces: np.ndarray,
                camera: Camera) -> RenderedView:
    cam_pts = vertices @ camera.rotation.T + camera.translation
    height, width = camera.height, camera.width
    zbuf = np.full((height, width), np.inf)
    face_id = np.full((height, width), -1, dtype=np.int64)

    z = cam_pts[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = camera.fx * cam_pts[:, 0] / z + camera.cx
        v = camera.fy * cam_pts[:, 1] / z + camera.cy

    for i in range(len(faces)):
        i0, i1, i2 = faces[i]
        z0, z1, z2 = z[i0], z[i1], z[i2]
        if min(z0, z1, z2) <= Z_NEAR:
            continue
        u0, u1, u2 = u[i0], u[i1], u[i2]
        v0, v1, v2 = v[i0], v[i1], v[i2]
        area = (u1 - u0) * (v2 - v0) - (u2 - u0) * (v1 - v0)
        if abs(area) < 1e-12:
            continue
        c_lo = max(int(np.ceil(min(u0, u1, u2) - 0.5)), 0)
        c_hi = min(int(np.floor(max(u0, u1, u2) - 0.5)), width - 1)
        r_lo = max(int(np.ceil(min(v0, v1, v2) - 0.5)), 0)
        r_hi = min(int(np.floor(max(v0, v1, v2) - 0.5)), height - 1)
        if c_lo > c_hi or r_lo > r_hi:
            continue
        pu = np.arange(c_lo, c_hi + 1)[None, :] + 0.5
        pv = np.arange(r_lo, r_hi + 1)[:, None] + 0.5
        w0 = ((u1 - pu) * (v2 - pv) - (u2 - pu) * (v1 - pv)) / area
        w1 = ((u2 - pu) * (v0 - pv) - (u0 - pu) * (v2 - pv)) / area
        w2 = 1.0 - w0 - w1
        inside = (w0 >= 0.0) & (w1 >= 0.0) & (w2 >= 0.0)
        if not inside.any():
            continue
        depth = 1.0 / (w0 / z0 + w1 / z1 + w2 / z2)
        sub = zbuf[r_lo:r_hi + 1, c_lo:c_hi + 1]
        sub_id = face_id[r_lo:r_hi + 1, c_lo:c_hi + 1]
        better = inside & (depth < sub)
        sub[better] = depth[better]
        sub_id[better] = i

    mask = np.isfinite(zbuf)

    # camera-space face normals for covered pixels
    cam_faces = cam_pts[faces] if len(faces) else np.zeros((0, 3, 3))
    if len(faces):
        fn = np.cross(cam_faces[:, 1] - cam_faces[:, 0],
                      cam_faces[:, 2] - cam_faces[:, 0])
        fn /= np.maximum(np.linalg.norm(fn, axis=1, keepdims=True), 1e-12)
        # orient normals toward the camera (-z side)
        flip = fn[:, 2] > 0
        fn[flip] *= -1.0
    normals = np.zeros((height, width, 3))
    covered = face_id >= 0
    normals[covered] = fn[face_id[covered]]

    depth_01 = np.zeros((height, width))
    if mask.any():
        near = zbuf[mask].min()
        far = zbuf[mask].max()
        span = max(far - near, 1e-12)
        depth_01[mask] = (far - zbuf[mask]) / span

    return RenderedView(depth=zbuf, depth_01=depth_01, normals=normals,
                        mask=mask)
