"""Pure-numpy z-buffer triangle rasterizer (fallback backend).

Keeps the exact arithmetic of the compiled kernel (same expressions, same
order) so both backends produce bit-identical buffers. Depth is
interpolated via 1/z, which is affine in screen space and therefore
perspective-correct.
"""

import math

import numpy as np

Z_NEAR = 1e-9
DEGENERATE_AREA = 1e-12

BACKEND = "python"


def rasterize_depth(verts_cam, faces, fx, fy, cx, cy, height, width):
    """Per-pixel nearest surface depth; +inf where nothing is drawn.

    verts_cam: (V, 3) float64 camera-space positions (z forward).
    faces: (F, 3) int64. Faces with any vertex at z <= Z_NEAR are skipped.
    """
    zbuf = np.full((height, width), np.inf, dtype=np.float64)
    if len(faces) == 0 or len(verts_cam) == 0:
        return zbuf

    v = np.asarray(verts_cam, dtype=np.float64)
    f = np.asarray(faces, dtype=np.int64)
    z = v[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = fx * v[:, 0] / z + cx
        vv = fy * v[:, 1] / z + cy

    for i in range(len(f)):
        i0, i1, i2 = f[i]
        z0, z1, z2 = z[i0], z[i1], z[i2]
        if z0 <= Z_NEAR or z1 <= Z_NEAR or z2 <= Z_NEAR:
            continue
        u0, u1, u2 = u[i0], u[i1], u[i2]
        v0, v1, v2 = vv[i0], vv[i1], vv[i2]
        area = (u1 - u0) * (v2 - v0) - (u2 - u0) * (v1 - v0)
        if abs(area) < DEGENERATE_AREA:
            continue
        c_lo = int(math.ceil(min(u0, u1, u2) - 0.5))
        c_hi = int(math.floor(max(u0, u1, u2) - 0.5))
        r_lo = int(math.ceil(min(v0, v1, v2) - 0.5))
        r_hi = int(math.floor(max(v0, v1, v2) - 0.5))
        c_lo = max(c_lo, 0)
        r_lo = max(r_lo, 0)
        c_hi = min(c_hi, width - 1)
        r_hi = min(r_hi, height - 1)
        if c_lo > c_hi or r_lo > r_hi:
            continue

        pu = np.arange(c_lo, c_hi + 1, dtype=np.float64)[None, :] + 0.5
        pv = np.arange(r_lo, r_hi + 1, dtype=np.float64)[:, None] + 0.5
        w0 = ((u1 - pu) * (v2 - pv) - (u2 - pu) * (v1 - pv)) / area
        w1 = ((u2 - pu) * (v0 - pv) - (u0 - pu) * (v2 - pv)) / area
        w2 = 1.0 - w0 - w1
        inside = (w0 >= 0.0) & (w1 >= 0.0) & (w2 >= 0.0)
        if not inside.any():
            continue
        depth = 1.0 / (w0 / z0 + w1 / z1 + w2 / z2)
        sub = zbuf[r_lo:r_hi + 1, c_lo:c_hi + 1]
        np.minimum(sub, np.where(inside, depth, np.inf), out=sub)
    return zbuf
