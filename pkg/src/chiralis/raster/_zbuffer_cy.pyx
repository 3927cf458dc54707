# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled z-buffer triangle rasterizer (hot kernel).

Mirrors _zbuffer_py.rasterize_depth expression-for-expression so the two
backends agree bit-for-bit (the build disables FP contraction).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport ceil, floor, fabs, INFINITY

cnp.import_array()

DEF Z_NEAR = 1e-9
DEF DEGENERATE_AREA = 1e-12

BACKEND = "compiled"


def rasterize_depth(verts_cam, faces, double fx, double fy, double cx,
                    double cy, int height, int width):
    """Per-pixel nearest surface depth; +inf where nothing is drawn."""
    zbuf_arr = np.full((height, width), np.inf, dtype=np.float64)
    cdef const double[:, ::1] vm = np.ascontiguousarray(
        verts_cam, dtype=np.float64)
    cdef const cnp.int64_t[:, ::1] fm = np.ascontiguousarray(
        faces, dtype=np.int64)
    cdef double[:, ::1] zbuf = zbuf_arr
    cdef cnp.int64_t n_faces = fm.shape[0]
    cdef cnp.int64_t n_verts = vm.shape[0]
    if n_faces == 0 or n_verts == 0:
        return zbuf_arr

    cdef double[::1] u = np.empty(n_verts)
    cdef double[::1] vv = np.empty(n_verts)

    cdef cnp.int64_t i, i0, i1, i2
    cdef int r, c, c_lo, c_hi, r_lo, r_hi
    cdef double z0, z1, z2, u0, u1, u2, v0, v1, v2
    cdef double area, pu, pv, w0, w1, w2, depth
    cdef double umin, umax, vmin, vmax, zv

    with nogil:
        for i in range(n_verts):
            zv = vm[i, 2]
            if zv > Z_NEAR:
                u[i] = fx * vm[i, 0] / zv + cx
                vv[i] = fy * vm[i, 1] / zv + cy
            else:
                u[i] = 0.0
                vv[i] = 0.0

        for i in range(n_faces):
            i0 = fm[i, 0]
            i1 = fm[i, 1]
            i2 = fm[i, 2]
            z0 = vm[i0, 2]
            z1 = vm[i1, 2]
            z2 = vm[i2, 2]
            if z0 <= Z_NEAR or z1 <= Z_NEAR or z2 <= Z_NEAR:
                continue
            u0 = u[i0]
            u1 = u[i1]
            u2 = u[i2]
            v0 = vv[i0]
            v1 = vv[i1]
            v2 = vv[i2]
            area = (u1 - u0) * (v2 - v0) - (u2 - u0) * (v1 - v0)
            if fabs(area) < DEGENERATE_AREA:
                continue
            umin = min(u0, min(u1, u2))
            umax = max(u0, max(u1, u2))
            vmin = min(v0, min(v1, v2))
            vmax = max(v0, max(v1, v2))
            c_lo = <int>ceil(umin - 0.5)
            c_hi = <int>floor(umax - 0.5)
            r_lo = <int>ceil(vmin - 0.5)
            r_hi = <int>floor(vmax - 0.5)
            if c_lo < 0:
                c_lo = 0
            if r_lo < 0:
                r_lo = 0
            if c_hi > width - 1:
                c_hi = width - 1
            if r_hi > height - 1:
                r_hi = height - 1
            if c_lo > c_hi or r_lo > r_hi:
                continue
            for r in range(r_lo, r_hi + 1):
                pv = r + 0.5
                for c in range(c_lo, c_hi + 1):
                    pu = c + 0.5
                    w0 = ((u1 - pu) * (v2 - pv) - (u2 - pu) * (v1 - pv)) / area
                    w1 = ((u2 - pu) * (v0 - pv) - (u0 - pu) * (v2 - pv)) / area
                    w2 = 1.0 - w0 - w1
                    if w0 >= 0.0 and w1 >= 0.0 and w2 >= 0.0:
                        depth = 1.0 / (w0 / z0 + w1 / z1 + w2 / z2)
                        if depth < zbuf[r, c]:
                            zbuf[r, c] = depth
    return zbuf_arr
