#!/usr/bin/env python3
"""Benchmark the z-buffer rasterizer backends (compiled vs pure Python).

Usage: python benchmarks/bench_zbuffer.py [--image-size 512] [--repeats 3]
"""

import argparse
import time

import numpy as np

from chiralis.cameras import generate_camera_ring
from chiralis.raster import available_backends
from chiralis.synthetic import make_bilateral_mesh


def run_backend(fn, cam_pts, faces, view, repeats):
    best = np.inf
    result = None
    for _ in range(repeats):
        start = time.perf_counter()
        result = fn(cam_pts, faces, view.fx, view.fy, view.cx, view.cy,
                    view.height, view.width)
        best = min(best, time.perf_counter() - start)
    return best, result


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--image-size", type=int, default=512)
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--n-lat", type=int, default=60)
    parser.add_argument("--n-lon", type=int, default=80)
    args = parser.parse_args()

    mesh = make_bilateral_mesh(n_lat=args.n_lat, n_lon=args.n_lon, seed=0)
    (view,) = generate_camera_ring(1, radius=2.0, elevations_deg=(15.0,),
                                   image_size=args.image_size)
    cam_pts = mesh.vertices @ view.rotation.T + view.translation

    backends = available_backends()
    print(f"mesh: {mesh.n_vertices} vertices, {mesh.n_faces} faces; "
          f"image {args.image_size}x{args.image_size}")
    results = {}
    for name, fn in backends.items():
        seconds, zbuf = run_backend(fn, cam_pts, mesh.faces, view,
                                    args.repeats)
        results[name] = (seconds, zbuf)
        covered = int(np.isfinite(zbuf).sum())
        print(f"  {name:>9}: {seconds * 1e3:8.2f} ms  "
              f"({covered} pixels covered)")

    if len(results) == 2:
        py_t, py_z = results["python"]
        cy_t, cy_z = results["compiled"]
        identical = np.array_equal(py_z, cy_z)
        print(f"  speedup: {py_t / cy_t:.1f}x, outputs bit-identical: "
              f"{identical}")
        if not identical:
            raise SystemExit("backend outputs differ")
    else:
        print("  compiled backend unavailable; nothing to compare")


if __name__ == "__main__":
    main()
