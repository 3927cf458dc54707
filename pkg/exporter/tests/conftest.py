import json
import math
from pathlib import Path

import numpy as np
import pytest


def sphere_off_text(n_lat=10, n_lon=12, radius=1.0):
    verts = [(0.0, radius, 0.0), (0.0, -radius, 0.0)]
    for i in range(1, n_lat):
        theta = math.pi * i / n_lat
        for j in range(n_lon):
            phi = 2.0 * math.pi * j / n_lon
            verts.append((radius * math.sin(theta) * math.cos(phi),
                          radius * math.cos(theta),
                          radius * math.sin(theta) * math.sin(phi)))

    def ring(i, j):
        return 2 + (i - 1) * n_lon + (j % n_lon)

    faces = []
    for j in range(n_lon):
        faces.append((0, ring(1, j + 1), ring(1, j)))
        faces.append((1, ring(n_lat - 1, j), ring(n_lat - 1, j + 1)))
    for i in range(1, n_lat - 1):
        for j in range(n_lon):
            a, b = ring(i, j), ring(i, j + 1)
            c, d = ring(i + 1, j), ring(i + 1, j + 1)
            faces.append((a, b, c))
            faces.append((b, d, c))

    lines = ["OFF", f"{len(verts)} {len(faces)} 0"]
    lines += [f"{x!r} {y!r} {z!r}" for x, y, z in verts]
    lines += [f"3 {a} {b} {c}" for a, b, c in faces]
    return "\n".join(lines) + "\n"


def two_camera_manifest(size=64, focal=48.0):
    # camera 0 on -z looking at the origin, camera 1 on +z looking back
    c = size / 2.0
    views = [
        {"index": 0, "rotation": [1, 0, 0, 0, 1, 0, 0, 0, 1],
         "translation": [0.0, 0.0, 2.0]},
        {"index": 1, "rotation": [-1, 0, 0, 0, 1, 0, 0, 0, -1],
         "translation": [0.0, 0.0, 2.0]},
    ]
    for v in views:
        v.update({"fx": focal, "fy": focal, "cx": c, "cy": c,
                  "height": size, "width": size})
    return {"views": views}


@pytest.fixture()
def workspace(tmp_path):
    mesh = tmp_path / "shape.off"
    mesh.write_text(sphere_off_text(), encoding="utf-8")
    cameras = tmp_path / "cameras.json"
    cameras.write_text(json.dumps(two_camera_manifest(), indent=2,
                                  sort_keys=True) + "\n", encoding="utf-8")
    job_file = tmp_path / "job.json"
    job_file.write_text(json.dumps({
        "mesh": "shape.off",
        "cameras": "cameras.json",
        "prompt": "a photo of a sphere",
        "output_dir": "out",
        "backend": "mock",
        "seed": 7,
    }, indent=2) + "\n", encoding="utf-8")
    return tmp_path
