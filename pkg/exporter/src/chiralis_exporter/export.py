"""Export orchestration: render every view, run the backend, write outputs.

Outputs in the job's output directory:

* features_original.cfv  - view_maps container of the textured images
* features_flipped.cfv   - view_maps container of the flipped images
* cameras.json           - byte-identical copy of the input camera manifest
* export.json            - job echo: models, per-model channels, total
                           channel count, per-view seeds, provenance

Both containers store the per-model maps concatenated along channels in a
fixed model order, raw (no normalization); export.json records the channel
split so the consumer can normalize and join them per its own rules.
Containers are written to temp files and atomically renamed into place.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .backends import make_backend, stable_view_seed
from .formats import load_cameras, load_mesh, write_json, write_view_maps
from .job import ExportJob

MODEL_ORDER = ("sd", "dino")
PROVENANCE = "chiralis-exporter 0.1.0"


@dataclass(frozen=True)
class ExportResult:
    original: Path
    flipped: Path
    cameras: Path
    manifest: Path
    n_views: int
    total_channels: int


def _join_models(maps: dict) -> np.ndarray:
    return np.concatenate([maps[name] for name in MODEL_ORDER], axis=-1)


def _atomic_write(path: Path, writer) -> None:
    tmp = path.with_name(f".{path.name}.tmp")
    writer(tmp)
    os.replace(tmp, path)


def export_features(job: ExportJob, backend=None) -> ExportResult:
    """Run the full export for one shape; see the module docstring."""
    from .rendering import render_view

    vertices, faces = load_mesh(job.mesh)
    cameras = sorted(load_cameras(job.cameras), key=lambda c: c.index)
    sizes = {(c.height, c.width) for c in cameras}
    if len(sizes) != 1:
        raise ValueError(f"cameras disagree on image size: {sizes}")
    if backend is None:
        backend = make_backend(job)

    original_stack, flipped_stack = [], []
    original_masks, flipped_masks = [], []
    view_seeds = []
    for camera in cameras:
        view = render_view(vertices, faces, camera)
        seed = stable_view_seed(job.seed, camera.index)
        view_seeds.append(seed)
        original, flipped = backend.process_view(view, seed)
        original_stack.append(_join_models(original))
        flipped_stack.append(_join_models(flipped))
        original_masks.append(view.mask)
        flipped_masks.append(view.mask[:, ::-1])

    out = Path(job.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    original_path = out / "features_original.cfv"
    flipped_path = out / "features_flipped.cfv"
    cameras_path = out / "cameras.json"
    manifest_path = out / "export.json"

    features = np.stack(original_stack)
    _atomic_write(original_path,
                  lambda p: write_view_maps(p, features,
                                            np.stack(original_masks)))
    _atomic_write(flipped_path,
                  lambda p: write_view_maps(p, np.stack(flipped_stack),
                                            np.stack(flipped_masks)))
    # the consumer must see the exact same view parameters: copy verbatim
    cameras_path.write_bytes(Path(job.cameras).read_bytes())

    channels = backend.channels()
    write_json(manifest_path, {
        "mesh": str(job.mesh),
        "prompt": job.prompt,
        "cameras": cameras_path.name,
        "containers": {"original": original_path.name,
                       "flipped": flipped_path.name},
        "backend": backend.describe(),
        "channels_per_model": {name: int(channels[name])
                               for name in MODEL_ORDER},
        "total_channels": int(sum(channels.values())),
        "view_seeds": view_seeds,
        "provenance": PROVENANCE,
    })
    return ExportResult(original=original_path, flipped=flipped_path,
                        cameras=cameras_path, manifest=manifest_path,
                        n_views=len(cameras),
                        total_channels=int(sum(channels.values())))
