"""Export job description and job-file parsing."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

DEFAULT_MODELS = {
    "sd": "stabilityai/stable-diffusion-2-1-base",
    "controlnet_depth": "thibaud/controlnet-sd21-depth-diffusers",
    "controlnet_normal": "thibaud/controlnet-sd21-normalbae-diffusers",
    "dino": "facebook/dinov2-base",
}

DEFAULT_DIFFUSION = {
    "num_inference_steps": 30,
    "guidance_scale": 7.5,
    "feature_timesteps": [261, 161, 61],
    "feature_blocks": ["mid_block", "up_blocks.1"],
}


class JobError(Exception):
    """Bad job file or job parameters."""


@dataclass(frozen=True)
class ExportJob:
    """Everything needed to export features for one shape.

    The camera manifest must be the same file the downstream aggregation
    will use; the exporter copies it verbatim next to its outputs.
    """

    mesh: Path
    cameras: Path
    prompt: str
    output_dir: Path
    backend: str = "diffusion"
    seed: int = 42
    models: dict = field(default_factory=lambda: dict(DEFAULT_MODELS))
    diffusion: dict = field(default_factory=lambda: dict(DEFAULT_DIFFUSION))

    def __post_init__(self):
        if self.backend not in ("diffusion", "mock"):
            raise JobError(f"unknown backend {self.backend!r}")
        if not self.prompt:
            raise JobError("a category prompt is required")


def load_job(path) -> ExportJob:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise JobError(f"{path}: cannot read job file ({exc})") from None
    if not isinstance(raw, dict):
        raise JobError(f"{path}: job file must hold a JSON object")
    missing = {"mesh", "cameras", "prompt", "output_dir"} - raw.keys()
    if missing:
        raise JobError(f"{path}: missing job keys {sorted(missing)}")
    base = path.parent

    def resolve(p):
        p = Path(p)
        return p if p.is_absolute() else base / p

    models = dict(DEFAULT_MODELS)
    models.update(raw.get("models", {}))
    diffusion = dict(DEFAULT_DIFFUSION)
    diffusion.update(raw.get("diffusion", {}))
    return ExportJob(
        mesh=resolve(raw["mesh"]),
        cameras=resolve(raw["cameras"]),
        prompt=str(raw["prompt"]),
        output_dir=resolve(raw["output_dir"]),
        backend=raw.get("backend", "diffusion"),
        seed=int(raw.get("seed", 42)),
        models=models,
        diffusion=diffusion,
    )
