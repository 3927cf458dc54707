"""Feature extraction backends.

A backend turns one rendered view into per-model feature maps for the
textured image and for its horizontal flip. Texturing happens exactly once
per view; both feature sets are extracted from that one image (and its
flip). Re-texturing a flipped render would produce a different texture and
break the pixel correspondence between the two feature sets.

Two implementations:

* DiffusionViTBackend - the production path: depth/normal-conditioned
  diffusion texturing, then diffusion-feature extraction (noise the image
  at the recipe's timesteps, capture UNet block activations) and ViT patch
  features, applied to the textured image and to its horizontal flip.
  Needs a CUDA runtime and model weights; heavy imports are deferred.
* MockChiralBackend - a deterministic CPU stand-in that derives features
  from the render itself (image-frame position, depth, normals). It keeps
  the full export path and its tests runnable without any model runtime;
  the features carry horizontal-orientation information the way real image
  features do.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .rendering import RenderedView, flip_view_horizontal


class BackendUnavailable(Exception):
    """The requested backend cannot run in this environment."""


class MockChiralBackend:
    """Deterministic render-derived features (test/desk backend)."""

    def __init__(self, seed: int = 42, sd_channels: int = 12,
                 dino_channels: int = 8):
        self.seed = seed
        self._channels = {"sd": sd_channels, "dino": dino_channels}
        rng = np.random.default_rng(seed)
        # fixed random projections of the per-pixel descriptor, one per model
        self._weights = {
            name: rng.normal(size=(8, count)) / np.sqrt(8)
            for name, count in self._channels.items()
        }

    def channels(self) -> dict:
        return dict(self._channels)

    def describe(self) -> dict:
        return {"kind": "mock", "seed": self.seed}

    def _features(self, view: RenderedView) -> dict:
        height, width = view.mask.shape
        cols = (np.arange(width) + 0.5) / width
        rows = (np.arange(height) + 0.5) / height
        descriptor = np.stack([
            np.broadcast_to(cols[None, :], (height, width)),
            np.broadcast_to(rows[:, None], (height, width)),
            view.depth_01,
            view.normals[:, :, 0],
            view.normals[:, :, 1],
            view.normals[:, :, 2],
            np.sin(7.0 * view.depth_01),
            np.ones((height, width)),
        ], axis=-1)
        out = {}
        for name, weights in self._weights.items():
            maps = np.tanh(descriptor @ weights)
            maps[~view.mask] = 0.0
            out[name] = maps.astype(np.float32)
        return out

    def process_view(self, view: RenderedView, view_seed: int):
        """Returns (original_maps, flipped_image_maps), each model -> HxWxC."""
        original = self._features(view)
        flipped = self._features(flip_view_horizontal(view))
        return original, flipped


class DiffusionViTBackend:
    """Depth/normal-conditioned texturing + diffusion/ViT feature extraction.

    Per view: (1) texture the render with the category prompt under depth
    and normal guidance; (2) extract diffusion features from the textured
    image by encoding it, noising at the recipe's timesteps, and capturing
    the named UNet block activations (averaged over timesteps, channel-
    concatenated over blocks, upsampled to the pixel grid); (3) extract ViT
    patch features; (4) repeat (2)-(3) on the horizontally flipped image.
    Deterministic per view for a fixed seed.
    """

    SD_CHANNELS = 1280
    DINO_CHANNELS = 768

    def __init__(self, models: dict, diffusion: dict, prompt: str,
                 seed: int = 42):
        self.models = models
        self.diffusion = diffusion
        self.prompt = prompt
        self.seed = seed
        self._runtime = None

    def channels(self) -> dict:
        return {"sd": self.SD_CHANNELS, "dino": self.DINO_CHANNELS}

    def describe(self) -> dict:
        return {"kind": "diffusion", "models": dict(self.models),
                "recipe": dict(self.diffusion), "prompt": self.prompt,
                "seed": self.seed}

    # -- model runtime ------------------------------------------------------

    def _load_runtime(self):
        if self._runtime is not None:
            return self._runtime
        try:
            import torch
            from diffusers import (ControlNetModel,
                                   StableDiffusionControlNetPipeline)
            from transformers import AutoImageProcessor, AutoModel
        except ImportError as exc:
            raise BackendUnavailable(
                f"diffusion backend needs torch/diffusers/transformers "
                f"({exc}); install extras [models] or use the mock backend"
            ) from None
        if not torch.cuda.is_available():
            raise BackendUnavailable(
                "diffusion backend needs a CUDA device; use the mock "
                "backend for CPU runs")
        device = torch.device("cuda")
        controlnets = [
            ControlNetModel.from_pretrained(self.models["controlnet_depth"],
                                            torch_dtype=torch.float16),
            ControlNetModel.from_pretrained(self.models["controlnet_normal"],
                                            torch_dtype=torch.float16),
        ]
        pipe = StableDiffusionControlNetPipeline.from_pretrained(
            self.models["sd"], controlnet=controlnets,
            torch_dtype=torch.float16).to(device)
        vit_processor = AutoImageProcessor.from_pretrained(self.models["dino"])
        vit = AutoModel.from_pretrained(self.models["dino"]).to(device).eval()
        self._runtime = (torch, pipe, vit_processor, vit, device)
        return self._runtime

    # -- texturing ----------------------------------------------------------

    def _texture(self, view: RenderedView, view_seed: int) -> np.ndarray:
        """Texture one render; returns an HxWx3 uint8 image."""
        torch, pipe, _, _, device = self._load_runtime()
        depth_rgb = np.repeat(view.depth_01[..., None], 3, axis=-1)
        normal_rgb = (view.normals + 1.0) / 2.0
        normal_rgb[~view.mask] = 0.0
        conditions = [self._to_image(depth_rgb), self._to_image(normal_rgb)]
        generator = torch.Generator(device=device).manual_seed(view_seed)
        image = pipe(self.prompt, image=conditions,
                     num_inference_steps=int(
                         self.diffusion["num_inference_steps"]),
                     guidance_scale=float(self.diffusion["guidance_scale"]),
                     generator=generator).images[0]
        return np.asarray(image)

    # -- feature extraction -------------------------------------------------

    def _sd_features(self, image: np.ndarray, view_seed: int) -> np.ndarray:
        """UNet block activations of the noised image at fixed timesteps."""
        torch, pipe, _, _, device = self._load_runtime()
        blocks = list(self.diffusion["feature_blocks"])
        timesteps = [int(t) for t in self.diffusion["feature_timesteps"]]

        pixels = torch.from_numpy(
            image.astype(np.float32) / 127.5 - 1.0
        ).permute(2, 0, 1)[None].to(device, dtype=pipe.vae.dtype)
        with torch.no_grad():
            latents = pipe.vae.encode(pixels).latent_dist.mean
            latents = latents * pipe.vae.config.scaling_factor
            prompt_embeds = pipe.encode_prompt(
                self.prompt, device, 1, False)[0]

        captured = {name: [] for name in blocks}
        handles = []

        def hook(name):
            def fn(_module, _inputs, output):
                tensor = output[0] if isinstance(output, tuple) else output
                captured[name].append(tensor.detach().float())
            return fn

        for name in blocks:
            handles.append(self._resolve_block(pipe.unet, name)
                           .register_forward_hook(hook(name)))
        try:
            generator = torch.Generator(device=device).manual_seed(view_seed)
            noise = torch.randn(latents.shape, generator=generator,
                                device=device, dtype=latents.dtype)
            with torch.no_grad():
                for t in timesteps:
                    step = torch.tensor([t], device=device)
                    noisy = pipe.scheduler.add_noise(latents, noise, step)
                    pipe.unet(noisy, step,
                              encoder_hidden_states=prompt_embeds)
        finally:
            for handle in handles:
                handle.remove()

        per_block = []
        shape = image.shape[:2]
        for name in blocks:
            stacked = torch.stack([t[0] for t in captured[name]]).mean(dim=0)
            per_block.append(torch.nn.functional.interpolate(
                stacked[None], size=shape, mode="bilinear",
                align_corners=False)[0])
        joined = torch.cat(per_block, dim=0)
        return joined.permute(1, 2, 0).cpu().numpy()

    def _vit_features(self, image: np.ndarray) -> np.ndarray:
        torch, _, processor, vit, device = self._load_runtime()
        inputs = processor(images=image, return_tensors="pt").to(device)
        with torch.no_grad():
            tokens = vit(**inputs).last_hidden_state[0, 1:]  # drop CLS
        grid = int(np.sqrt(tokens.shape[0]))
        maps = tokens[:grid * grid].reshape(grid, grid, -1).permute(2, 0, 1)
        maps = torch.nn.functional.interpolate(
            maps[None].float(), size=image.shape[:2], mode="bilinear",
            align_corners=False)[0]
        return maps.permute(1, 2, 0).cpu().numpy()

    @staticmethod
    def _resolve_block(unet, dotted: str):
        node = unet
        for part in dotted.split("."):
            node = node[int(part)] if part.isdigit() else getattr(node, part)
        return node

    @staticmethod
    def _to_image(array01):
        from PIL import Image
        return Image.fromarray((np.clip(array01, 0.0, 1.0) *
                                255).astype(np.uint8))

    def _extract(self, image: np.ndarray, mask: np.ndarray,
                 view_seed: int) -> dict:
        out = {}
        for name, maps in (("sd", self._sd_features(image, view_seed)),
                           ("dino", self._vit_features(image))):
            maps = maps.astype(np.float32)
            maps[~mask] = 0.0
            out[name] = maps
        return out

    def process_view(self, view: RenderedView, view_seed: int):
        """Returns (original_maps, flipped_image_maps), each model -> HxWxC."""
        image = self._texture(view, view_seed)
        original = self._extract(image, view.mask, view_seed)
        flipped = self._extract(np.ascontiguousarray(image[:, ::-1]),
                                np.ascontiguousarray(view.mask[:, ::-1]),
                                view_seed)
        return original, flipped


def make_backend(job):
    if job.backend == "mock":
        return MockChiralBackend(seed=job.seed)
    return DiffusionViTBackend(models=job.models, diffusion=job.diffusion,
                               prompt=job.prompt, seed=job.seed)


def stable_view_seed(base_seed: int, view_index: int) -> int:
    """Per-view seed derived stably from the job seed."""
    digest = hashlib.sha256(f"{base_seed}:{view_index}".encode()).digest()
    return int.from_bytes(digest[:4], "little")
