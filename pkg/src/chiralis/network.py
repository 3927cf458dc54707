"""The chirality extractor: a two-layer encoder, a linear projection whose
first output coordinate carries the left/right score, and a mirror decoder
used by the reconstruction loss.

The score head divides the first coordinate of the projected vector by the
vector's L2 norm (epsilon-guarded), which pins scores to [-1, 1] and makes
them invariant to positive scaling. A tanh head over the first coordinate
is kept as an alternative.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .errors import ParameterError, ValidationError

NORM_EPS = 1e-12

HEAD_MODES = ("normalized", "tanh")


@dataclass(frozen=True)
class NetworkParams:
    """All learnable arrays. Weights are stored (in, out): y = x @ w + b.

    Also used as the container for parameter-shaped gradients and
    optimizer moments.
    """

    enc_w1: np.ndarray  # (D, D)
    enc_b1: np.ndarray  # (D,)
    enc_w2: np.ndarray  # (D, D)
    enc_b2: np.ndarray  # (D,)
    proj: np.ndarray    # (D, D)
    dec_w1: np.ndarray  # (D, D)
    dec_b1: np.ndarray  # (D,)
    dec_w2: np.ndarray  # (D, D)
    dec_b2: np.ndarray  # (D,)

    def __post_init__(self):
        for name in self.arrays():
            object.__setattr__(self, name,
                               np.asarray(getattr(self, name), dtype=np.float64))
        d = self.enc_w1.shape[0] if self.enc_w1.ndim else 0
        for name, arr in self.arrays().items():
            expected = (d,) if name.endswith(("b1", "b2")) else (d, d)
            if arr.shape != expected:
                raise ValidationError(
                    f"{name} has shape {arr.shape}, expected {expected}")
            if not np.isfinite(arr).all():
                raise ValidationError(f"{name} contains non-finite entries")

    def arrays(self) -> dict[str, np.ndarray]:
        """Field name -> array, in declaration order (checkpoint order)."""
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @property
    def dim(self) -> int:
        return self.enc_w1.shape[0]

    def map(self, fn) -> "NetworkParams":
        return NetworkParams(**{k: fn(v) for k, v in self.arrays().items()})


def init_params(dim: int, seed: int) -> NetworkParams:
    """Seeded uniform init in [-1/sqrt(D), 1/sqrt(D)] per layer."""
    if dim <= 0:
        raise ParameterError(f"dim must be positive, got {dim}")
    rng = np.random.default_rng(seed)
    bound = 1.0 / np.sqrt(dim)

    def uniform(*shape):
        return rng.uniform(-bound, bound, size=shape)

    return NetworkParams(
        enc_w1=uniform(dim, dim), enc_b1=uniform(dim),
        enc_w2=uniform(dim, dim), enc_b2=uniform(dim),
        proj=uniform(dim, dim),
        dec_w1=uniform(dim, dim), dec_b1=uniform(dim),
        dec_w2=uniform(dim, dim), dec_b2=uniform(dim),
    )


def zeros_like_params(params: NetworkParams) -> NetworkParams:
    return params.map(np.zeros_like)


def encode(params: NetworkParams, x: np.ndarray) -> np.ndarray:
    """Two-layer encoder with ReLU in between; accepts (D,) or (N, D)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != params.dim:
        raise ValidationError(
            f"input dim {x.shape[-1]} does not match network dim {params.dim}")
    hidden = np.maximum(x @ params.enc_w1 + params.enc_b1, 0.0)
    return hidden @ params.enc_w2 + params.enc_b2


def decode(params: NetworkParams, code: np.ndarray) -> np.ndarray:
    hidden = np.maximum(code @ params.dec_w1 + params.dec_b1, 0.0)
    return hidden @ params.dec_w2 + params.dec_b2


def score_from_projection(projected: np.ndarray, mode: str) -> np.ndarray:
    """Head applied to already-projected vectors; last axis is the feature."""
    if mode == "normalized":
        norms = np.sqrt((projected ** 2).sum(axis=-1))
        return projected[..., 0] / np.maximum(norms, NORM_EPS)
    if mode == "tanh":
        return np.tanh(projected[..., 0])
    raise ParameterError(f"unknown head mode {mode!r}; expected one of "
                         f"{HEAD_MODES}")


def chirality_score(params: NetworkParams, features: np.ndarray,
                    mode: str = "normalized") -> np.ndarray:
    """Left/right score in [-1, 1] for one feature vector or a stack of rows."""
    projected = encode(params, features) @ params.proj
    return score_from_projection(projected, mode)


@dataclass(frozen=True)
class ChiralityField:
    """Per-vertex scores for the original and counterpart features.

    `included` marks vertices that were visible in at least one view;
    excluded ones carry 0 and must be skipped by losses and metrics.
    """

    chi: np.ndarray       # (V,) in [-1, 1]
    chi_bar: np.ndarray   # (V,) in [-1, 1]
    included: np.ndarray  # (V,) bool

    def __post_init__(self):
        chi = np.asarray(self.chi, dtype=np.float64).reshape(-1)
        chi_bar = np.asarray(self.chi_bar, dtype=np.float64).reshape(-1)
        included = np.asarray(self.included, dtype=bool).reshape(-1)
        if not (len(chi) == len(chi_bar) == len(included)):
            raise ValidationError("field arrays must have equal length")
        for name, arr in (("chi", chi), ("chi_bar", chi_bar)):
            if arr.size and (np.abs(arr).max() > 1.0 + 1e-12 or
                             not np.isfinite(arr).all()):
                raise ValidationError(f"{name} entries must lie in [-1, 1]")
        object.__setattr__(self, "chi", chi)
        object.__setattr__(self, "chi_bar", chi_bar)
        object.__setattr__(self, "included", included)

    def __len__(self) -> int:
        return len(self.chi)


def infer_field(params: NetworkParams, pair, mode: str = "normalized"
                ) -> ChiralityField:
    """Score every vertex of a chiral pair; zero-view rows get 0, excluded."""
    if pair.dim != params.dim:
        raise ValidationError(
            f"pair dim {pair.dim} does not match network dim {params.dim}")
    included = pair.included
    chi = np.zeros(pair.n_vertices, dtype=np.float64)
    chi_bar = np.zeros(pair.n_vertices, dtype=np.float64)
    if included.any():
        chi[included] = chirality_score(params, pair.features[included], mode)
        chi_bar[included] = chirality_score(params, pair.counterpart[included],
                                            mode)
    return ChiralityField(chi=chi, chi_bar=chi_bar, included=included)
