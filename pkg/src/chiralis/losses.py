"""The four training losses and their exact gradients.

All losses act on the stacked original/counterpart feature rows of one
shape. Subgradient conventions, fixed so results are deterministic and
finite-difference-checkable:

* ReLU' (0) = 0.
* d|x|/dx = sign(x), with sign(0) = 0.
* The norm guards max(||.||, 1e-12) are differentiated as written: where a
  guard is active the norm is a constant, so its derivative contribution
  vanishes.
* The infinity-norm subgradient picks the first index attaining the max.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError, ValidationError
from .network import NetworkParams, zeros_like_params

EPS = 1e-12


@dataclass(frozen=True)
class LossWeights:
    """Multipliers for the reconstruction, smoothness, and balance terms."""

    reconstruction: float = 1.0
    smoothness: float = 1.0
    balance: float = 1.0

    def __post_init__(self):
        if min(self.reconstruction, self.smoothness, self.balance) < 0:
            raise ValidationError("loss weights must be nonnegative")


@dataclass(frozen=True)
class LossBreakdown:
    """Unweighted term values plus the weighted total."""

    dissimilarity: float
    reconstruction: float
    smoothness: float
    balance: float
    total: float

    def as_row(self) -> tuple:
        return (self.dissimilarity, self.reconstruction, self.smoothness,
                self.balance, self.total)


def _check_pair_dims(feats, counter):
    if feats.shape != counter.shape or feats.ndim != 2:
        raise ValidationError(
            f"feature matrices must be equal-shape (V, D); got "
            f"{feats.shape} and {counter.shape}")


def dissimilarity_loss(chi: np.ndarray, chi_bar: np.ndarray) -> float:
    """-||chi - chi_bar||_2 / sqrt(V): the main separation objective."""
    chi = np.asarray(chi, dtype=np.float64)
    chi_bar = np.asarray(chi_bar, dtype=np.float64)
    if chi.shape != chi_bar.shape:
        raise ValidationError("score vectors must have equal length")
    n = len(chi)
    return float(-np.linalg.norm(chi - chi_bar) / np.sqrt(n))


def reconstruction_loss(features: np.ndarray, counterpart: np.ndarray,
                        params: NetworkParams) -> float:
    """Frobenius autoencoding error over the 2V stacked rows, / sqrt(V).

    The prefactor uses the vertex count V even though both the original
    and counterpart rows are stacked.
    """
    from .network import decode, encode
    feats = np.asarray(features, dtype=np.float64)
    counter = np.asarray(counterpart, dtype=np.float64)
    _check_pair_dims(feats, counter)
    stacked = np.concatenate([feats, counter], axis=0)
    residual = stacked - decode(params, encode(params, stacked))
    return float(np.linalg.norm(residual) / np.sqrt(len(feats)))


def smoothness_loss(chi: np.ndarray, chi_bar: np.ndarray,
                    edges: np.ndarray) -> float:
    """Mean absolute score difference across graph edges (total variation)."""
    edges = np.asarray(edges, dtype=np.int64)
    if edges.size == 0:
        raise ValidationError("smoothness loss needs a non-empty edge set")
    if edges.ndim != 2 or edges.shape[1] != 2:
        raise ValidationError(f"edges must be (E, 2), got {edges.shape}")
    chi = np.asarray(chi, dtype=np.float64)
    chi_bar = np.asarray(chi_bar, dtype=np.float64)
    if edges.min() < 0 or edges.max() >= len(chi):
        raise ValidationError("edge index out of range")
    u, v = edges[:, 0], edges[:, 1]
    diffs = np.abs(chi[u] - chi[v]) + np.abs(chi_bar[u] - chi_bar[v])
    return float(diffs.sum() / len(edges))


def balance_loss(chi: np.ndarray, chi_bar: np.ndarray) -> float:
    """Penalty on signed score mass: pushes toward an even left/right split."""
    chi = np.asarray(chi, dtype=np.float64)
    chi_bar = np.asarray(chi_bar, dtype=np.float64)
    n = len(chi)

    def term(x):
        return abs(x.sum()) / max(np.abs(x).max(initial=0.0), EPS)

    return float((term(chi) + term(chi_bar)) / n)


# ---------------------------------------------------------------------------
# combined forward/backward


def _forward(features, counterpart, edges, params, weights, mode):
    """Run the full graph once; returns the breakdown and a cache for backward."""
    feats = np.asarray(features, dtype=np.float64)
    counter = np.asarray(counterpart, dtype=np.float64)
    _check_pair_dims(feats, counter)
    n_verts = len(feats)
    if n_verts == 0:
        raise ValidationError("no vertices to train on")
    edges = np.asarray(edges, dtype=np.int64)
    if edges.size == 0:
        edges = edges.reshape(0, 2)
        if weights.smoothness != 0.0:
            raise ValidationError("smoothness loss needs a non-empty edge set")
    elif edges.min() < 0 or edges.max() >= n_verts:
        raise ValidationError("edge index out of range")

    stacked = np.concatenate([feats, counter], axis=0)

    # encoder
    z1 = stacked @ params.enc_w1 + params.enc_b1
    a1 = np.maximum(z1, 0.0)
    code = a1 @ params.enc_w2 + params.enc_b2

    # score head
    projected = code @ params.proj
    norms = np.sqrt((projected ** 2).sum(axis=1))
    guarded = np.maximum(norms, EPS)
    if mode == "normalized":
        scores = projected[:, 0] / guarded
    elif mode == "tanh":
        scores = np.tanh(projected[:, 0])
    else:
        raise ValidationError(f"unknown head mode {mode!r}")
    chi, chi_bar = scores[:n_verts], scores[n_verts:]

    # decoder
    z3 = code @ params.dec_w1 + params.dec_b1
    a3 = np.maximum(z3, 0.0)
    recon = a3 @ params.dec_w2 + params.dec_b2
    residual = stacked - recon

    sqrt_v = np.sqrt(n_verts)
    delta = chi - chi_bar
    delta_norm = np.linalg.norm(delta)
    loss_dis = -delta_norm / sqrt_v

    res_norm = np.linalg.norm(residual)
    loss_inv = res_norm / sqrt_v

    if len(edges):
        eu, ev = edges[:, 0], edges[:, 1]
        loss_var = float(
            (np.abs(chi[eu] - chi[ev]) + np.abs(chi_bar[eu] - chi_bar[ev])).sum()
            / len(edges))
    else:
        loss_var = 0.0

    abs_max = np.abs(chi).max(initial=0.0)
    abs_max_bar = np.abs(chi_bar).max(initial=0.0)
    g_max = max(abs_max, EPS)
    g_max_bar = max(abs_max_bar, EPS)
    loss_fif = (abs(chi.sum()) / g_max + abs(chi_bar.sum()) / g_max_bar) / n_verts

    total = (loss_dis + weights.reconstruction * loss_inv +
             weights.smoothness * loss_var + weights.balance * loss_fif)
    breakdown = LossBreakdown(
        dissimilarity=float(loss_dis), reconstruction=float(loss_inv),
        smoothness=float(loss_var), balance=float(loss_fif),
        total=float(total))
    cache = dict(
        stacked=stacked, z1=z1, a1=a1, code=code, projected=projected,
        norms=norms, guarded=guarded, scores=scores, z3=z3, a3=a3,
        residual=residual, delta=delta, delta_norm=delta_norm,
        res_norm=res_norm, edges=edges, n_verts=n_verts, mode=mode,
        abs_max=abs_max, abs_max_bar=abs_max_bar,
        g_max=g_max, g_max_bar=g_max_bar)
    return breakdown, cache


def combined_loss(features, counterpart, edges, params: NetworkParams,
                  weights: LossWeights, mode: str = "normalized"
                  ) -> LossBreakdown:
    """Weighted sum of all four losses with its per-term breakdown."""
    breakdown, _ = _forward(features, counterpart, edges, params, weights, mode)
    return breakdown


def _score_grad_contrib(chi, g_sum_abs, abs_max, g_max, n_verts):
    """Gradient of |sum(chi)| / max(||chi||_inf, eps) / V w.r.t. chi."""
    grad = np.full(len(chi), np.sign(chi.sum()) / g_max / n_verts)
    if abs_max > EPS:
        star = int(np.argmax(np.abs(chi)))
        grad[star] -= (g_sum_abs / g_max ** 2) * np.sign(chi[star]) / n_verts
    return grad


def loss_gradients(features, counterpart, edges, params: NetworkParams,
                   weights: LossWeights, mode: str = "normalized"):
    """Exact gradient of the combined loss for every parameter array.

    Returns (grads, breakdown) where grads is parameter-shaped.
    """
    breakdown, c = _forward(features, counterpart, edges, params, weights, mode)
    n_verts = c["n_verts"]
    sqrt_v = np.sqrt(n_verts)
    chi, chi_bar = c["scores"][:n_verts], c["scores"][n_verts:]

    # d(total)/d(scores)
    d_scores = np.zeros(2 * n_verts, dtype=np.float64)

    d_delta = -c["delta"] / (sqrt_v * max(c["delta_norm"], EPS))
    d_scores[:n_verts] += d_delta
    d_scores[n_verts:] -= d_delta

    edges_arr = c["edges"]
    if len(edges_arr) and weights.smoothness != 0.0:
        eu, ev = edges_arr[:, 0], edges_arr[:, 1]
        scale = weights.smoothness / len(edges_arr)
        sign_orig = np.sign(chi[eu] - chi[ev]) * scale
        sign_bar = np.sign(chi_bar[eu] - chi_bar[ev]) * scale
        d_scores[:n_verts] += np.bincount(eu, sign_orig, n_verts)
        d_scores[:n_verts] -= np.bincount(ev, sign_orig, n_verts)
        d_scores[n_verts:] += np.bincount(eu, sign_bar, n_verts)
        d_scores[n_verts:] -= np.bincount(ev, sign_bar, n_verts)

    if weights.balance != 0.0:
        d_scores[:n_verts] += weights.balance * _score_grad_contrib(
            chi, abs(chi.sum()), c["abs_max"], c["g_max"], n_verts)
        d_scores[n_verts:] += weights.balance * _score_grad_contrib(
            chi_bar, abs(chi_bar.sum()), c["abs_max_bar"], c["g_max_bar"],
            n_verts)

    # head backward: d(total)/d(projected)
    projected = c["projected"]
    if mode == "normalized":
        guarded = c["guarded"]
        d_proj = np.zeros_like(projected)
        d_proj[:, 0] = d_scores / guarded
        radial = np.where(c["norms"] > EPS,
                          d_scores * projected[:, 0] / guarded ** 3, 0.0)
        d_proj -= radial[:, None] * projected
    else:  # tanh
        d_proj = np.zeros_like(projected)
        d_proj[:, 0] = d_scores * (1.0 - c["scores"] ** 2)

    code = c["code"]
    d_proj_mat = code.T @ d_proj
    d_code = d_proj @ params.proj.T

    # reconstruction backward
    if weights.reconstruction != 0.0:
        d_recon = -(weights.reconstruction / (sqrt_v * max(c["res_norm"], EPS))
                    ) * c["residual"]
        d_dec_w2 = c["a3"].T @ d_recon
        d_dec_b2 = d_recon.sum(axis=0)
        d_a3 = d_recon @ params.dec_w2.T
        d_z3 = d_a3 * (c["z3"] > 0.0)
        d_dec_w1 = code.T @ d_z3
        d_dec_b1 = d_z3.sum(axis=0)
        d_code += d_z3 @ params.dec_w1.T
    else:
        d_dec_w1 = np.zeros_like(params.dec_w1)
        d_dec_b1 = np.zeros_like(params.dec_b1)
        d_dec_w2 = np.zeros_like(params.dec_w2)
        d_dec_b2 = np.zeros_like(params.dec_b2)

    # encoder backward
    d_enc_w2 = c["a1"].T @ d_code
    d_enc_b2 = d_code.sum(axis=0)
    d_a1 = d_code @ params.enc_w2.T
    d_z1 = d_a1 * (c["z1"] > 0.0)
    d_enc_w1 = c["stacked"].T @ d_z1
    d_enc_b1 = d_z1.sum(axis=0)

    raw = dict(
        enc_w1=d_enc_w1, enc_b1=d_enc_b1, enc_w2=d_enc_w2, enc_b2=d_enc_b2,
        proj=d_proj_mat,
        dec_w1=d_dec_w1, dec_b1=d_dec_b1, dec_w2=d_dec_w2, dec_b2=d_dec_b2)
    for name, arr in raw.items():
        if not np.isfinite(arr).all():
            raise NumericError(f"non-finite gradient in {name}")
    return NetworkParams(**raw), breakdown
