"""Deterministic full-shape training with Adam.

Each iteration processes one whole shape, visiting shapes round-robin:
the smoothness and balance losses are defined over a complete shape, so
mini-batching vertices would change their semantics. Vertices that were
never visible are dropped (together with their edges) before any loss is
evaluated; the loss denominators count only what remains.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError, ParameterError, ValidationError
from .losses import LossBreakdown, LossWeights, loss_gradients
from .network import HEAD_MODES, NetworkParams, init_params, zeros_like_params
from .projection import ChiralPair


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    iterations: int = 20000
    seed: int = 42
    head: str = "normalized"
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ParameterError("learning rate must be positive")
        if self.iterations < 0:
            raise ParameterError("iterations must be nonnegative")
        if self.head not in HEAD_MODES:
            raise ParameterError(f"head must be one of {HEAD_MODES}, "
                                 f"got {self.head!r}")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ParameterError("betas must lie in [0, 1)")


@dataclass
class AdamState:
    first_moment: NetworkParams
    second_moment: NetworkParams
    step: int = 0


def init_adam_state(params: NetworkParams) -> AdamState:
    return AdamState(first_moment=zeros_like_params(params),
                     second_moment=zeros_like_params(params))


def adam_step(params: NetworkParams, grads: NetworkParams, state: AdamState,
              config: TrainConfig):
    """One bias-corrected Adam update; returns (new_params, new_state)."""
    t = state.step + 1
    b1, b2 = config.beta1, config.beta2
    corr1 = 1.0 - b1 ** t
    corr2 = 1.0 - b2 ** t
    new_params, new_m, new_v = {}, {}, {}
    p_arrays = params.arrays()
    g_arrays = grads.arrays()
    m_arrays = state.first_moment.arrays()
    v_arrays = state.second_moment.arrays()
    for name in p_arrays:
        g = g_arrays[name]
        m = b1 * m_arrays[name] + (1.0 - b1) * g
        v = b2 * v_arrays[name] + (1.0 - b2) * g ** 2
        m_hat = m / corr1
        v_hat = v / corr2
        new_params[name] = p_arrays[name] - config.learning_rate * m_hat / (
            np.sqrt(v_hat) + config.epsilon)
        new_m[name] = m
        new_v[name] = v
    return (NetworkParams(**new_params),
            AdamState(first_moment=NetworkParams(**new_m),
                      second_moment=NetworkParams(**new_v), step=t))


@dataclass(frozen=True)
class TrainSample:
    """One shape ready for the loop: filtered features plus remapped edges."""

    features: np.ndarray
    counterpart: np.ndarray
    edges: np.ndarray

    @classmethod
    def from_pair(cls, pair: ChiralPair, edges: np.ndarray) -> "TrainSample":
        """Drop zero-view vertices and reindex the edges accordingly."""
        edges = np.asarray(edges, dtype=np.int64)
        if edges.size == 0:
            edges = edges.reshape(0, 2)
        elif edges.min() < 0 or edges.max() >= pair.n_vertices:
            raise ValidationError("edge index out of range for this shape")
        included = pair.included
        if not included.any():
            raise ValidationError("shape has no vertex visible in any view")
        remap = np.cumsum(included) - 1
        keep = included[edges[:, 0]] & included[edges[:, 1]] if len(edges) \
            else np.zeros(0, dtype=bool)
        return cls(features=pair.features[included],
                   counterpart=pair.counterpart[included],
                   edges=remap[edges[keep]] if len(edges) else edges)


@dataclass(frozen=True)
class HistoryRow:
    iteration: int
    breakdown: LossBreakdown


def train(samples, config: TrainConfig, weights: LossWeights):
    """Run `config.iterations` Adam steps over the shapes, round-robin.

    `samples` is a sequence of TrainSample (or (ChiralPair, edges) tuples,
    converted here). Returns (params, history). Fully deterministic for a
    fixed seed; iterations == 0 returns the freshly initialized params.
    """
    prepared = []
    for sample in samples:
        if isinstance(sample, TrainSample):
            prepared.append(sample)
        else:
            pair, edges = sample
            prepared.append(TrainSample.from_pair(pair, edges))
    if not prepared:
        raise ValidationError("training needs at least one shape")
    dims = {s.features.shape[1] for s in prepared}
    if len(dims) != 1:
        raise ValidationError(f"feature dimension differs across shapes: {dims}")

    params = init_params(dims.pop(), config.seed)
    state = init_adam_state(params)
    history: list[HistoryRow] = []
    for iteration in range(config.iterations):
        sample = prepared[iteration % len(prepared)]
        try:
            grads, breakdown = loss_gradients(
                sample.features, sample.counterpart, sample.edges, params,
                weights, config.head)
        except NumericError as exc:
            raise NumericError(
                f"iteration {iteration}: {exc}") from None
        if not np.isfinite(breakdown.total):
            raise NumericError(
                f"iteration {iteration}: non-finite loss "
                f"(dis={breakdown.dissimilarity}, inv={breakdown.reconstruction}, "
                f"var={breakdown.smoothness}, fif={breakdown.balance})")
        params, state = adam_step(params, grads, state, config)
        history.append(HistoryRow(iteration=iteration, breakdown=breakdown))
    return params, history


def history_to_csv(history) -> str:
    """Loss history as CSV text with one row per iteration."""
    lines = ["iteration,L_dis,L_inv,L_var,L_fif,total"]
    for row in history:
        values = ",".join(repr(v) for v in row.breakdown.as_row())
        lines.append(f"{row.iteration},{values}")
    return "\n".join(lines) + "\n"
