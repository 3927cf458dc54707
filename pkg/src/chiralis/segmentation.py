"""Seeded k-means part segmentation (Lloyd iterations, careful seeding).

Initialization follows the distance-weighted seeding scheme driven by a
single RNG, so labels are reproducible for a fixed seed. Clusters that
empty out are re-seeded from the point farthest from its assigned
centroid, which keeps the within-cluster sum of squares non-increasing.
"""

from __future__ import annotations

import numpy as np

from .errors import ParameterError, ValidationError

CONVERGENCE_SHIFT = 1e-9


def _squared_distances(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return np.maximum(d2, 0.0)


def _seed_centroids(points: np.ndarray, k: int, rng) -> np.ndarray:
    n = len(points)
    centers = np.empty((k, points.shape[1]))
    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = rng.integers(n)
    centers[0] = points[chosen[0]]
    closest = ((points - centers[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            # all remaining points coincide with a center: take the first
            # index not yet chosen, deterministically
            remaining = np.setdiff1d(np.arange(n), chosen[:i])
            chosen[i] = remaining[0]
        else:
            target = rng.random() * total
            chosen[i] = int(np.searchsorted(np.cumsum(closest), target))
        centers[i] = points[chosen[i]]
        closest = np.minimum(closest, ((points - centers[i]) ** 2).sum(axis=1))
    return centers


def kmeans_segment(features: np.ndarray, k: int, seed: int = 42,
                   max_iters: int = 100) -> np.ndarray:
    """Cluster feature rows into k parts; returns one label per row."""
    points = np.asarray(features, dtype=np.float64)
    if points.ndim != 2:
        raise ValidationError(f"features must be (V, D), got {points.shape}")
    if k < 1:
        raise ParameterError(f"k must be at least 1, got {k}")
    if k > len(points):
        raise ParameterError(f"k={k} exceeds the number of rows {len(points)}")

    rng = np.random.default_rng(seed)
    centers = _seed_centroids(points, k, rng)
    labels = _squared_distances(points, centers).argmin(axis=1)
    for _ in range(max_iters):
        new_centers = centers.copy()
        for c in range(k):
            members = labels == c
            if members.any():
                new_centers[c] = points[members].mean(axis=0)
            else:
                d2 = _squared_distances(points, new_centers)
                farthest = d2[np.arange(len(points)), labels].argmax()
                new_centers[c] = points[farthest]
        shift = np.sqrt(((new_centers - centers) ** 2).sum(axis=1)).max()
        centers = new_centers
        labels = _squared_distances(points, centers).argmin(axis=1)
        if shift < CONVERGENCE_SHIFT:
            break
    return labels.astype(np.int64)


def within_cluster_ss(features: np.ndarray, labels: np.ndarray) -> float:
    """Objective value of a labeling (for tests and diagnostics)."""
    points = np.asarray(features, dtype=np.float64)
    total = 0.0
    for c in np.unique(labels):
        members = points[labels == c]
        total += ((members - members.mean(axis=0)) ** 2).sum()
    return float(total)
