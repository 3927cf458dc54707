"""Synthetic bilateral shapes and chiral feature pairs.

The generator is the desk-scale ground-truth oracle: it fabricates vertex
feature pairs with the exact structure the real pipeline is supposed to
produce — channels shared between a vertex and its mirror twin, plus
channels whose sign encodes the side of the symmetry plane. All channel
profiles are mirror-even functions of position, so the counterpart row of
a vertex matches the original row of its mirror twin and the only
consistent solutions are side-aligned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, ValidationError
from .mesh import ChiralityAnnotation, TriangleMesh
from .projection import ChiralPair

PLANE_TOL = 1e-9


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for one synthetic chiral pair."""

    symmetric_channels: int = 8
    chiral_channels: int = 2
    noise: float = 0.01
    seed: int = 0
    plane_axis: int = 0  # mirror plane {x = 0} by default

    def __post_init__(self):
        if self.symmetric_channels < 1 or self.chiral_channels < 1:
            raise ValidationError("channel counts must be at least 1")
        if self.noise < 0:
            raise ValidationError("noise amplitude must be nonnegative")
        if self.plane_axis not in (0, 1, 2):
            raise ValidationError("plane_axis must be 0, 1, or 2")

    @property
    def dim(self) -> int:
        return self.symmetric_channels + self.chiral_channels


def make_bilateral_mesh(n_lat: int = 30, n_lon: int = 34, seed: int = 0,
                        deform: float = 0.25) -> TriangleMesh:
    """A deformed UV sphere, exactly mirror-symmetric about {x = 0}.

    n_lon must be even so the longitude grid maps onto itself under the
    mirror. The radial deformation depends on position only through
    (x^2, y, z), which keeps the symmetry exact while varying the shape
    with the seed.
    """
    if n_lat < 3 or n_lon < 4:
        raise ParameterError("need n_lat >= 3 and n_lon >= 4")
    if n_lon % 2:
        raise ParameterError("n_lon must be even for exact mirror symmetry")
    rng = np.random.default_rng(seed)

    verts = [np.array([0.0, 1.0, 0.0]), np.array([0.0, -1.0, 0.0])]
    for i in range(1, n_lat):
        theta = math.pi * i / n_lat
        for j in range(n_lon):
            phi = 2.0 * math.pi * j / n_lon
            verts.append(np.array([
                math.sin(theta) * math.cos(phi),
                math.cos(theta),
                math.sin(theta) * math.sin(phi),
            ]))
    verts = np.asarray(verts)

    weights = rng.uniform(-1.0, 1.0, size=3)
    phases = rng.uniform(0.0, 2.0 * math.pi, size=3)
    x2 = verts[:, 0] ** 2
    bump = (weights[0] * np.sin(2.0 * verts[:, 1] + phases[0]) +
            weights[1] * np.sin(3.0 * verts[:, 2] + phases[1]) +
            weights[2] * np.sin(2.0 * x2 + verts[:, 1] * verts[:, 2] + phases[2]))
    scale = 1.0 + deform * bump / max(np.abs(bump).max(), 1.0)
    verts = verts * scale[:, None]

    def ring(i, j):
        return 2 + (i - 1) * n_lon + (j % n_lon)

    faces = []
    for j in range(n_lon):  # pole fans
        faces.append([0, ring(1, j + 1), ring(1, j)])
        faces.append([1, ring(n_lat - 1, j), ring(n_lat - 1, j + 1)])
    for i in range(1, n_lat - 1):  # quad strips
        for j in range(n_lon):
            a, b = ring(i, j), ring(i, j + 1)
            c, d = ring(i + 1, j), ring(i + 1, j + 1)
            faces.append([a, b, c])
            faces.append([b, d, c])
    return TriangleMesh(verts, np.asarray(faces, dtype=np.int64))


def _even_profiles(mesh: TriangleMesh, count: int, rng, axis: int) -> np.ndarray:
    """(V, count) smooth per-vertex values, even under the mirror."""
    coords = mesh.vertices
    sym = coords[:, axis] ** 2
    others = [coords[:, a] for a in range(3) if a != axis]
    freq = rng.uniform(0.5, 3.0, size=(count, 3))
    phase = rng.uniform(0.0, 2.0 * math.pi, size=count)
    values = np.empty((mesh.n_vertices, count))
    for i in range(count):
        values[:, i] = np.sin(freq[i, 0] * sym + freq[i, 1] * others[0] +
                              freq[i, 2] * others[1] + phase[i])
    return values


def generate_synthetic_pair(mesh: TriangleMesh, spec: SyntheticSpec):
    """Fabricate a (ChiralPair, ChiralityAnnotation) for a bilateral mesh.

    Labels are the side of the mirror plane (+1 for the nonnegative side;
    vertices within PLANE_TOL of the plane get +1 by convention). The
    original features carry side-signed chiral channels, the counterpart
    the negated ones; the chiral magnitudes stay in [0.5, 1.0], bounded
    away from zero. Independent Gaussian noise is added to both halves.
    """
    rng = np.random.default_rng(spec.seed)
    signed = mesh.vertices[:, spec.plane_axis]
    labels = np.where(signed < -PLANE_TOL, -1, 1).astype(np.int64)

    symmetric = _even_profiles(mesh, spec.symmetric_channels, rng,
                               spec.plane_axis)
    magnitude = 0.75 + 0.25 * _even_profiles(mesh, spec.chiral_channels, rng,
                                             spec.plane_axis)
    chiral = magnitude * labels[:, None]

    clean = np.concatenate([symmetric, chiral], axis=1)
    clean_bar = np.concatenate([symmetric, -chiral], axis=1)
    features = clean + spec.noise * rng.standard_normal(clean.shape)
    counterpart = clean_bar + spec.noise * rng.standard_normal(clean.shape)

    pair = ChiralPair(features=features, counterpart=counterpart,
                      view_count=np.ones(mesh.n_vertices, dtype=np.int64))
    return pair, ChiralityAnnotation(labels)
