"""Per-view vertex visibility and aggregation of image features onto vertices.

The pipeline: project every vertex into each view, test it against a
software z-buffer of the whole mesh, look up the feature at its nearest
pixel, and average the per-view features vertex-wise. The mirrored
counterpart features come from feature maps of horizontally flipped
images, flipped back into alignment and aggregated with the *same*
visibility, so each vertex row of the two matrices is directly comparable.

Per-view work can run on a thread pool (capped by CHIRALIS_THREADS); the
final mean is an ordered reduction over views sorted by view index, so
results are bit-stable regardless of worker count or list order.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .cameras import CameraView
from .errors import ValidationError
from .mesh import TriangleMesh
from .raster import rasterize_depth

NORM_EPS = 1e-12
DEFAULT_DEPTH_TOL_FACTOR = 1e-3


def worker_count() -> int:
    """Worker cap for per-view parallelism (CHIRALIS_THREADS, default 4)."""
    env = os.environ.get("CHIRALIS_THREADS", "")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            return 1
    return min(4, os.cpu_count() or 1)


@dataclass(frozen=True)
class FeatureMap:
    """An H x W x C feature image with a foreground mask."""

    data: np.ndarray  # (H, W, C) float
    mask: np.ndarray  # (H, W) bool

    def __post_init__(self):
        data = np.asarray(self.data)
        mask = np.asarray(self.mask, dtype=bool)
        if data.ndim != 3:
            raise ValidationError(f"feature data must be (H, W, C), got {data.shape}")
        if mask.shape != data.shape[:2]:
            raise ValidationError(
                f"mask shape {mask.shape} does not match data {data.shape[:2]}")
        if not np.isfinite(data).all():
            raise ValidationError("feature values must be finite")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "mask", mask)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class ChiralPair:
    """Per-vertex features and their mirrored counterparts.

    Rows with view_count == 0 were never seen by any camera; they hold the
    zero vector and must be excluded from training and metrics.
    """

    features: np.ndarray     # (V, D) float64
    counterpart: np.ndarray  # (V, D) float64
    view_count: np.ndarray   # (V,) int64

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        counter = np.asarray(self.counterpart, dtype=np.float64)
        count = np.asarray(self.view_count, dtype=np.int64).reshape(-1)
        if feats.shape != counter.shape:
            raise ValidationError(
                f"feature shape {feats.shape} != counterpart {counter.shape}")
        if feats.ndim != 2 or len(count) != len(feats):
            raise ValidationError("view_count length must match feature rows")
        populated = count > 0
        if not np.isfinite(feats[populated]).all() or \
                not np.isfinite(counter[populated]).all():
            raise ValidationError("populated feature rows must be finite")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "counterpart", counter)
        object.__setattr__(self, "view_count", count)

    @property
    def included(self) -> np.ndarray:
        return self.view_count > 0

    @property
    def n_vertices(self) -> int:
        return len(self.features)

    @property
    def dim(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class VertexProjection:
    """Projected pixel (row, col) per vertex and its visibility flag."""

    rows: np.ndarray     # (V,) int64, valid only where visible
    cols: np.ndarray     # (V,) int64
    visible: np.ndarray  # (V,) bool


def flip_feature_map_horizontal(fmap: FeatureMap) -> FeatureMap:
    """Mirror a feature map left-right: output(r, c) = input(r, W-1-c)."""
    return FeatureMap(np.ascontiguousarray(fmap.data[:, ::-1, :]),
                      np.ascontiguousarray(fmap.mask[:, ::-1]))


def _l2_normalize(data: np.ndarray) -> np.ndarray:
    norms = np.sqrt((data ** 2).sum(axis=-1, keepdims=True))
    return data / np.maximum(norms, NORM_EPS)


def normalize_concat(feature_a: FeatureMap, feature_b: FeatureMap) -> FeatureMap:
    """Join two feature images: normalize each, concatenate, normalize again.

    Applied per pixel on the joint foreground; background pixels are zero.
    """
    if (feature_a.height, feature_a.width) != (feature_b.height, feature_b.width):
        raise ValidationError(
            f"feature maps disagree on image size: "
            f"{feature_a.data.shape[:2]} vs {feature_b.data.shape[:2]}")
    mask = feature_a.mask & feature_b.mask
    joined = np.concatenate(
        [_l2_normalize(feature_a.data.astype(np.float64)),
         _l2_normalize(feature_b.data.astype(np.float64))], axis=-1)
    joined = _l2_normalize(joined)
    joined[~mask] = 0.0
    return FeatureMap(joined, mask)


def normalize_concat_channels(fmap: FeatureMap, counts) -> FeatureMap:
    """normalize_concat over channel groups stored in one raw map.

    Exporters ship per-model maps stacked along channels without any
    normalization; `counts` gives the channel count of each group. For two
    groups this matches normalize_concat on the split maps exactly.
    """
    counts = [int(c) for c in counts]
    if min(counts, default=0) <= 0 or sum(counts) != fmap.channels:
        raise ValidationError(
            f"channel split {counts} does not cover {fmap.channels} channels")
    parts = np.split(fmap.data.astype(np.float64),
                     np.cumsum(counts)[:-1], axis=-1)
    joined = np.concatenate([_l2_normalize(p) for p in parts], axis=-1)
    joined = _l2_normalize(joined)
    joined[~fmap.mask] = 0.0
    return FeatureMap(joined, fmap.mask)


def visible_vertex_pixels(mesh: TriangleMesh, view: CameraView,
                          depth_tolerance: float) -> VertexProjection:
    """Project vertices into a view and z-buffer-test them for visibility.

    A vertex is visible when it lands inside the image in front of the
    camera and its depth is within depth_tolerance of the rasterized
    surface at its pixel. A pixel the rasterizer never touched cannot
    occlude, so vertices landing there count as visible too (this keeps
    silhouette vertices whose corner pixel center falls just outside
    their own triangle).
    """
    cam_pts = view.world_to_camera(mesh.vertices)
    z = cam_pts[:, 2]
    in_front = z > 1e-9
    with np.errstate(divide="ignore", invalid="ignore"):
        u = view.fx * cam_pts[:, 0] / z + view.cx
        v = view.fy * cam_pts[:, 1] / z + view.cy
    cols = np.floor(np.where(in_front, u, -1.0)).astype(np.int64)
    rows = np.floor(np.where(in_front, v, -1.0)).astype(np.int64)
    in_image = in_front & (cols >= 0) & (cols < view.width) & \
        (rows >= 0) & (rows < view.height)

    zbuf = rasterize_depth(cam_pts, mesh.faces, view.fx, view.fy,
                           view.cx, view.cy, view.height, view.width)
    visible = np.zeros(mesh.n_vertices, dtype=bool)
    idx = np.nonzero(in_image)[0]
    surface = zbuf[rows[idx], cols[idx]]
    visible[idx] = np.isinf(surface) | (z[idx] <= surface + depth_tolerance)
    return VertexProjection(rows=rows, cols=cols, visible=visible)


def _default_tolerance(mesh: TriangleMesh) -> float:
    return max(DEFAULT_DEPTH_TOL_FACTOR * mesh.bounding_radius(), NORM_EPS)


def _check_maps(views, maps, label):
    if len(maps) != len(views):
        raise ValidationError(
            f"{label}: got {len(maps)} maps for {len(views)} views")
    channels = {m.channels for m in maps}
    if len(channels) > 1:
        raise ValidationError(f"{label}: inconsistent channel counts {channels}")
    for view, fmap in zip(views, maps):
        if (fmap.height, fmap.width) != (view.height, view.width):
            raise ValidationError(
                f"{label}: map size {(fmap.height, fmap.width)} does not match "
                f"view {view.index} size {(view.height, view.width)}")


def _project_all(mesh, views, depth_tolerance):
    """Per-view projections, computed possibly in parallel, returned in order."""
    workers = worker_count()
    if workers > 1 and len(views) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(
                lambda v: visible_vertex_pixels(mesh, v, depth_tolerance),
                views))
    return [visible_vertex_pixels(mesh, v, depth_tolerance) for v in views]


def _accumulate(projections, gate_maps, value_maps, n_vertices):
    """Ordered sum of per-view vertex features.

    A view contributes to a vertex when the vertex is z-buffer visible and
    its pixel is foreground in the *gate* map; the value gathered comes
    from the *value* map. Gate and value maps coincide for plain
    aggregation and differ for the mirrored counterpart, which reuses the
    original views' contribution pattern to stay vertex-aligned.
    """
    dim = value_maps[0].channels
    total = np.zeros((n_vertices, dim), dtype=np.float64)
    count = np.zeros(n_vertices, dtype=np.int64)
    for proj, gate, value in zip(projections, gate_maps, value_maps):
        idx = np.nonzero(proj.visible)[0]
        if len(idx) == 0:
            continue
        rows = proj.rows[idx]
        cols = proj.cols[idx]
        fg = gate.mask[rows, cols]
        idx, rows, cols = idx[fg], rows[fg], cols[fg]
        total[idx] += value.data[rows, cols].astype(np.float64)
        count[idx] += 1
    features = np.zeros_like(total)
    seen = count > 0
    features[seen] = total[seen] / count[seen, None]
    return features, count


def backproject_aggregate(mesh: TriangleMesh, views: list[CameraView],
                          maps: list[FeatureMap],
                          depth_tolerance: float = None):
    """Average each vertex's visible-pixel features across all views.

    Returns (features (V, D), view_count (V,)). Vertices not seen by any
    view get the zero vector and view_count 0. Views are processed in
    ascending view-index order so the reduction is independent of list
    order.
    """
    if len(views) == 0:
        raise ValidationError("empty view list")
    _check_maps(views, maps, "feature maps")
    if depth_tolerance is None:
        depth_tolerance = _default_tolerance(mesh)
    order = sorted(range(len(views)), key=lambda i: (views[i].index, i))
    views = [views[i] for i in order]
    maps = [maps[i] for i in order]
    projections = _project_all(mesh, views, depth_tolerance)
    return _accumulate(projections, maps, maps, mesh.n_vertices)


def build_chiral_pair(mesh: TriangleMesh, views: list[CameraView],
                      maps_original: list[FeatureMap],
                      maps_flipped_images: list[FeatureMap],
                      depth_tolerance: float = None) -> ChiralPair:
    """Aggregate original and mirrored-counterpart vertex features.

    maps_flipped_images must hold feature maps computed on horizontally
    flipped renders, in the same view order as maps_original. They are
    flipped back into alignment here, then aggregated with the visibility
    and foreground gating of the original views, so the resulting rows are
    vertex-aligned and share one view_count. Feeding flipped copies of
    maps_original reproduces the original features exactly.
    """
    if len(views) == 0:
        raise ValidationError("empty view list")
    if len(maps_flipped_images) != len(maps_original):
        raise ValidationError(
            f"view-count mismatch: {len(maps_original)} original vs "
            f"{len(maps_flipped_images)} flipped maps")
    _check_maps(views, maps_original, "original maps")
    _check_maps(views, maps_flipped_images, "flipped maps")
    if maps_original[0].channels != maps_flipped_images[0].channels:
        raise ValidationError("original and flipped maps disagree on channels")
    if depth_tolerance is None:
        depth_tolerance = _default_tolerance(mesh)

    order = sorted(range(len(views)), key=lambda i: (views[i].index, i))
    views = [views[i] for i in order]
    maps_original = [maps_original[i] for i in order]
    realigned = [flip_feature_map_horizontal(maps_flipped_images[i])
                 for i in order]

    projections = _project_all(mesh, views, depth_tolerance)
    features, count = _accumulate(projections, maps_original, maps_original,
                                  mesh.n_vertices)
    counterpart, _ = _accumulate(projections, maps_original, realigned,
                                 mesh.n_vertices)
    return ChiralPair(features=features, counterpart=counterpart,
                      view_count=count)
