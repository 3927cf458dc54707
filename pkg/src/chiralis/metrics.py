"""Left/right accuracy, cosine matching, correspondence metrics, PCK/AUC.

The left/right accuracy has no preferred sign: the score field separates
the two halves but nothing fixes which half is positive, so the metric
takes the better of the aggregate accuracy and its complement. The
aggregation order is fixed: average the per-shape fractions first, then
apply the complement rule once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, ValidationError
from .mesh import ChiralityAnnotation
from .network import ChiralityField

NORM_EPS = 1e-12


def chirality_accuracy(fields, annotations) -> float:
    """Sign-match accuracy over shapes, invariant to a global sign flip."""
    if len(fields) == 0:
        raise ValidationError("need at least one shape to evaluate")
    if len(fields) != len(annotations):
        raise ValidationError(
            f"{len(fields)} fields vs {len(annotations)} annotations")
    per_shape = []
    for field, annotation in zip(fields, annotations):
        labels = annotation.labels if isinstance(annotation, ChiralityAnnotation) \
            else np.asarray(annotation)
        if len(labels) != len(field.chi):
            raise ValidationError("annotation length does not match field")
        mask = field.included
        if not mask.any():
            raise ValidationError("shape has no included vertices")
        matches = np.sign(field.chi[mask]) == labels[mask]
        per_shape.append(matches.mean())
    acc = float(np.mean(per_shape))
    return max(acc, 1.0 - acc)


def augment_features(base: np.ndarray, chi: np.ndarray,
                     weight: float = 0.5) -> np.ndarray:
    """Append one weighted left/right channel to row-normalized features."""
    base = np.asarray(base, dtype=np.float64)
    chi = np.asarray(chi, dtype=np.float64).reshape(-1)
    if base.ndim != 2 or len(chi) != len(base):
        raise ValidationError(
            f"need base (V, D) and chi (V,); got {base.shape} and {chi.shape}")
    norms = np.sqrt((base ** 2).sum(axis=1, keepdims=True))
    normalized = base / np.maximum(norms, NORM_EPS)
    return np.concatenate([normalized, weight * chi[:, None]], axis=1)


@dataclass(frozen=True)
class MatchResult:
    """Per-source-vertex best target index and its cosine similarity."""

    correspondence: np.ndarray  # (Vx,) int64
    similarity: np.ndarray      # (Vx,) float64


def match_nearest(source: np.ndarray, target: np.ndarray,
                  block: int = 2048) -> MatchResult:
    """Cosine-similarity nearest neighbor; ties go to the lower index."""
    source = np.asarray(source, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if len(target) == 0:
        raise ValidationError("empty target feature set")
    if source.ndim != 2 or target.ndim != 2 or \
            source.shape[1] != target.shape[1]:
        raise ValidationError(
            f"feature dims disagree: {source.shape} vs {target.shape}")

    def unit(rows):
        norms = np.sqrt((rows ** 2).sum(axis=1, keepdims=True))
        return rows / np.maximum(norms, NORM_EPS)

    src = unit(source)
    tgt = unit(target).T
    best = np.empty(len(src), dtype=np.int64)
    score = np.empty(len(src), dtype=np.float64)
    for start in range(0, len(src), block):
        stop = min(start + block, len(src))
        sim = src[start:stop] @ tgt
        best[start:stop] = sim.argmax(axis=1)  # argmax takes the first max
        score[start:stop] = sim[np.arange(stop - start), best[start:stop]]
    return MatchResult(correspondence=best, similarity=score)


def _gather_distances(match: MatchResult, gt_indices, target_coords):
    gt = np.asarray(gt_indices, dtype=np.int64).reshape(-1)
    coords = np.asarray(target_coords, dtype=np.float64)
    pred = match.correspondence
    if len(gt) != len(pred):
        raise ValidationError("ground truth length does not match matches")
    for name, idx in (("prediction", pred), ("ground truth", gt)):
        if idx.size and (idx.min() < 0 or idx.max() >= len(coords)):
            raise ValidationError(f"{name} index out of range")
    return np.linalg.norm(coords[pred] - coords[gt], axis=1)


def matching_error(match: MatchResult, gt_indices, target_coords) -> float:
    """Mean Euclidean distance between predicted and true target points."""
    return float(_gather_distances(match, gt_indices, target_coords).mean())


def max_pairwise_distance(coords: np.ndarray, block: int = 1024) -> float:
    """Diameter of a point set (exact, blocked O(V^2))."""
    coords = np.asarray(coords, dtype=np.float64)
    best = 0.0
    sq = (coords ** 2).sum(axis=1)
    for start in range(0, len(coords), block):
        stop = min(start + block, len(coords))
        d2 = sq[start:stop, None] + sq[None, :] - \
            2.0 * (coords[start:stop] @ coords.T)
        best = max(best, float(d2.max(initial=0.0)))
    return float(np.sqrt(max(best, 0.0)))


def matching_accuracy(match: MatchResult, gt_indices, target_coords,
                      epsilon: float) -> float:
    """Fraction of matches within epsilon times the target diameter."""
    if not 0.0 <= epsilon <= 1.0:
        raise ParameterError(f"epsilon must lie in [0, 1], got {epsilon}")
    distances = _gather_distances(match, gt_indices, target_coords)
    diameter = max_pairwise_distance(target_coords)
    return float((distances < epsilon * diameter).mean())


@dataclass(frozen=True)
class PckCurve:
    """Accuracy as a function of tolerance, plus its normalized area."""

    tolerances: np.ndarray
    accuracies: np.ndarray
    auc: float

    def __post_init__(self):
        tol = np.asarray(self.tolerances, dtype=np.float64)
        acc = np.asarray(self.accuracies, dtype=np.float64)
        if np.any(np.diff(acc) < 0):
            raise ValidationError("accuracies must be non-decreasing")
        if not 0.0 <= self.auc <= 1.0:
            raise ValidationError(f"auc must lie in [0, 1], got {self.auc}")
        object.__setattr__(self, "tolerances", tol)
        object.__setattr__(self, "accuracies", acc)


def pck_curve(match: MatchResult, gt_indices, target_coords,
              tolerance_grid) -> PckCurve:
    """Percentage-of-correct-keypoints curve over an ascending tolerance grid."""
    grid = np.asarray(tolerance_grid, dtype=np.float64).reshape(-1)
    if len(grid) < 2:
        raise ParameterError("tolerance grid needs at least two points")
    if np.any(np.diff(grid) <= 0):
        raise ParameterError("tolerance grid must be strictly ascending")
    if grid[0] < 0 or grid[-1] > 1:
        raise ParameterError("tolerances must lie in [0, 1]")
    distances = _gather_distances(match, gt_indices, target_coords)
    diameter = max_pairwise_distance(target_coords)
    accuracies = np.array([(distances < e * diameter).mean() for e in grid])
    trapezoid = getattr(np, "trapezoid", None) or np.trapz
    auc = float(trapezoid(accuracies, grid) / (grid[-1] - grid[0]))
    # accuracies lie in [0, 1], so the exact area does too; clamp the
    # summation rounding
    auc = min(max(auc, 0.0), 1.0)
    return PckCurve(tolerances=grid, accuracies=accuracies, auc=auc)


def default_tolerance_grid(lo: float = 0.0, hi: float = 0.20,
                           count: int = 101) -> np.ndarray:
    return np.linspace(lo, hi, count)


def load_correspondence(path, n_source: int, n_target: int) -> np.ndarray:
    """Ground-truth file: one target index per source-vertex line."""
    values = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                values.append(int(line))
            except ValueError:
                raise ValidationError(
                    f"{path}: line {lineno}: bad index {line!r}") from None
    gt = np.asarray(values, dtype=np.int64)
    if len(gt) != n_source:
        raise ValidationError(
            f"{path}: {len(gt)} lines for {n_source} source vertices")
    if gt.size and (gt.min() < 0 or gt.max() >= n_target):
        raise ValidationError(f"{path}: target index out of range")
    return gt
