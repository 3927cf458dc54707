"""Triangle meshes, point clouds, and per-vertex left/right annotations.

Supported mesh formats are OFF and OBJ restricted to triangular faces;
quads are rejected rather than triangulated so connectivity semantics stay
unambiguous. Meshes are not required to be manifold; only index validity
is enforced. All containers are immutable after construction (arrays are
marked read-only) and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import MeshFormatError, ParameterError, ValidationError


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def _derive_edges(faces: np.ndarray) -> np.ndarray:
    """Unique undirected edges induced by the faces, each stored (lo, hi).

    Self-loops from degenerate faces (repeated vertex index) are dropped:
    they are not undirected edges of the graph.
    """
    if faces.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    pairs = np.concatenate(
        [faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]], axis=0
    )
    lo = pairs.min(axis=1)
    hi = pairs.max(axis=1)
    keep = lo != hi
    return np.unique(np.stack([lo[keep], hi[keep]], axis=1), axis=0)


@dataclass(frozen=True)
class TriangleMesh:
    """Vertex positions, triangular faces, and the derived unique edge set."""

    vertices: np.ndarray  # (V, 3) float64
    faces: np.ndarray     # (F, 3) int64
    edges: np.ndarray = field(default=None)  # (E, 2) int64, lo < hi

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=np.float64)
        faces = np.asarray(self.faces, dtype=np.int64)
        if verts.ndim != 2 or verts.shape[1] != 3:
            raise ValidationError(f"vertices must be (V, 3), got {verts.shape}")
        if faces.size == 0:
            faces = faces.reshape(0, 3)
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise ValidationError(f"faces must be (F, 3), got {faces.shape}")
        if not np.isfinite(verts).all():
            raise ValidationError("vertex coordinates must be finite")
        if faces.size and (faces.min() < 0 or faces.max() >= len(verts)):
            raise ValidationError(
                f"face index out of range for {len(verts)} vertices"
            )
        object.__setattr__(self, "vertices", _readonly(verts))
        object.__setattr__(self, "faces", _readonly(faces))
        object.__setattr__(self, "edges", _readonly(_derive_edges(faces)))

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def bounding_radius(self) -> float:
        """Radius of the centroid-centered bounding sphere."""
        if self.n_vertices == 0:
            return 0.0
        centered = self.vertices - self.vertices.mean(axis=0)
        return float(np.sqrt((centered ** 2).sum(axis=1).max()))


@dataclass(frozen=True)
class PointCloud:
    """Raw points plus optional mutual k-NN connectivity."""

    points: np.ndarray            # (V, 3) float64
    knn_edges: np.ndarray = None  # (E, 2) int64, lo < hi, or None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValidationError(f"points must be (V, 3), got {pts.shape}")
        if not np.isfinite(pts).all():
            raise ValidationError("point coordinates must be finite")
        object.__setattr__(self, "points", _readonly(pts))
        if self.knn_edges is not None:
            edges = np.asarray(self.knn_edges, dtype=np.int64)
            if edges.size == 0:
                edges = edges.reshape(0, 2)
            if edges.ndim != 2 or edges.shape[1] != 2:
                raise ValidationError(f"knn_edges must be (E, 2), got {edges.shape}")
            if edges.size and (edges.min() < 0 or edges.max() >= len(pts)):
                raise ValidationError("knn edge index out of range")
            if edges.size and not (edges[:, 0] < edges[:, 1]).all():
                raise ValidationError("knn edges must be stored (lo, hi) with lo < hi")
            object.__setattr__(self, "knn_edges", _readonly(edges))

    @property
    def n_points(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class ChiralityAnnotation:
    """Ground-truth left/right labels, one of {-1, +1} per vertex."""

    labels: np.ndarray  # (V,) int64

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if not np.isin(labels, (-1, 1)).all():
            raise ValidationError("annotation values must be -1 or +1")
        object.__setattr__(self, "labels", _readonly(labels))

    def __len__(self) -> int:
        return len(self.labels)


# ---------------------------------------------------------------------------
# file loading


def _tokens(path: Path):
    """Yield (line_number, token_list) for non-empty, non-comment lines."""
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if line:
                yield lineno, line.split()


def _parse_off(path: Path) -> TriangleMesh:
    stream = _tokens(path)
    try:
        lineno, toks = next(stream)
    except StopIteration:
        raise MeshFormatError("empty file", path=path) from None
    if toks[0] != "OFF":
        raise MeshFormatError("missing OFF header", path=path, line=lineno)
    counts = toks[1:]
    if not counts:
        try:
            lineno, counts = next(stream)
        except StopIteration:
            raise MeshFormatError("missing count line", path=path) from None
    if len(counts) < 2:
        raise MeshFormatError("count line needs vertex and face counts",
                              path=path, line=lineno)
    try:
        n_verts, n_faces = int(counts[0]), int(counts[1])
    except ValueError:
        raise MeshFormatError("counts must be integers", path=path,
                              line=lineno) from None

    verts = np.zeros((n_verts, 3), dtype=np.float64)
    for i in range(n_verts):
        try:
            lineno, toks = next(stream)
        except StopIteration:
            raise MeshFormatError(f"expected {n_verts} vertices, got {i}",
                                  path=path) from None
        if len(toks) < 3:
            raise MeshFormatError("vertex line needs 3 coordinates",
                                  path=path, line=lineno)
        try:
            verts[i] = [float(t) for t in toks[:3]]
        except ValueError:
            raise MeshFormatError("bad vertex coordinate", path=path,
                                  line=lineno) from None

    faces = np.zeros((n_faces, 3), dtype=np.int64)
    for i in range(n_faces):
        try:
            lineno, toks = next(stream)
        except StopIteration:
            raise MeshFormatError(f"expected {n_faces} faces, got {i}",
                                  path=path) from None
        try:
            arity = int(toks[0])
        except ValueError:
            raise MeshFormatError("face line must start with vertex count",
                                  path=path, line=lineno) from None
        if arity != 3:
            raise MeshFormatError(
                f"only triangular faces are supported, got {arity}-gon",
                path=path, line=lineno)
        if len(toks) < 4:
            raise MeshFormatError("face line needs 3 indices", path=path,
                                  line=lineno)
        try:
            faces[i] = [int(t) for t in toks[1:4]]
        except ValueError:
            raise MeshFormatError("bad face index", path=path,
                                  line=lineno) from None
    return TriangleMesh(verts, faces)


def _obj_vertex_ref(token: str, n_verts: int, path: Path, lineno: int) -> int:
    ref = token.split("/")[0]
    try:
        idx = int(ref)
    except ValueError:
        raise MeshFormatError(f"bad face reference {token!r}", path=path,
                              line=lineno) from None
    if idx == 0:
        raise MeshFormatError("OBJ indices are 1-based, got 0", path=path,
                              line=lineno)
    return idx - 1 if idx > 0 else n_verts + idx


def _parse_obj(path: Path) -> TriangleMesh:
    verts: list[list[float]] = []
    faces: list[list[int]] = []
    for lineno, toks in _tokens(path):
        if toks[0] == "v":
            if len(toks) < 4:
                raise MeshFormatError("vertex line needs 3 coordinates",
                                      path=path, line=lineno)
            try:
                verts.append([float(t) for t in toks[1:4]])
            except ValueError:
                raise MeshFormatError("bad vertex coordinate", path=path,
                                      line=lineno) from None
        elif toks[0] == "f":
            refs = toks[1:]
            if len(refs) != 3:
                raise MeshFormatError(
                    f"only triangular faces are supported, got {len(refs)} "
                    "vertices", path=path, line=lineno)
            faces.append([_obj_vertex_ref(t, len(verts), path, lineno)
                          for t in refs])
        # all other directives (vn, vt, usemtl, ...) are ignored
    v = np.asarray(verts, dtype=np.float64).reshape(len(verts), 3)
    f = np.asarray(faces, dtype=np.int64).reshape(len(faces), 3)
    return TriangleMesh(v, f)


def load_mesh(path) -> TriangleMesh:
    """Load and validate a triangle mesh from an OFF or OBJ file."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".off":
        return _parse_off(path)
    if suffix == ".obj":
        return _parse_obj(path)
    raise MeshFormatError(f"unsupported mesh format {suffix!r} "
                          "(expected .off or .obj)", path=path)


def load_annotations(path, mesh: TriangleMesh) -> ChiralityAnnotation:
    """Read one signed integer per line; count must equal the vertex count."""
    path = Path(path)
    values = []
    for lineno, toks in _tokens(path):
        if len(toks) != 1:
            raise MeshFormatError("expected one integer per line",
                                  path=path, line=lineno)
        try:
            value = int(toks[0])
        except ValueError:
            raise MeshFormatError(f"bad annotation value {toks[0]!r}",
                                  path=path, line=lineno) from None
        if value not in (-1, 1):
            raise MeshFormatError(f"annotation value must be -1 or +1, "
                                  f"got {value}", path=path, line=lineno)
        values.append(value)
    if len(values) != mesh.n_vertices:
        raise ValidationError(
            f"annotation count {len(values)} does not match vertex count "
            f"{mesh.n_vertices}")
    return ChiralityAnnotation(np.asarray(values, dtype=np.int64))


def save_mesh_off(path, mesh: TriangleMesh) -> None:
    """Write a mesh as OFF (used by fixture generation)."""
    lines = ["OFF", f"{mesh.n_vertices} {mesh.n_faces} 0"]
    for v in mesh.vertices:
        lines.append(f"{float(v[0])!r} {float(v[1])!r} {float(v[2])!r}")
    for f in mesh.faces:
        lines.append(f"3 {f[0]} {f[1]} {f[2]}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def save_annotations(path, annotation: ChiralityAnnotation) -> None:
    """Write labels one per line, LF-terminated."""
    Path(path).write_text(
        "\n".join(str(int(v)) for v in annotation.labels) + "\n",
        encoding="utf-8")


# ---------------------------------------------------------------------------
# mutual k-NN connectivity


def mutual_knn_edges(points: np.ndarray, k: int, block: int = 512) -> np.ndarray:
    """Mutual k-nearest-neighbor edges of a point set.

    (u, v) is an edge iff u is among v's k nearest neighbors AND v is among
    u's. Distance ties are broken by lower point index, which makes the
    result deterministic. Edges come back as unique (lo, hi) pairs.
    """
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    if k <= 0:
        raise ParameterError(f"k must be positive, got {k}")
    if k >= n:
        raise ParameterError(f"k={k} must be smaller than point count {n}")
    if not np.isfinite(pts).all():
        raise ValidationError("points must be finite")

    sq = (pts ** 2).sum(axis=1)
    neighbors = np.empty((n, k), dtype=np.int64)
    for start in range(0, n, block):
        stop = min(start + block, n)
        d2 = sq[start:stop, None] + sq[None, :] - 2.0 * (pts[start:stop] @ pts.T)
        d2[np.arange(start, stop) - start, np.arange(start, stop)] = np.inf
        # stable sort on distance keeps ties in index order
        order = np.argsort(d2, axis=1, kind="stable")
        neighbors[start:stop] = order[:, :k]

    is_neighbor = np.zeros((n, n), dtype=bool)
    is_neighbor[np.repeat(np.arange(n), k), neighbors.reshape(-1)] = True
    mutual = is_neighbor & is_neighbor.T
    lo, hi = np.nonzero(np.triu(mutual, k=1))
    return np.stack([lo, hi], axis=1).astype(np.int64)


def build_knn_graph(cloud: PointCloud, k: int) -> np.ndarray:
    """Mutual k-NN edge list for a point cloud (see :func:`mutual_knn_edges`)."""
    return mutual_knn_edges(cloud.points, k)
