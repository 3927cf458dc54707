import numpy as np
import pytest

from chiralis.errors import MeshFormatError, ParameterError, ValidationError
from chiralis.mesh import (ChiralityAnnotation, PointCloud, TriangleMesh,
                           build_knn_graph, load_annotations, load_mesh,
                           mutual_knn_edges, save_mesh_off)
from chiralis.synthetic import make_bilateral_mesh


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


TRIANGLE_OFF = """OFF
3 1 0
0 0 0
1 0 0
0 1 0
3 0 1 2
"""

TETRA_OFF = """OFF
4 4 6
0 0 0
1 0 0
0 1 0
0 0 1
3 0 1 2
3 0 1 3
3 0 2 3
3 1 2 3
"""


class TestOffParsing:
    def test_triangle_edge_count(self, tmp_path):
        mesh = load_mesh(write(tmp_path, "tri.off", TRIANGLE_OFF))
        assert mesh.n_vertices == 3
        assert mesh.n_faces == 1
        assert len(mesh.edges) == 3

    def test_tetrahedron_edge_count(self, tmp_path):
        mesh = load_mesh(write(tmp_path, "tet.off", TETRA_OFF))
        assert len(mesh.edges) == 6  # complete graph K4

    def test_out_of_range_index(self, tmp_path):
        bad = TRIANGLE_OFF.replace("3 0 1 2", "3 0 1 9")
        with pytest.raises(ValidationError):
            load_mesh(write(tmp_path, "bad.off", bad))

    def test_quad_rejected_with_line_number(self, tmp_path):
        bad = TETRA_OFF.replace("3 0 1 2", "4 0 1 2 3")
        with pytest.raises(MeshFormatError) as excinfo:
            load_mesh(write(tmp_path, "quad.off", bad))
        assert excinfo.value.line == 7

    def test_counts_on_header_line(self, tmp_path):
        text = "OFF 3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n"
        mesh = load_mesh(write(tmp_path, "hdr.off", text))
        assert mesh.n_faces == 1

    def test_missing_header(self, tmp_path):
        with pytest.raises(MeshFormatError):
            load_mesh(write(tmp_path, "x.off", "3 1 0\n0 0 0\n"))

    def test_truncated_vertices(self, tmp_path):
        with pytest.raises(MeshFormatError):
            load_mesh(write(tmp_path, "x.off", "OFF\n3 1 0\n0 0 0\n"))

    def test_comments_ignored(self, tmp_path):
        text = "# comment\nOFF\n# another\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n"
        assert load_mesh(write(tmp_path, "c.off", text)).n_vertices == 3

    def test_roundtrip_through_writer(self, tmp_path):
        mesh = make_bilateral_mesh(n_lat=6, n_lon=8, seed=3)
        path = tmp_path / "rt.off"
        save_mesh_off(path, mesh)
        again = load_mesh(path)
        np.testing.assert_array_equal(mesh.vertices, again.vertices)
        np.testing.assert_array_equal(mesh.faces, again.faces)


class TestObjParsing:
    def test_basic(self, tmp_path):
        text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n"
        mesh = load_mesh(write(tmp_path, "m.obj", text))
        assert mesh.n_vertices == 3 and mesh.n_faces == 1
        assert len(mesh.edges) == 3

    def test_slash_forms_and_ignored_directives(self, tmp_path):
        text = ("vn 0 0 1\nvt 0 0\nv 0 0 0\nv 1 0 0\nv 0 1 0\n"
                "usemtl junk\nf 1/1/1 2//1 3/1\n")
        mesh = load_mesh(write(tmp_path, "m.obj", text))
        np.testing.assert_array_equal(mesh.faces, [[0, 1, 2]])

    def test_negative_indices(self, tmp_path):
        text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n"
        mesh = load_mesh(write(tmp_path, "m.obj", text))
        np.testing.assert_array_equal(mesh.faces, [[0, 1, 2]])

    def test_quad_rejected(self, tmp_path):
        text = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n"
        with pytest.raises(MeshFormatError) as excinfo:
            load_mesh(write(tmp_path, "m.obj", text))
        assert excinfo.value.line == 5

    def test_zero_index_rejected(self, tmp_path):
        text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n"
        with pytest.raises(MeshFormatError):
            load_mesh(write(tmp_path, "m.obj", text))

    def test_unknown_suffix(self, tmp_path):
        with pytest.raises(MeshFormatError):
            load_mesh(write(tmp_path, "m.ply", "ply\n"))


class TestMeshInvariants:
    def test_edges_unique_and_ordered(self):
        mesh = make_bilateral_mesh(n_lat=8, n_lon=10, seed=1)
        assert (mesh.edges[:, 0] < mesh.edges[:, 1]).all()
        assert len(np.unique(mesh.edges, axis=0)) == len(mesh.edges)

    def test_edge_derivation_idempotent(self):
        mesh = make_bilateral_mesh(n_lat=8, n_lon=10, seed=2)
        again = TriangleMesh(mesh.vertices, mesh.faces)
        np.testing.assert_array_equal(mesh.edges, again.edges)

    def test_every_edge_in_some_face(self):
        mesh = make_bilateral_mesh(n_lat=7, n_lon=12, seed=5)
        face_pairs = set()
        for f in mesh.faces:
            for a, b in ((f[0], f[1]), (f[1], f[2]), (f[2], f[0])):
                face_pairs.add((min(a, b), max(a, b)))
        for u, v in mesh.edges:
            assert (u, v) in face_pairs

    def test_degenerate_face_self_loop_dropped(self):
        mesh = TriangleMesh(np.eye(3), np.array([[0, 0, 1]]))
        np.testing.assert_array_equal(mesh.edges, [[0, 1]])

    def test_arrays_readonly(self):
        mesh = make_bilateral_mesh(n_lat=5, n_lon=6, seed=0)
        with pytest.raises(ValueError):
            mesh.vertices[0, 0] = 5.0


class TestAnnotations:
    def test_direct_parse(self, tmp_path):
        mesh = TriangleMesh(np.zeros((4, 3)), np.array([[0, 1, 2], [1, 2, 3]]))
        ann = load_annotations(write(tmp_path, "a.txt", "1\n1\n-1\n-1\n"), mesh)
        np.testing.assert_array_equal(ann.labels, [1, 1, -1, -1])

    def test_length_mismatch(self, tmp_path):
        mesh = TriangleMesh(np.zeros((4, 3)), np.array([[0, 1, 2]]))
        with pytest.raises(ValidationError):
            load_annotations(write(tmp_path, "a.txt", "1\n1\n-1\n"), mesh)

    def test_bad_value(self, tmp_path):
        mesh = TriangleMesh(np.zeros((1, 3)), np.zeros((0, 3), dtype=int))
        with pytest.raises(MeshFormatError):
            load_annotations(write(tmp_path, "a.txt", "0\n"), mesh)

    def test_annotation_type_validates(self):
        with pytest.raises(ValidationError):
            ChiralityAnnotation(np.array([1, 2, -1]))


def brute_force_mutual_knn(points, k):
    """Independent oracle: plain sorted() neighbor lists, then mutual filter."""
    n = len(points)
    neighbor_sets = []
    for i in range(n):
        ranked = sorted(
            (float(np.linalg.norm(points[i] - points[j])), j)
            for j in range(n) if j != i)
        neighbor_sets.append({j for _, j in ranked[:k]})
    edges = set()
    for i in range(n):
        for j in neighbor_sets[i]:
            if i in neighbor_sets[j]:
                edges.add((min(i, j), max(i, j)))
    return sorted(edges)


class TestMutualKnn:
    def test_collinear_tie_break(self):
        points = np.array([[0.0, 0, 0], [1.0, 0, 0], [2.0, 0, 0]])
        edges = mutual_knn_edges(points, 1)
        np.testing.assert_array_equal(edges, [[0, 1]])

    def test_two_isolated_pairs(self):
        points = np.array([[0.0, 0, 0], [0.1, 0, 0],
                           [100.0, 0, 0], [100.1, 0, 0]])
        edges = mutual_knn_edges(points, 1)
        np.testing.assert_array_equal(edges, [[0, 1], [2, 3]])

    def test_random_against_brute_force(self):
        rng = np.random.default_rng(7)
        points = rng.uniform(-1, 1, size=(100, 3))
        got = [tuple(e) for e in mutual_knn_edges(points, 5)]
        assert got == brute_force_mutual_knn(points, 5)

    def test_symmetry_under_canonical_ordering(self):
        rng = np.random.default_rng(11)
        points = rng.normal(size=(60, 3))
        edges = mutual_knn_edges(points, 4)
        assert (edges[:, 0] < edges[:, 1]).all()
        assert len(np.unique(edges, axis=0)) == len(edges)

    def test_k_too_large(self):
        cloud = PointCloud(np.random.default_rng(0).normal(size=(5, 3)))
        with pytest.raises(ParameterError):
            build_knn_graph(cloud, 5)

    def test_cloud_wrapper(self):
        rng = np.random.default_rng(3)
        cloud = PointCloud(rng.normal(size=(30, 3)))
        edges = build_knn_graph(cloud, 3)
        enriched = PointCloud(cloud.points, knn_edges=edges)
        assert enriched.knn_edges is not None
