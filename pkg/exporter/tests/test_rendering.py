import numpy as np

from chiralis_exporter.formats import load_cameras, load_mesh
from chiralis_exporter.rendering import flip_view_horizontal, render_view


def render_first(workspace):
    verts, faces = load_mesh(workspace / "shape.off")
    cameras = load_cameras(workspace / "cameras.json")
    return render_view(verts, faces, cameras[0])


class TestRenderView:
    def test_sphere_coverage_and_ranges(self, workspace):
        view = render_first(workspace)
        assert view.mask.sum() > 200
        assert np.isfinite(view.depth[view.mask]).all()
        assert np.isinf(view.depth[~view.mask]).all()
        assert view.depth_01.min() >= 0.0 and view.depth_01.max() <= 1.0
        assert (view.depth_01[~view.mask] == 0.0).all()

    def test_normals_unit_and_camera_facing(self, workspace):
        view = render_first(workspace)
        norms = np.linalg.norm(view.normals[view.mask], axis=1)
        np.testing.assert_allclose(norms, 1.0, atol=1e-9)
        # visible surface normals point toward the camera (negative z)
        assert (view.normals[view.mask][:, 2] <= 0.0).all()
        assert (view.normals[~view.mask] == 0.0).all()

    def test_depth_is_nearest_surface(self, workspace):
        # sphere of radius 1, camera at distance 2: nearest depth ~ 1
        view = render_first(workspace)
        assert abs(view.depth[view.mask].min() - 1.0) < 0.05

    def test_flip_involution(self, workspace):
        view = render_first(workspace)
        twice = flip_view_horizontal(flip_view_horizontal(view))
        np.testing.assert_array_equal(twice.mask, view.mask)
        np.testing.assert_array_equal(twice.depth, view.depth)
        np.testing.assert_array_equal(twice.normals, view.normals)

    def test_flip_negates_normal_x(self, workspace):
        view = render_first(workspace)
        flipped = flip_view_horizontal(view)
        np.testing.assert_array_equal(flipped.mask, view.mask[:, ::-1])
        np.testing.assert_array_equal(flipped.normals[:, :, 0],
                                      -view.normals[:, ::-1, 0])
        np.testing.assert_array_equal(flipped.normals[:, :, 1:],
                                      view.normals[:, ::-1, 1:])
