import json

import numpy as np
import pytest

from chiralis.cameras import (CameraView, generate_camera_ring,
                              load_camera_manifest, save_camera_manifest)
from chiralis.errors import ParameterError, ValidationError


def camera_position(view):
    return -view.rotation.T @ view.translation


class TestRing:
    def test_four_views_even_azimuths(self):
        views = generate_camera_ring(4, radius=2.0, elevations_deg=(0.0,))
        assert len(views) == 4
        azimuths = []
        for v in views:
            pos = camera_position(v)
            azimuths.append(np.degrees(np.arctan2(pos[2], pos[0])) % 360.0)
        np.testing.assert_allclose(azimuths, [0.0, 90.0, 180.0, 270.0],
                                   atol=1e-9)

    def test_orthonormality_residual(self):
        for v in generate_camera_ring(6, radius=3.0, elevations_deg=(-15, 15)):
            residual = np.abs(v.rotation @ v.rotation.T - np.eye(3)).max()
            assert residual < 1e-6
            assert np.linalg.det(v.rotation) == pytest.approx(1.0, abs=1e-9)

    def test_look_at_origin(self):
        # the origin must land on the optical axis: camera coords (0, 0, r)
        for v in generate_camera_ring(1, radius=2.5, elevations_deg=(37.0,)):
            origin_cam = v.world_to_camera(np.zeros((1, 3)))[0]
            np.testing.assert_allclose(origin_cam, [0.0, 0.0, 2.5], atol=1e-12)

    def test_per_elevation_counts(self):
        views = generate_camera_ring(5, elevations_deg=(-15.0, 15.0, 40.0))
        assert len(views) == 15
        assert [v.index for v in views] == list(range(15))
        radii = [np.linalg.norm(camera_position(v)) for v in views]
        np.testing.assert_allclose(radii, 2.0)

    def test_straight_down_pole_camera(self):
        (v,) = generate_camera_ring(1, elevations_deg=(90.0,))
        origin_cam = v.world_to_camera(np.zeros((1, 3)))[0]
        np.testing.assert_allclose(origin_cam, [0.0, 0.0, 2.0], atol=1e-12)

    def test_errors(self):
        with pytest.raises(ParameterError):
            generate_camera_ring(0)
        with pytest.raises(ParameterError):
            generate_camera_ring(4, radius=0.0)
        with pytest.raises(ParameterError):
            generate_camera_ring(4, elevations_deg=())


class TestCameraView:
    def test_rejects_non_orthonormal(self):
        with pytest.raises(ValidationError):
            CameraView(index=0, rotation=np.eye(3) * 1.01,
                       translation=np.zeros(3), fx=1, fy=1, cx=0, cy=0,
                       height=4, width=4)

    def test_rejects_bad_size(self):
        with pytest.raises(ValidationError):
            CameraView(index=0, rotation=np.eye(3), translation=np.zeros(3),
                       fx=1, fy=1, cx=0, cy=0, height=0, width=4)


class TestManifest:
    def test_roundtrip_exact(self, tmp_path):
        views = generate_camera_ring(3, radius=1.7, elevations_deg=(-15, 15))
        path = tmp_path / "cams.json"
        save_camera_manifest(path, views)
        loaded = load_camera_manifest(path)
        assert len(loaded) == len(views)
        for a, b in zip(views, loaded):
            assert a.index == b.index
            np.testing.assert_array_equal(a.rotation, b.rotation)
            np.testing.assert_array_equal(a.translation, b.translation)
            assert (a.fx, a.fy, a.cx, a.cy) == (b.fx, b.fy, b.cx, b.cy)
            assert (a.height, a.width) == (b.height, b.width)

    def test_bad_manifest(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"nope": []}), encoding="utf-8")
        with pytest.raises(ValidationError):
            load_camera_manifest(path)

    def test_rotation_is_row_major(self, tmp_path):
        views = generate_camera_ring(1, elevations_deg=(0.0,))
        path = tmp_path / "cams.json"
        save_camera_manifest(path, views)
        entry = json.loads(path.read_text())["views"][0]
        flat = np.asarray(entry["rotation"]).reshape(3, 3)
        np.testing.assert_array_equal(flat, views[0].rotation)
