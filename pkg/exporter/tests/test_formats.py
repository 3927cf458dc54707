import numpy as np
import pytest

from chiralis_exporter.formats import (FormatError, load_cameras, load_mesh,
                                       read_view_maps, write_view_maps)


class TestContainer:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(0)
        features = rng.normal(size=(2, 4, 5, 3)).astype(np.float32)
        masks = (rng.random((2, 4, 5)) > 0.5).astype(np.float32)
        path = tmp_path / "maps.cfv"
        write_view_maps(path, features, masks)
        back_f, back_m = read_view_maps(path)
        np.testing.assert_array_equal(back_f, features)
        np.testing.assert_array_equal(back_m, masks)

    def test_truncation_detected(self, tmp_path):
        path = tmp_path / "maps.cfv"
        write_view_maps(path, np.zeros((1, 2, 2, 1), np.float32),
                        np.ones((1, 2, 2), np.float32))
        path.write_bytes(path.read_bytes()[:-3])
        with pytest.raises(FormatError, match="size"):
            read_view_maps(path)

    def test_corruption_detected(self, tmp_path):
        path = tmp_path / "maps.cfv"
        write_view_maps(path, np.zeros((1, 2, 2, 1), np.float32),
                        np.ones((1, 2, 2), np.float32))
        blob = bytearray(path.read_bytes())
        blob[30] ^= 0x01
        path.write_bytes(bytes(blob))
        with pytest.raises(FormatError, match="checksum"):
            read_view_maps(path)

    def test_bad_shapes(self, tmp_path):
        with pytest.raises(FormatError):
            write_view_maps(tmp_path / "x.cfv", np.zeros((2, 2, 2)),
                            np.zeros((2, 2)))


class TestMeshAndCameras:
    def test_load_mesh(self, workspace):
        verts, faces = load_mesh(workspace / "shape.off")
        assert verts.shape[1] == 3
        assert faces.shape[1] == 3
        assert faces.max() < len(verts)

    def test_load_cameras(self, workspace):
        cameras = load_cameras(workspace / "cameras.json")
        assert [c.index for c in cameras] == [0, 1]
        assert cameras[0].height == 64

    def test_bad_camera_file(self, tmp_path):
        bad = tmp_path / "c.json"
        bad.write_text("{}", encoding="utf-8")
        with pytest.raises(FormatError):
            load_cameras(bad)

    def test_obj_mesh(self, tmp_path):
        obj = tmp_path / "m.obj"
        obj.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n",
                       encoding="utf-8")
        verts, faces = load_mesh(obj)
        assert len(verts) == 3 and len(faces) == 1
