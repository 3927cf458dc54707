import numpy as np
import pytest

from chiralis.checkpoint import load_checkpoint, save_checkpoint
from chiralis.errors import CheckpointError
from chiralis.network import init_params


def quantize(params):
    return params.map(lambda a: a.astype(np.float32).astype(np.float64))


class TestCheckpoint:
    def test_roundtrip_after_quantization(self, tmp_path):
        params = init_params(6, seed=5)
        path = tmp_path / "net.chir"
        save_checkpoint(path, params)
        loaded = load_checkpoint(path)
        expected = quantize(params)
        for name, arr in loaded.arrays().items():
            np.testing.assert_array_equal(arr, expected.arrays()[name])

    def test_deterministic_bytes(self, tmp_path):
        params = init_params(4, seed=9)
        a, b = tmp_path / "a.chir", tmp_path / "b.chir"
        save_checkpoint(a, params)
        save_checkpoint(b, params)
        assert a.read_bytes() == b.read_bytes()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "x.chir"
        save_checkpoint(path, init_params(3, seed=0))
        blob = bytearray(path.read_bytes())
        blob[0] = ord("X")
        path.write_bytes(bytes(blob))
        with pytest.raises(CheckpointError, match="magic"):
            load_checkpoint(path)

    def test_truncation(self, tmp_path):
        path = tmp_path / "x.chir"
        save_checkpoint(path, init_params(3, seed=0))
        path.write_bytes(path.read_bytes()[:-5])
        with pytest.raises(CheckpointError, match="size"):
            load_checkpoint(path)

    def test_corruption(self, tmp_path):
        path = tmp_path / "x.chir"
        save_checkpoint(path, init_params(3, seed=0))
        blob = bytearray(path.read_bytes())
        blob[30] ^= 0x55
        path.write_bytes(bytes(blob))
        with pytest.raises(CheckpointError, match="checksum"):
            load_checkpoint(path)

    def test_bad_version(self, tmp_path):
        path = tmp_path / "x.chir"
        save_checkpoint(path, init_params(3, seed=0))
        blob = bytearray(path.read_bytes())
        blob[4] = 42
        path.write_bytes(bytes(blob))
        with pytest.raises(CheckpointError, match="version"):
            load_checkpoint(path)
