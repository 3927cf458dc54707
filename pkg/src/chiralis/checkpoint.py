"""Binary parameter checkpoints.

Layout (little-endian): magic "CHIR" | version u32 | dim u32 | each
parameter array as f32 row-major in NetworkParams field order | CRC32 u32
computed over all preceding bytes. Values are quantized to f32 on save.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from .errors import CheckpointError
from .network import NetworkParams

MAGIC = b"CHIR"
VERSION = 1


def save_checkpoint(path, params: NetworkParams) -> None:
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<II", VERSION, params.dim)
    for arr in params.arrays().values():
        blob += np.ascontiguousarray(arr, dtype="<f4").tobytes()
    blob += struct.pack("<I", zlib.crc32(bytes(blob)) & 0xFFFFFFFF)
    Path(path).write_bytes(bytes(blob))


def load_checkpoint(path) -> NetworkParams:
    blob = Path(path).read_bytes()
    if len(blob) < 16:
        raise CheckpointError(f"{path}: file too short to be a checkpoint")
    if blob[:4] != MAGIC:
        raise CheckpointError(f"{path}: bad magic {blob[:4]!r}")
    version, dim = struct.unpack("<II", blob[4:12])
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    n_entries = 5 * dim * dim + 4 * dim
    expected = 12 + 4 * n_entries + 4
    if len(blob) != expected:
        raise CheckpointError(
            f"{path}: size mismatch (got {len(blob)} bytes, expected "
            f"{expected} for dim {dim})")
    stored_crc = struct.unpack("<I", blob[-4:])[0]
    actual_crc = zlib.crc32(blob[:-4]) & 0xFFFFFFFF
    if stored_crc != actual_crc:
        raise CheckpointError(f"{path}: checksum mismatch")

    flat = np.frombuffer(blob[12:-4], dtype="<f4").astype(np.float64)
    offset = 0
    arrays = {}
    for name in ("enc_w1", "enc_b1", "enc_w2", "enc_b2", "proj",
                 "dec_w1", "dec_b1", "dec_w2", "dec_b2"):
        shape = (dim,) if name.endswith(("b1", "b2")) else (dim, dim)
        size = int(np.prod(shape))
        arrays[name] = flat[offset:offset + size].reshape(shape)
        offset += size
    return NetworkParams(**arrays)
