"""Checkpoint container: named float32 arrays plus a JSON metadata block."""

from __future__ import annotations

import json
import struct

import numpy as np

from ..errors import ParseError, ValidationError

MODEL_MAGIC = b"CVADMODL"
FORMAT_VERSION = 1


def save_model(path, kind: str, meta: dict, arrays: dict) -> None:
    """Write a model checkpoint.

    Layout, all integers little-endian: 8-byte magic, u32 format
    version, u8-length-prefixed kind string, u32-length-prefixed JSON
    metadata (sorted keys), u32 array count, then per array a
    u8-length-prefixed name, u8 ndim, u32 dims, and the float32
    row-major payload. Arrays are stored in sorted-name order so the
    bytes are a pure function of the contents.
    """
    kind_b = kind.encode("utf-8")
    if len(kind_b) > 255:
        raise ValidationError("model kind string too long")
    meta_b = json.dumps(meta, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<B", len(kind_b)))
        fh.write(kind_b)
        fh.write(struct.pack("<I", len(meta_b)))
        fh.write(meta_b)
        fh.write(struct.pack("<I", len(arrays)))
        for name in sorted(arrays):
            arr = np.ascontiguousarray(arrays[name], dtype="<f4")
            name_b = name.encode("utf-8")
            if len(name_b) > 255:
                raise ValidationError("array name too long")
            fh.write(struct.pack("<B", len(name_b)))
            fh.write(name_b)
            fh.write(struct.pack("<B", arr.ndim))
            for d in arr.shape:
                fh.write(struct.pack("<I", d))
            fh.write(arr.tobytes())


def _take(buf: bytes, pos: int, n: int):
    if pos + n > len(buf):
        raise ParseError("model file truncated")
    return buf[pos:pos + n], pos + n


def load_model(path):
    """Read a checkpoint back as (kind, meta, {name: float32 array})."""
    with open(path, "rb") as fh:
        buf = fh.read()
    chunk, pos = _take(buf, 0, 8)
    if chunk != MODEL_MAGIC:
        raise ParseError("bad model magic")
    chunk, pos = _take(buf, pos, 4)
    version = struct.unpack("<I", chunk)[0]
    if version != FORMAT_VERSION:
        raise ParseError(f"unsupported model format version {version}")
    chunk, pos = _take(buf, pos, 1)
    chunk, pos = _take(buf, pos, chunk[0])
    kind = chunk.decode("utf-8")
    chunk, pos = _take(buf, pos, 4)
    chunk, pos = _take(buf, pos, struct.unpack("<I", chunk)[0])
    try:
        meta = json.loads(chunk.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"bad model metadata: {exc}") from exc
    chunk, pos = _take(buf, pos, 4)
    n_arrays = struct.unpack("<I", chunk)[0]
    arrays = {}
    for _ in range(n_arrays):
        chunk, pos = _take(buf, pos, 1)
        chunk, pos = _take(buf, pos, chunk[0])
        name = chunk.decode("utf-8")
        chunk, pos = _take(buf, pos, 1)
        ndim = chunk[0]
        shape = []
        for _ in range(ndim):
            chunk, pos = _take(buf, pos, 4)
            shape.append(struct.unpack("<I", chunk)[0])
        count = 1
        for d in shape:
            count *= d
        chunk, pos = _take(buf, pos, 4 * count)
        arrays[name] = np.frombuffer(chunk, dtype="<f4").reshape(shape).copy()
    if pos != len(buf):
        raise ParseError("trailing bytes after model payload")
    return kind, meta, arrays
