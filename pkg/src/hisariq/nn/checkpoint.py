"""Weight checkpoint file.

Layout (little-endian):

    magic "HIQW"      4 bytes
    version           u16
    entry count       u16
    per entry:
        name length   u16, then UTF-8 name bytes
        shape rank    u8
        dims          u32 x rank
        values        float32 x prod(dims)
"""

from __future__ import annotations

import struct
from collections import OrderedDict

import numpy as np

from ..errors import ContainerFormatError

MAGIC = b"HIQW"
VERSION = 1


def save_checkpoint(named_arrays, path) -> None:
    """Write (name, array) pairs; values are stored as float32."""
    named_arrays = list(named_arrays)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<HH", VERSION, len(named_arrays)))
        for name, array in named_arrays:
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            array = np.asarray(array)
            fh.write(struct.pack("<B", array.ndim))
            fh.write(struct.pack(f"<{array.ndim}I", *array.shape))
            fh.write(np.ascontiguousarray(array, dtype="<f4").tobytes())


def load_checkpoint(path) -> "OrderedDict[str, np.ndarray]":
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 8 or raw[:4] != MAGIC:
        raise ContainerFormatError(
            f"{path}: bad checkpoint magic at offset 0, expected {MAGIC!r}")
    version, count = struct.unpack_from("<HH", raw, 4)
    if version != VERSION:
        raise ContainerFormatError(
            f"{path}: unsupported checkpoint version {version}")
    entries = OrderedDict()
    offset = 8
    try:
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", raw, offset)
            offset += 2
            name = raw[offset:offset + name_len].decode("utf-8")
            offset += name_len
            (rank,) = struct.unpack_from("<B", raw, offset)
            offset += 1
            dims = struct.unpack_from(f"<{rank}I", raw, offset)
            offset += 4 * rank
            n = int(np.prod(dims, dtype=np.int64)) if rank else 1
            values = np.frombuffer(raw, dtype="<f4", count=n, offset=offset)
            offset += 4 * n
            entries[name] = values.reshape(dims).copy()
    except (struct.error, ValueError) as exc:
        raise ContainerFormatError(
            f"{path}: truncated checkpoint near offset {offset}: {exc}")
    if offset != len(raw):
        raise ContainerFormatError(
            f"{path}: {len(raw) - offset} trailing bytes after entries")
    return entries
