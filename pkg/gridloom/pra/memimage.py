"""Memory-image container shared by the interpreter and both simulators.

Layout (all little-endian):
    magic   4 bytes  b"GLMI"
    count   uint32   number of entries
    entry*  name_len uint16, name utf-8, rank uint8, extents uint32 * rank,
            payload int32 * prod(extents), row-major
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Dict, Mapping, Union

import numpy as np

from gridloom.errors import MemImageError

MAGIC = b"GLMI"


def dumps_images(images: Mapping[str, np.ndarray]) -> bytes:
    chunks = [MAGIC, struct.pack("<I", len(images))]
    for name in sorted(images):
        arr = np.asarray(images[name], dtype="<i4")
        raw = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(raw)))
        chunks.append(raw)
        chunks.append(struct.pack("<B", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.tobytes(order="C"))
    return b"".join(chunks)


def loads_images(data: bytes) -> Dict[str, np.ndarray]:
    if data[:4] != MAGIC:
        raise MemImageError("not a memory image (bad magic)")
    pos = 4
    try:
        (count,) = struct.unpack_from("<I", data, pos)
        pos += 4
        out: Dict[str, np.ndarray] = {}
        for _ in range(count):
            (nlen,) = struct.unpack_from("<H", data, pos)
            pos += 2
            name = data[pos : pos + nlen].decode("utf-8")
            pos += nlen
            (rank,) = struct.unpack_from("<B", data, pos)
            pos += 1
            shape = struct.unpack_from(f"<{rank}I", data, pos)
            pos += 4 * rank
            size = int(np.prod(shape, dtype=np.int64)) if rank else 1
            payload = np.frombuffer(data, dtype="<i4", count=size, offset=pos)
            pos += 4 * size
            out[name] = payload.astype(np.int32).reshape(shape)
    except (struct.error, ValueError) as e:
        raise MemImageError(f"truncated memory image: {e}") from e
    if pos != len(data):
        raise MemImageError(f"{len(data) - pos} trailing bytes after last entry")
    return out


def save_images(path: Union[str, Path], images: Mapping[str, np.ndarray]) -> None:
    Path(path).write_bytes(dumps_images(images))


def load_images(path: Union[str, Path]) -> Dict[str, np.ndarray]:
    return loads_images(Path(path).read_bytes())
