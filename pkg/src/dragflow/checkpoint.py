"""Binary parameter checkpoints.

Layout: magic ``DRGF``, format version u32, then one record per parameter:
name length (u32), UTF-8 name, rank (u32), dims as u64, float64 payload.
All integers and floats little-endian. Records run until end of file.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"DRGF"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, named_arrays: dict[str, np.ndarray]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        for name, arr in named_arrays.items():
            # asarray, not ascontiguousarray: the latter promotes 0-d to 1-d
            arr = np.asarray(arr, dtype="<f8")
            nb = name.encode("utf-8")
            f.write(struct.pack("<I", len(nb)))
            f.write(nb)
            f.write(struct.pack("<I", arr.ndim))
            for d in arr.shape:
                f.write(struct.pack("<Q", d))
            f.write(arr.tobytes())


def load_checkpoint(path) -> dict[str, np.ndarray]:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise CheckpointError(f"{path}: bad magic {data[:4]!r}, expected {MAGIC!r}")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported format version {version}")
    out: dict[str, np.ndarray] = {}
    off = 8
    n = len(data)
    while off < n:
        if off + 4 > n:
            raise CheckpointError(f"{path}: truncated record header at byte {off}")
        (name_len,) = struct.unpack_from("<I", data, off)
        off += 4
        if off + name_len > n:
            raise CheckpointError(f"{path}: truncated name at byte {off}")
        name = data[off:off + name_len].decode("utf-8")
        off += name_len
        if off + 4 > n:
            raise CheckpointError(f"{path}: truncated rank at byte {off}")
        (rank,) = struct.unpack_from("<I", data, off)
        off += 4
        if off + 8 * rank > n:
            raise CheckpointError(f"{path}: truncated dims at byte {off}")
        dims = struct.unpack_from(f"<{rank}Q", data, off) if rank else ()
        off += 8 * rank
        count = 1
        for d in dims:
            count *= d
        nbytes = 8 * count
        if off + nbytes > n:
            raise CheckpointError(f"{path}: truncated payload at byte {off}")
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=off).reshape(dims)
        if name in out:
            raise CheckpointError(f"{path}: duplicate parameter {name!r}")
        out[name] = arr.astype(np.float64)
        off += nbytes
    return out
