"""Named-tensor directory checkpoints.

A checkpoint directory holds one binary file per tensor (magic, version,
rank, dims, float32 payload) named after the parameter, plus whatever
key-value config the caller adds alongside.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np

from .. import fileio
from ..errors import FormatError

TENSOR_SUFFIX = ".tns"


def save_named_tensors(dir_path: str | Path,
                       tensors: dict[str, np.ndarray]) -> None:
    d = Path(dir_path)
    d.mkdir(parents=True, exist_ok=True)
    for name, arr in tensors.items():
        if "/" in name or name.startswith("."):
            raise FormatError(f"tensor name {name!r} not usable as a file name")
        arr32 = np.ascontiguousarray(arr, dtype="<f4")
        with open(d / f"{name}{TENSOR_SUFFIX}", "wb") as f:
            fileio.write_magic(f, fileio.MAGIC_TENSOR)
            fileio.write_u32(f, arr32.ndim)
            for dim in arr32.shape:
                fileio.write_u32(f, dim)
            f.write(arr32.tobytes())


def load_named_tensors(dir_path: str | Path) -> dict[str, np.ndarray]:
    d = Path(dir_path)
    out: dict[str, np.ndarray] = {}
    for p in sorted(d.glob(f"*{TENSOR_SUFFIX}")):
        with open(p, "rb") as f:
            fileio.check_magic(f, fileio.MAGIC_TENSOR)
            ndim = fileio.read_u32(f, "rank")
            shape = tuple(fileio.read_u32(f, "dim") for _ in range(ndim))
            count = int(np.prod(shape)) if shape else 1
            arr = fileio.read_array(f, "<f4", count, "tensor payload")
            fileio.expect_eof(f, str(p))
        out[p.name[: -len(TENSOR_SUFFIX)]] = arr.reshape(shape)
    return out


def digest_dir(dir_path: str | Path) -> str:
    """Content hash of every file under a checkpoint directory."""
    d = Path(dir_path)
    h = hashlib.sha256()
    for p in sorted(q for q in d.rglob("*") if q.is_file()):
        h.update(str(p.relative_to(d)).encode())
        h.update(p.read_bytes())
    return h.hexdigest()
