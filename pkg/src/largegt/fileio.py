"""Low-level helpers for the little-endian binary artifact files.

Every binary artifact starts with a 4-byte magic, a uint32 format version
and format-specific uint32/uint64 header fields, followed by a raw
row-major payload. Readers fail with FormatError on any mismatch or
truncation instead of guessing.
"""

from __future__ import annotations

import struct
from typing import BinaryIO

import numpy as np

from .errors import FormatError

FORMAT_VERSION = 1

MAGIC_FEATURES = b"LGTF"
MAGIC_LOCAL_NODES = b"LGTS"
MAGIC_CONTEXT = b"LGTC"
MAGIC_TENSOR = b"LGTP"


def read_exact(f: BinaryIO, n: int, what: str) -> bytes:
    buf = f.read(n)
    if len(buf) != n:
        raise FormatError(f"truncated file while reading {what} "
                          f"(wanted {n} bytes, got {len(buf)})")
    return buf


def check_magic(f: BinaryIO, magic: bytes) -> None:
    got = read_exact(f, 4, "magic")
    if got != magic:
        raise FormatError(f"bad magic {got!r}, expected {magic!r}")
    version = struct.unpack("<I", read_exact(f, 4, "version"))[0]
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {version}, "
                          f"expected {FORMAT_VERSION}")


def write_magic(f: BinaryIO, magic: bytes) -> None:
    f.write(magic)
    f.write(struct.pack("<I", FORMAT_VERSION))


def read_u32(f: BinaryIO, what: str) -> int:
    return struct.unpack("<I", read_exact(f, 4, what))[0]


def read_u64(f: BinaryIO, what: str) -> int:
    return struct.unpack("<Q", read_exact(f, 8, what))[0]


def write_u32(f: BinaryIO, value: int) -> None:
    f.write(struct.pack("<I", value))


def write_u64(f: BinaryIO, value: int) -> None:
    f.write(struct.pack("<Q", value))


def read_array(f: BinaryIO, dtype: str, count: int, what: str) -> np.ndarray:
    dt = np.dtype(dtype)
    buf = read_exact(f, dt.itemsize * count, what)
    return np.frombuffer(buf, dtype=dt).copy()


def expect_eof(f: BinaryIO, path: str) -> None:
    if f.read(1):
        raise FormatError(f"{path}: trailing bytes after payload")
