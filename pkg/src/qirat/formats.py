"""Shared binary header for embedding and index files.

All index files start with a fixed 64-byte little-endian header:

    bytes 0-3    magic (4 ASCII bytes: "EMBS", "SQIX", "PQIX", "HNSX")
    bytes 4-7    version, u32 (currently 1)
    byte  8      dtype code, u8 (0 = float32, 1 = float16)
    byte  9      normalized flag, u8 (0/1)
    bytes 10-15  reserved, zero
    bytes 16-19  dim, u32
    bytes 20-23  reserved, zero
    bytes 24-31  count, u64
    bytes 32-63  reserved, zero

followed by a magic-specific payload.
"""

from __future__ import annotations

import struct
from typing import BinaryIO

import numpy as np

from .errors import (
    BadMagicError,
    HeaderFieldError,
    TruncatedFileError,
    UnsupportedVersionError,
)

HEADER_SIZE = 64
VERSION = 1

MAGIC_EMBEDDINGS = b"EMBS"
MAGIC_SQ = b"SQIX"
MAGIC_PQ = b"PQIX"
MAGIC_HNSW = b"HNSX"

DTYPE_CODES = {np.dtype(np.float32): 0, np.dtype(np.float16): 1}
CODE_DTYPES = {0: np.dtype(np.float32), 1: np.dtype(np.float16)}

# Guards against headers that would allocate absurd amounts of memory.
MAX_DIM = 2**20
MAX_COUNT = 2**40


def dtype_code(dtype: np.dtype) -> int:
    try:
        return DTYPE_CODES[np.dtype(dtype)]
    except KeyError:
        raise ValueError(f"unsupported storage dtype: {dtype}") from None


def write_header(
    f: BinaryIO, magic: bytes, dtype: np.dtype, normalized: bool, dim: int, count: int
) -> None:
    header = struct.pack(
        "<4sIBB6xI4xQ32x", magic, VERSION, dtype_code(dtype), int(normalized), dim, count
    )
    assert len(header) == HEADER_SIZE
    f.write(header)


def read_header(f: BinaryIO, magic: bytes) -> tuple[np.dtype, bool, int, int]:
    """Read and validate a header, returning (dtype, normalized, dim, count)."""
    raw = f.read(HEADER_SIZE)
    if len(raw) < HEADER_SIZE:
        raise TruncatedFileError(f"file shorter than the {HEADER_SIZE}-byte header")
    got_magic, version, dcode, norm, dim, count = struct.unpack("<4sIBB6xI4xQ32x", raw)
    if got_magic != magic:
        raise BadMagicError(f"expected magic {magic!r}, found {got_magic!r}")
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported format version {version}")
    if dcode not in CODE_DTYPES:
        raise HeaderFieldError(f"unknown dtype code {dcode}")
    if dim == 0 or dim > MAX_DIM:
        raise HeaderFieldError(f"header dim {dim} out of range")
    if count > MAX_COUNT:
        raise HeaderFieldError(f"header count {count} out of range")
    return CODE_DTYPES[dcode], bool(norm), dim, count


def read_array(f: BinaryIO, dtype: np.dtype, shape: tuple[int, ...]) -> np.ndarray:
    """Read a row-major array, raising TruncatedFileError on short payloads."""
    n = int(np.prod(shape)) if shape else 1
    nbytes = n * np.dtype(dtype).itemsize
    raw = f.read(nbytes)
    if len(raw) < nbytes:
        raise TruncatedFileError(
            f"payload truncated: expected {nbytes} bytes, found {len(raw)}"
        )
    return np.frombuffer(raw, dtype=dtype).reshape(shape).copy()
