"""Binary cache of kernel frames.

Layout (little endian): a fixed header

    magic "NAHMFRMS" | version u32 | L u32 | r u32 | grid dims 4 x u32 |
    q u32 | frame dim u64 | base 4 x f64 | wilson r f64 | gap_min f64

followed by the frames as complex128 in C order (grid, frame row, column)
and a 32-byte SHA-256 digest of everything before it.
"""

from __future__ import annotations

import hashlib
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"NAHMFRMS"
VERSION = 1
_HEADER = struct.Struct("<8sIII4IIQ4ddd")
_DIGEST = 32


class CacheFormatError(ValueError):
    """Not a frame cache, or truncated."""


class CacheVersionError(CacheFormatError):
    """Written by an incompatible format version."""


class CacheChecksumError(CacheFormatError):
    """Payload does not match its digest."""


@dataclass(frozen=True)
class FrameCache:
    L: int
    rank: int
    grid: tuple
    q: int
    base: tuple
    wilson_r: float
    gap_min: float
    frames: np.ndarray


def write_frames(path, bundle) -> Path:
    """Write the frames of a :class:`KernelBundle` atomically."""
    path = Path(path)
    frames = np.ascontiguousarray(bundle.frames, dtype="<c16")
    dim = frames.shape[-2]
    header = _HEADER.pack(
        MAGIC, VERSION, bundle.L, bundle.rank, *bundle.grid.resolution, bundle.q, dim,
        *bundle.grid.base, bundle.wilson_r, bundle.gap_min,
    )
    body = header + frames.tobytes()
    tmp = path.with_suffix(path.suffix + ".tmp")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(tmp, "wb") as fh:
        fh.write(body)
        fh.write(hashlib.sha256(body).digest())
    os.replace(tmp, path)
    return path


def read_frames(path) -> FrameCache:
    """Read and verify a frame cache written by :func:`write_frames`."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size + _DIGEST:
        raise CacheFormatError(f"{path}: too short for a frame cache")
    magic, version, L, r, g0, g1, g2, g3, q, dim, b0, b1, b2, b3, w, gap = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise CacheFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise CacheVersionError(f"{path}: format version {version}, expected {VERSION}")
    grid = (g0, g1, g2, g3)
    n = int(np.prod(grid)) * dim * q
    expected = _HEADER.size + 16 * n + _DIGEST
    if len(data) != expected:
        raise CacheChecksumError(f"{path}: size {len(data)} does not match header ({expected})")
    body, digest = data[:-_DIGEST], data[-_DIGEST:]
    if hashlib.sha256(body).digest() != digest:
        raise CacheChecksumError(f"{path}: checksum mismatch")
    frames = np.frombuffer(body, dtype="<c16", offset=_HEADER.size).reshape(grid + (dim, q)).astype(complex)
    return FrameCache(L, r, grid, q, (b0, b1, b2, b3), w, gap, frames)
