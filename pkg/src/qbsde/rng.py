"""Counter-based, splittable random streams.

A stream is identified by a 64-bit key (from the user seed) and a 64-bit
stream id (hashed from a purpose label and optional integer indices).
Row ``r`` of any draw only depends on (key, stream id, r), so draws for a
subset of paths made in any order or on any worker agree bitwise.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

from . import kernels


def _hash64(*parts) -> int:
    h = hashlib.blake2b(digest_size=8)
    for p in parts:
        if isinstance(p, str):
            h.update(b"s" + p.encode())
        else:
            h.update(b"i" + struct.pack("<Q", int(p) & 0xFFFFFFFFFFFFFFFF))
    return int.from_bytes(h.digest(), "little")


class Stream:
    """One independent random stream; ``split`` derives children."""

    def __init__(self, seed: int, purpose: str = "root", *, _sid: int | None = None):
        seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.seed = seed
        self.purpose = purpose
        self._k0 = seed & 0xFFFFFFFF
        self._k1 = seed >> 32
        self.sid = _hash64(purpose) if _sid is None else _sid

    def split(self, *labels) -> "Stream":
        return Stream(self.seed, self.purpose, _sid=_hash64(self.sid, *labels))

    def _words(self):
        return self._k0, self._k1, self.sid & 0xFFFFFFFF, self.sid >> 32

    def normals(self, n_rows: int, n_cols: int, row0: int = 0) -> np.ndarray:
        return kernels.normals(*self._words(), int(row0), int(n_rows), int(n_cols))

    def uniforms(self, n_rows: int, n_cols: int, row0: int = 0) -> np.ndarray:
        return kernels.uniforms(*self._words(), int(row0), int(n_rows), int(n_cols))

    def normal(self, shape) -> np.ndarray:
        shape = (shape,) if np.isscalar(shape) else tuple(shape)
        rows = shape[0] if shape else 1
        cols = int(np.prod(shape[1:])) if len(shape) > 1 else 1
        return self.normals(rows, cols).reshape(shape)

    def uniform(self, shape) -> np.ndarray:
        shape = (shape,) if np.isscalar(shape) else tuple(shape)
        rows = shape[0] if shape else 1
        cols = int(np.prod(shape[1:])) if len(shape) > 1 else 1
        return self.uniforms(rows, cols).reshape(shape)

    def generator(self) -> np.random.Generator:
        """A numpy Generator seeded from this stream (for non-hot utility draws)."""
        return np.random.Generator(np.random.Philox(key=[self._k0 | (self._k1 << 32), self.sid]))


def stream(seed: int, purpose: str, *labels) -> Stream:
    s = Stream(seed, purpose)
    return s.split(*labels) if labels else s
