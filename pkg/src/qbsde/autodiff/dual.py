"""Forward mode with a batch of tangent directions.

A Dual carries a primal array p of shape S and tangents t of shape (V, *S),
one row per direction, so V directional derivatives ride along one sweep.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np


def _lift(t: np.ndarray, p_ndim: int, target_ndim: int) -> np.ndarray:
    """Insert singleton axes after the direction axis so t lines up with a wider primal."""
    extra = target_ndim - p_ndim
    if extra <= 0:
        return t
    return t.reshape((t.shape[0],) + (1,) * extra + t.shape[1:])


class Dual:
    __array_priority__ = 100.0

    def __init__(self, primal, tangent):
        self.p = np.asarray(primal, dtype=np.float64)
        self.t = np.asarray(tangent, dtype=np.float64)
        if self.t.shape[1:] != self.p.shape:
            raise ValueError(f"tangent shape {self.t.shape} does not match primal {self.p.shape}")

    @classmethod
    def seed(cls, primal, directions) -> "Dual":
        """Leaf with given tangent rows (directions has shape (V, *primal.shape))."""
        return cls(primal, directions)

    @property
    def n_dirs(self) -> int:
        return self.t.shape[0]

    @property
    def shape(self):
        return self.p.shape

    @property
    def ndim(self):
        return self.p.ndim

    def __repr__(self):
        return f"Dual(shape={self.p.shape}, dirs={self.t.shape[0]})"

    def _bin(self, o, p):
        """Tangents of self and o lifted to the rank of the result p."""
        ta = _lift(self.t, self.p.ndim, p.ndim)
        if isinstance(o, Dual):
            return ta, _lift(o.t, o.p.ndim, p.ndim)
        return ta, None

    def __add__(self, o):
        ov = o.p if isinstance(o, Dual) else o
        p = self.p + ov
        ta, tb = self._bin(o, p)
        return Dual(p, np.broadcast_to(ta if tb is None else ta + tb, (ta.shape[0],) + p.shape))

    __radd__ = __add__

    def __neg__(self):
        return Dual(-self.p, -self.t)

    def __sub__(self, o):
        return self + (-o)

    def __rsub__(self, o):
        return (-self) + o

    def __mul__(self, o):
        if isinstance(o, Dual):
            p = self.p * o.p
            ta, tb = self._bin(o, p)
            return Dual(p, ta * o.p + self.p * tb)
        p = self.p * o
        ta, _ = self._bin(None, p)
        return Dual(p, np.broadcast_to(ta * o, (ta.shape[0],) + p.shape))

    __rmul__ = __mul__

    def __truediv__(self, o):
        if isinstance(o, Dual):
            return self * o.reciprocal()
        return self * (1.0 / np.asarray(o, dtype=np.float64))

    def __rtruediv__(self, o):
        return self.reciprocal() * o

    def reciprocal(self):
        r = 1.0 / self.p
        return Dual(r, -(r * r) * self.t)

    def __pow__(self, k):
        return Dual(self.p ** k, (k * self.p ** (k - 1)) * self.t)

    def __matmul__(self, o):
        if isinstance(o, Dual):
            return Dual(self.p @ o.p, self.t @ o.p + self.p @ o.t)
        return Dual(self.p @ o, self.t @ o)

    def __rmatmul__(self, o):
        o = np.asarray(o)
        return Dual(o @ self.p, o @ self.t)

    @property
    def T(self):
        return Dual(self.p.T, np.swapaxes(self.t, -1, -2))

    def __getitem__(self, idx):
        idx = idx if isinstance(idx, tuple) else (idx,)
        return Dual(self.p[idx], self.t[(slice(None),) + idx])

    def reshape(self, *shape):
        shape = shape[0] if len(shape) == 1 and isinstance(shape[0], tuple) else shape
        return Dual(self.p.reshape(shape), self.t.reshape((self.t.shape[0],) + tuple(shape)))


def concat(parts: Sequence, axis: int = -1) -> Dual:
    if axis >= 0:
        raise ValueError("use a negative axis")
    duals = [p for p in parts if isinstance(p, Dual)]
    v = duals[0].n_dirs
    ps = [p.p if isinstance(p, Dual) else np.asarray(p, dtype=np.float64) for p in parts]
    ts = [p.t if isinstance(p, Dual) else np.zeros((v,) + np.shape(p)) for p in parts]
    return Dual(np.concatenate(ps, axis=axis), np.concatenate(ts, axis=axis))
