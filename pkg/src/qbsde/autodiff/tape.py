"""Reverse mode on numpy arrays: a tape of nodes with local vector-Jacobian products."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


def unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum g down to `shape` (inverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    lead = g.ndim - len(shape)
    if lead > 0:
        g = g.sum(axis=tuple(range(lead)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


class Tape:
    """Append-only node list. Each node is (kind, parent indices, vjp)."""

    def __init__(self):
        self.kinds: list[str] = []
        self.parents: list[tuple[int, ...]] = []
        self.vjps: list[Callable | None] = []
        self.shapes: list[tuple] = []

    def __len__(self):
        return len(self.kinds)

    def _push(self, kind, value, parents=(), vjp=None) -> "Var":
        self.kinds.append(kind)
        self.parents.append(tuple(p.index for p in parents))
        self.vjps.append(vjp)
        self.shapes.append(np.shape(value))
        return Var(np.asarray(value, dtype=np.float64), self, len(self.kinds) - 1)

    def var(self, value) -> "Var":
        return self._push("leaf", value)

    def op(self, kind: str, value, parents: Sequence["Var"], vjp: Callable) -> "Var":
        """Record `value` computed from `parents`; vjp(g) returns one cotangent per parent."""
        return self._push(kind, value, parents, vjp)

    def gradient(self, out: "Var", wrt: Sequence["Var"]) -> list[np.ndarray]:
        """One reverse sweep; returns d out / d w for every w in `wrt` (out must be scalar)."""
        if out.tape is not self:
            raise ValueError("output recorded on a different tape")
        grads: list[np.ndarray | None] = [None] * len(self.kinds)
        grads[out.index] = np.ones(self.shapes[out.index])
        for i in range(out.index, -1, -1):
            g = grads[i]
            vjp = self.vjps[i]
            if g is None or vjp is None:
                continue
            for p, gp in zip(self.parents[i], vjp(g)):
                if gp is None:
                    continue
                gp = unbroadcast(np.asarray(gp), self.shapes[p])
                grads[p] = gp if grads[p] is None else grads[p] + gp
        return [np.zeros(self.shapes[w.index]) if grads[w.index] is None else grads[w.index] for w in wrt]


def _lift(other, tape):
    if isinstance(other, Var):
        return other
    return None


class Var:
    __array_priority__ = 100.0

    def __init__(self, value: np.ndarray, tape: Tape, index: int):
        self.value = value
        self.tape = tape
        self.index = index

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def __repr__(self):
        return f"Var(shape={self.value.shape}, index={self.index})"

    # arithmetic; constants are plain arrays or scalars
    def __add__(self, o):
        if isinstance(o, Var):
            return self.tape.op("add", self.value + o.value, (self, o), lambda g: (g, g))
        return self.tape.op("add", self.value + o, (self,), lambda g: (g,))

    __radd__ = __add__

    def __neg__(self):
        return self.tape.op("neg", -self.value, (self,), lambda g: (-g,))

    def __sub__(self, o):
        if isinstance(o, Var):
            return self.tape.op("sub", self.value - o.value, (self, o), lambda g: (g, -g))
        return self.tape.op("sub", self.value - o, (self,), lambda g: (g,))

    def __rsub__(self, o):
        return self.tape.op("sub", o - self.value, (self,), lambda g: (-g,))

    def __mul__(self, o):
        a = self.value
        if isinstance(o, Var):
            b = o.value
            return self.tape.op("mul", a * b, (self, o), lambda g: (g * b, g * a))
        return self.tape.op("mul", a * o, (self,), lambda g: (g * o,))

    __rmul__ = __mul__

    def __truediv__(self, o):
        if isinstance(o, Var):
            a, b = self.value, o.value
            return self.tape.op("div", a / b, (self, o), lambda g: (g / b, -g * a / (b * b)))
        return self.tape.op("div", self.value / o, (self,), lambda g: (g / o,))

    def __rtruediv__(self, o):
        b = self.value
        return self.tape.op("div", o / b, (self,), lambda g: (-g * o / (b * b),))

    def __pow__(self, k):
        if isinstance(k, Var):
            raise TypeError("variable exponents are not supported")
        a = self.value
        return self.tape.op("pow", a ** k, (self,), lambda g: (g * k * a ** (k - 1),))

    def __matmul__(self, o):
        if isinstance(o, Var):
            a, b = self.value, o.value
            return self.tape.op("matmul", a @ b, (self, o), lambda g: (_mm_ga(g, a, b), _mm_gb(g, a, b)))
        a, b = self.value, np.asarray(o)
        return self.tape.op("matmul", a @ b, (self,), lambda g: (_mm_ga(g, a, b),))

    def __rmatmul__(self, o):
        a, b = np.asarray(o), self.value
        return self.tape.op("matmul", a @ b, (self,), lambda g: (_mm_gb(g, a, b),))

    @property
    def T(self):
        return self.tape.op("transpose", self.value.T, (self,), lambda g: (g.T,))

    def __getitem__(self, idx):
        shape = self.value.shape
        basic = isinstance(idx, (int, slice)) or (
            isinstance(idx, tuple) and all(isinstance(i, (int, slice)) for i in idx))
        def vjp(g):
            out = np.zeros(shape)
            if basic:
                out[idx] = g
            else:
                np.add.at(out, idx, g)
            return (out,)
        return self.tape.op("index", self.value[idx], (self,), vjp)

    def reshape(self, *shape):
        old = self.value.shape
        return self.tape.op("reshape", self.value.reshape(*shape), (self,), lambda g: (g.reshape(old),))


def _mm_ga(g, a, b):
    if b.ndim == 1:
        return np.multiply.outer(g, b) if a.ndim > 1 else g * b
    if a.ndim == 1:
        return b @ g if g.ndim == 1 else np.einsum("...j,ij->...i", g, b)
    return g @ np.swapaxes(b, -1, -2)


def _mm_gb(g, a, b):
    if a.ndim == 1:
        return np.multiply.outer(a, g)
    if b.ndim == 1:
        return np.einsum("...i,...ij->j", g, a)
    return np.einsum("...ij,...ik->jk", a, g) if b.ndim == 2 else np.swapaxes(a, -1, -2) @ g


def concat(parts: Sequence, axis: int = -1):
    """Concatenate Vars (and constants) along `axis`."""
    vars_ = [p for p in parts if isinstance(p, Var)]
    if not vars_:
        return np.concatenate(parts, axis=axis)
    tape = vars_[0].tape
    vals = [p.value if isinstance(p, Var) else np.asarray(p) for p in parts]
    sizes = np.cumsum([v.shape[axis] for v in vals])[:-1]
    def vjp(g):
        pieces = np.split(g, sizes, axis=axis)
        return tuple(pc for pc, p in zip(pieces, parts) if isinstance(p, Var))
    return tape.op("concat", np.concatenate(vals, axis=axis), vars_, vjp)
