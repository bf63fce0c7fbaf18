"""Functions that work on plain arrays, tape variables and duals alike.

Problem definitions (drift, nonlinearity, terminal condition) are written
against this module so one definition serves every gradient estimator.
"""

from __future__ import annotations

import numpy as np

from . import dual as _dual
from . import tape as _tape
from .dual import Dual
from .tape import Var


def _unary(kind, f, df):
    def op(x):
        if isinstance(x, Var):
            y = f(x.value)
            d = df(x.value, y)
            return x.tape.op(kind, y, (x,), lambda g: (g * d,))
        if isinstance(x, Dual):
            y = f(x.p)
            return Dual(y, df(x.p, y) * x.t)
        return f(np.asarray(x, dtype=np.float64))
    op.__name__ = kind
    return op


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


exp = _unary("exp", np.exp, lambda x, y: y)
log = _unary("log", np.log, lambda x, y: 1.0 / x)
sqrt = _unary("sqrt", np.sqrt, lambda x, y: 0.5 / y)
tanh = _unary("tanh", np.tanh, lambda x, y: 1.0 - y * y)
sigmoid = _unary("sigmoid", _sigmoid, lambda x, y: y * (1.0 - y))
relu = _unary("relu", lambda x: np.maximum(x, 0.0), lambda x, y: (x > 0.0).astype(np.float64))
identity = _unary("identity", lambda x: x, lambda x, y: np.ones_like(x))
square = _unary("square", np.square, lambda x, y: 2.0 * x)
cos = _unary("cos", np.cos, lambda x, y: -np.sin(x))
sin = _unary("sin", np.sin, lambda x, y: np.cos(x))

ACTIVATIONS = {"identity": identity, "relu": relu, "sigmoid": sigmoid, "tanh": tanh}


def value(x) -> np.ndarray:
    if isinstance(x, Var):
        return x.value
    if isinstance(x, Dual):
        return x.p
    return np.asarray(x)


def sum(x, axis=None):  # noqa: A001
    if isinstance(x, Var):
        shape = x.value.shape
        def vjp(g):
            if axis is None:
                return (np.broadcast_to(g, shape),)
            return (np.broadcast_to(np.expand_dims(g, axis), shape),)
        return x.tape.op("sum", x.value.sum(axis=axis), (x,), vjp)
    if isinstance(x, Dual):
        if axis is None:
            return Dual(x.p.sum(), x.t.reshape(x.t.shape[0], -1).sum(axis=1))
        if axis >= 0:
            axis = axis - x.p.ndim
        return Dual(x.p.sum(axis=axis), x.t.sum(axis=axis))
    return np.sum(x, axis=axis)


def mean(x, axis=None):
    n = value(x).size if axis is None else value(x).shape[axis]
    return sum(x, axis=axis) * (1.0 / n)


def minimum(x, c):
    """Elementwise min with a constant; ties send the derivative to x."""
    mask = (value(x) <= c).astype(np.float64)
    return x * mask + np.where(mask > 0, 0.0, c)


def maximum(x, c):
    mask = (value(x) >= c).astype(np.float64)
    return x * mask + np.where(mask > 0, 0.0, c)


def min(x, axis=-1):  # noqa: A001
    """Min along an axis; derivative goes to the first argmin."""
    v = value(x)
    idx = np.argmin(v, axis=axis)
    onehot = np.zeros_like(v)
    np.put_along_axis(onehot, np.expand_dims(idx, axis), 1.0, axis=axis)
    return sum(x * onehot, axis=axis)


def concat(parts, axis=-1):
    if any(isinstance(p, Var) for p in parts):
        return _tape.concat(parts, axis=axis)
    if any(isinstance(p, Dual) for p in parts):
        return _dual.concat(parts, axis=axis)
    return np.concatenate(parts, axis=axis)
