"""Feedforward networks with explicit forward and reverse sweeps."""

from __future__ import annotations

import dataclasses
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from . import ops
from .tape import Var


class RejectedInput(ValueError):
    pass


class NumericError(ArithmeticError):
    pass


class Activation(str, Enum):
    IDENTITY = "identity"
    RELU = "relu"
    SIGMOID = "sigmoid"
    TANH = "tanh"


# Global Lipschitz constants of the scalar activations.
LIPSCHITZ = {
    Activation.IDENTITY: 1.0,
    Activation.RELU: 1.0,
    Activation.SIGMOID: 0.25,
    Activation.TANH: 1.0,
}


def activate(kind: Activation, z: np.ndarray) -> np.ndarray:
    if kind is Activation.IDENTITY:
        return z
    if kind is Activation.RELU:
        return np.maximum(z, 0.0)
    if kind is Activation.SIGMOID:
        return 0.5 * (1.0 + np.tanh(0.5 * z))
    return np.tanh(z)


def activate_prime(kind: Activation, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Derivative given pre-activation z and activation a. relu'(0) = 0."""
    if kind is Activation.IDENTITY:
        return np.ones_like(z)
    if kind is Activation.RELU:
        return (z > 0.0).astype(z.dtype)
    if kind is Activation.SIGMOID:
        return a * (1.0 - a)
    return 1.0 - a * a


@dataclasses.dataclass(frozen=True)
class FeedForwardNet:
    """Layers n_1..n_L; weights[l] has shape (n_{l+1}, n_l); one activation per layer map."""

    layer_sizes: tuple[int, ...]
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    activations: tuple[Activation, ...]

    def __post_init__(self):
        sizes = self.layer_sizes
        if len(sizes) < 2 or any(int(n) < 1 for n in sizes):
            raise RejectedInput(f"bad layer sizes {sizes}")
        if not (len(self.weights) == len(self.biases) == len(self.activations) == len(sizes) - 1):
            raise RejectedInput("weights, biases and activations must have one entry per layer map")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (sizes[l + 1], sizes[l]) or b.shape != (sizes[l + 1],):
                raise RejectedInput(f"layer {l}: shapes {w.shape}, {b.shape} inconsistent with {sizes}")

    @property
    def n_params(self) -> int:
        return stored_param_count(self.layer_sizes)

    @property
    def n_in(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_out(self) -> int:
        return self.layer_sizes[-1]

    def flatten(self) -> np.ndarray:
        return flatten(self)

    def __call__(self, x) -> np.ndarray:
        return forward_eval(self, x)

    def apply(self, theta, x):
        """Forward pass with a generic flat parameter vector (array, tape variable or dual)."""
        if isinstance(theta, Var) and not isinstance(x, Var):
            return _apply_on_tape(self, theta, x)
        ws, bs = split_params(self.layer_sizes, theta)
        return apply_layers(ws, bs, self.activations, x)

    def with_params(self, theta: np.ndarray) -> "FeedForwardNet":
        return unflatten(self.layer_sizes, self.activations, theta)


def apply_layers(weights, biases, activations, x):
    """Network forward pass over generic values (arrays, tape variables or duals)."""
    a = x
    for w, b, act in zip(weights, biases, activations):
        a = ops.ACTIVATIONS[Activation(act).value](a @ w.T + b)
    return a


def _dense_on_tape(a, theta: Var, k: int, n_in: int, n_out: int, act: Activation):
    """One fused tape node for act(a W^T + b) with (W, b) read from theta[k:]."""
    tv = theta.value
    w = tv[k:k + n_in * n_out].reshape(n_out, n_in)
    b = tv[k + n_in * n_out:k + n_in * n_out + n_out]
    av = a.value if isinstance(a, Var) else a
    z = av @ w.T + b
    y = activate(act, z)
    size = tv.shape[0]

    def vjp(g):
        gz = g * activate_prime(act, z, y)
        gt = np.zeros(size)
        gt[k:k + n_in * n_out] = (gz.reshape(-1, n_out).T @ av.reshape(-1, n_in)).ravel()
        gt[k + n_in * n_out:k + n_in * n_out + n_out] = gz.reshape(-1, n_out).sum(axis=0)
        return (gt, gz @ w) if isinstance(a, Var) else (gt,)

    parents = (theta, a) if isinstance(a, Var) else (theta,)
    return theta.tape.op("dense", y, parents, vjp)


def _apply_on_tape(net, theta: Var, x):
    a, k = x, 0
    for n_in, n_out, act in zip(net.layer_sizes[:-1], net.layer_sizes[1:], net.activations):
        a = _dense_on_tape(a, theta, k, n_in, n_out, act)
        k += n_in * n_out + n_out
    return a


def split_params(layer_sizes, theta):
    """Slice a flat (generic) parameter vector into per-layer (W, b) views."""
    ws, bs, k = [], [], 0
    for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        ws.append(theta[k:k + n_in * n_out].reshape(n_out, n_in))
        k += n_in * n_out
        bs.append(theta[k:k + n_out])
        k += n_out
    return ws, bs


def _as_activations(acts, n_maps: int) -> tuple[Activation, ...]:
    if acts is None:
        acts = ["relu"] * (n_maps - 1) + ["identity"]
    elif isinstance(acts, (str, Activation)):
        acts = [acts] * n_maps
    acts = tuple(Activation(a) for a in acts)
    if len(acts) != n_maps:
        raise RejectedInput(f"need {n_maps} activations, got {len(acts)}")
    return acts


def make_net(layer_sizes: Sequence[int], params=None, activations=None) -> FeedForwardNet:
    sizes = tuple(int(n) for n in layer_sizes)
    acts = _as_activations(activations, len(sizes) - 1)
    if params is None:
        params = np.zeros(stored_param_count(sizes))
    return unflatten(sizes, acts, params)


def init_net(layer_sizes: Sequence[int], rng: np.random.Generator, activations=None,
             scale: float | None = None) -> FeedForwardNet:
    """Glorot-normal weights, zero biases."""
    sizes = tuple(int(n) for n in layer_sizes)
    ws, bs = [], []
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        s = np.sqrt(2.0 / (n_in + n_out)) if scale is None else scale
        ws.append(rng.standard_normal((n_out, n_in)) * s)
        bs.append(np.zeros(n_out))
    return FeedForwardNet(sizes, tuple(ws), tuple(bs), _as_activations(activations, len(sizes) - 1))


def param_count(layer_sizes: Sequence[int]) -> int:
    """Parameter count with one bias per source-layer neuron: sum n_l (n_{l+1} + 1)."""
    if len(layer_sizes) < 2:
        raise RejectedInput("need at least two layers")
    return sum(int(a) * (int(b) + 1) for a, b in zip(layer_sizes[:-1], layer_sizes[1:]))


def stored_param_count(layer_sizes: Sequence[int]) -> int:
    """Conventional count, one bias per destination neuron: sum n_{l+1} (n_l + 1)."""
    if len(layer_sizes) < 2:
        raise RejectedInput("need at least two layers")
    return sum(int(b) * (int(a) + 1) for a, b in zip(layer_sizes[:-1], layer_sizes[1:]))


def flatten(net: FeedForwardNet) -> np.ndarray:
    parts = []
    for w, b in zip(net.weights, net.biases):
        parts.append(w.ravel())
        parts.append(b)
    return np.concatenate(parts)


def unflatten(layer_sizes, activations, theta) -> FeedForwardNet:
    sizes = tuple(int(n) for n in layer_sizes)
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (stored_param_count(sizes),):
        raise RejectedInput(f"parameter vector of length {theta.size}, expected {stored_param_count(sizes)}")
    ws, bs, k = [], [], 0
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        ws.append(theta[k:k + n_in * n_out].reshape(n_out, n_in).copy())
        k += n_in * n_out
        bs.append(theta[k:k + n_out].copy())
        k += n_out
    return FeedForwardNet(sizes, tuple(ws), tuple(bs), _as_activations(activations, len(sizes) - 1))


def _check_input(net: FeedForwardNet, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != net.n_in:
        raise RejectedInput(f"input dimension {x.shape[-1]} != {net.n_in}")
    return x


def forward_eval(net: FeedForwardNet, x) -> np.ndarray:
    """a_L for a single input (n_1,) or a batch (..., n_1)."""
    a = _check_input(net, x)
    for w, b, act in zip(net.weights, net.biases, net.activations):
        a = activate(act, a @ w.T + b)
    return a


def _forward_store(net, x):
    zs, acts = [], [x]
    a = x
    for w, b, act in zip(net.weights, net.biases, net.activations):
        z = a @ w.T + b
        a = activate(act, z)
        zs.append(z)
        acts.append(a)
    return zs, acts


# A loss maps the network output to (C, dC/da_L).
Loss = Callable[[np.ndarray], tuple[float, np.ndarray]]


def output_loss(index: int = 0) -> Loss:
    """C = a_L[index]."""
    def loss(a):
        g = np.zeros_like(a)
        g[..., index] = 1.0
        return float(np.sum(a[..., index])), g
    return loss


def linear_loss(c) -> Loss:
    c = np.asarray(c, dtype=np.float64)
    return lambda a: (float(np.sum(a * c)), np.broadcast_to(c, a.shape).copy())


def quadratic_loss(target) -> Loss:
    """C = ||a_L - target||^2 (summed over a batch if given one)."""
    y = np.asarray(target, dtype=np.float64)
    def loss(a):
        r = a - y
        return float(np.sum(r * r)), 2.0 * r
    return loss


def backprop(net: FeedForwardNet, x, upstream: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vector-Jacobian product: gradient of <upstream, a_L> w.r.t. params and input.

    Works on a single input or a batch; batch gradients are summed.
    """
    x = _check_input(net, x)
    zs, acts = _forward_store(net, x)
    delta = upstream * activate_prime(net.activations[-1], zs[-1], acts[-1])
    grads = [None] * len(net.weights)
    for l in range(len(net.weights) - 1, -1, -1):
        a_prev = acts[l]
        d2 = delta.reshape(-1, delta.shape[-1])
        gw = d2.T @ np.broadcast_to(a_prev, delta.shape[:-1] + a_prev.shape[-1:]).reshape(len(d2), -1)
        gb = d2.sum(axis=0)
        grads[l] = (gw, gb)
        back = delta @ net.weights[l]
        if l > 0:
            delta = back * activate_prime(net.activations[l - 1], zs[l - 1], acts[l])
    parts = []
    for gw, gb in grads:
        parts.append(gw.ravel())
        parts.append(gb)
    return np.concatenate(parts), back


def reverse_gradient(net: FeedForwardNet, x, loss: Loss) -> np.ndarray:
    """grad_theta C by the delta recursion, as a flat layer-major vector."""
    a = forward_eval(net, x)
    _, dc = loss(a)
    return backprop(net, x, dc)[0]


def forward_directional(net: FeedForwardNet, x, v, loss: Loss) -> tuple[float, float]:
    """(C, grad_theta C . v) in a single forward sweep carrying tangents."""
    x = _check_input(net, x)
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (net.n_params,):
        raise RejectedInput(f"tangent of length {v.size}, expected {net.n_params}")
    tangents = net.with_params(v)
    a, da = x, np.zeros_like(x)
    for w, b, vw, vb, act in zip(net.weights, net.biases, tangents.weights, tangents.biases, net.activations):
        z = a @ w.T + b
        dz = da @ w.T + a @ vw.T + vb
        a = activate(act, z)
        da = activate_prime(act, z, a) * dz
    c, dc = loss(a)
    return c, float(np.sum(dc * da))


def spectral_norm(w: np.ndarray, tol: float = 1e-8, max_iter: int = 10_000) -> float:
    """Largest singular value by power iteration on W^T W."""
    if not np.any(w):
        return 0.0
    x = np.ones(w.shape[1]) / np.sqrt(w.shape[1])
    # a deterministic but generic start vector avoids orthogonality to the top singular vector
    x = x + 0.01 * np.cos(np.arange(w.shape[1]) * 1.7)
    x /= np.linalg.norm(x)
    prev = 0.0
    for _ in range(max_iter):
        y = w.T @ (w @ x)
        lam = np.linalg.norm(y)
        if lam == 0.0:
            return 0.0
        x = y / lam
        if abs(lam - prev) <= tol * lam:
            return float(np.sqrt(lam))
        prev = lam
    raise NumericError(f"power iteration did not converge in {max_iter} steps")


def lipschitz_bound(net: FeedForwardNet) -> float:
    """prod_l sigma_max(W_l) * Lip(f_l) in the usual (unsquared) convention.

    A squared-distance Lipschitz definition gives the square of this value.
    """
    out = 1.0
    for w, act in zip(net.weights, net.activations):
        out *= spectral_norm(w) * LIPSCHITZ[act]
    return out


def apply_sgd(net: FeedForwardNet, grad, eta: float) -> FeedForwardNet:
    if not eta > 0:
        raise RejectedInput("learning rate must be positive")
    return net.with_params(net.flatten() - eta * np.asarray(grad, dtype=np.float64))


CHECKPOINT_MAGIC = "qbsde-net v1"


def dumps_checkpoint(net: FeedForwardNet) -> str:
    lines = [
        CHECKPOINT_MAGIC,
        "layer_sizes " + " ".join(str(n) for n in net.layer_sizes),
        "activations " + " ".join(a.value for a in net.activations),
        f"n_params {net.n_params}",
    ]
    lines += [v.hex() for v in net.flatten().tolist()]
    return "\n".join(lines) + "\n"


def loads_checkpoint(text: str) -> FeedForwardNet:
    lines = text.strip().split("\n")
    if not lines or lines[0] != CHECKPOINT_MAGIC:
        raise RejectedInput("not a network checkpoint")
    sizes = [int(s) for s in lines[1].split()[1:]]
    acts = lines[2].split()[1:]
    n = int(lines[3].split()[1])
    theta = np.array([float.fromhex(s) for s in lines[4:4 + n]])
    return unflatten(sizes, acts, theta)


def save_checkpoint(net: FeedForwardNet, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_checkpoint(net))


def load_checkpoint(path) -> FeedForwardNet:
    with open(path, encoding="utf-8") as fh:
        return loads_checkpoint(fh.read())
