"""Gradient estimators for the batch loss: reverse mode, forward gradient, central differences."""

from __future__ import annotations

import dataclasses
import warnings

import numpy as np

from ..autodiff.dual import Dual
from ..autodiff.network import FeedForwardNet, activate
from ..autodiff.tape import Tape
from ..rng import Stream
from ..sde import PathBatch
from .model import BsdeModel, loss_generic
from .problems import PdeProblem

ESTIMATORS = ("backprop", "forward_gradient", "numerical")


class NumericWarning(RuntimeWarning):
    pass


@dataclasses.dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.01
    batch: int = 20
    iterations: int = 2000
    estimator: str = "backprop"
    h: float = 1e-3
    v_samples: int = 100
    truncate_v: bool = False
    clip: float | None = None
    seed: int = 0

    def __post_init__(self):
        if not self.lr >= 0:
            raise ValueError("learning rate must be >= 0")
        if self.batch < 1:
            raise ValueError("batch must be >= 1")
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"unknown estimator {self.estimator!r}")
        if self.estimator == "numerical" and not self.h > 0:
            raise ValueError("h must be positive")
        if self.v_samples < 1:
            raise ValueError("v_samples must be >= 1")


def backprop_gradient(model: BsdeModel, problem: PdeProblem, batch: PathBatch) -> tuple[float, np.ndarray]:
    tape = Tape()
    theta = tape.var(model.flatten())
    loss = loss_generic(model, problem, batch, theta)
    return float(loss.value), tape.gradient(loss, [theta])[0]


def directional_derivatives(model: BsdeModel, problem: PdeProblem, batch: PathBatch,
                            directions: np.ndarray) -> tuple[float, np.ndarray]:
    """Loss and grad.v for every row v of `directions` in one forward sweep."""
    theta = Dual(model.flatten(), directions)
    loss = loss_generic(model, problem, batch, theta)
    return float(loss.p), loss.t


# variance of a standard normal truncated to [-3, 3]
TRUNC_VAR = 0.9733369246625415


def draw_directions(n: int, n_params: int, stream: Stream, truncate: bool = False, row0: int = 0) -> np.ndarray:
    """n iid N(0, I) directions; truncated ones are resampled inside [-3, 3]."""
    v = stream.normals(n, n_params, row0=row0)
    if truncate:
        k = 1
        while True:
            bad = np.abs(v) > 3.0
            if not bad.any():
                break
            fresh = stream.split("resample", k).normals(n, n_params, row0=row0)
            v = np.where(bad, fresh, v)
            k += 1
    return v


def forward_gradient(model: BsdeModel, problem: PdeProblem, batch: PathBatch, v_samples: int, stream: Stream,
                     truncate: bool = False, chunk: int = 2000) -> tuple[float, np.ndarray]:
    """Average of (grad.v) v over v_samples directions.

    With truncated directions E[v v^T] = 0.9733 I, so the average is divided
    by that variance to stay unbiased.
    """
    n = model.n_params
    acc = np.zeros(n)
    loss = 0.0
    for start in range(0, v_samples, chunk):
        m = min(chunk, v_samples - start)
        v = draw_directions(m, n, stream, truncate, row0=start)
        loss, jvp = directional_derivatives(model, problem, batch, v)
        acc += jvp @ v
    g = acc / v_samples
    if truncate:
        g /= TRUNC_VAR
    return loss, g


def _perturbed_z(net: FeedForwardNet, x: np.ndarray, h: float) -> np.ndarray:
    """Outputs of `net` on x for theta +- h e_k, all k: shape [2p, M, d_out] (plus first, minus second)."""
    theta = net.flatten()
    p = theta.size
    pert = np.concatenate([np.eye(p) * h, -np.eye(p) * h]) + theta
    a = np.broadcast_to(x, (2 * p,) + x.shape)
    k = 0
    for (n_in, n_out), act in zip(zip(net.layer_sizes[:-1], net.layer_sizes[1:]), net.activations):
        w = pert[:, k:k + n_in * n_out].reshape(2 * p, n_out, n_in)
        k += n_in * n_out
        b = pert[:, k:k + n_out]
        k += n_out
        a = activate(act, np.matmul(a, np.swapaxes(w, 1, 2)) + b[:, None, :])
    return a


def numerical_gradient(model: BsdeModel, problem: PdeProblem, batch: PathBatch, h: float) -> tuple[float, np.ndarray]:
    """Central differences (L(theta + h e_k) - L(theta - h e_k)) / 2h for every trainable.

    The paths do not depend on the parameters, and a perturbation of step
    network n only changes z at step n, so all 2 n_theta perturbed rollouts
    are propagated together: rows share the base z except at their own step.
    """
    grid = model.grid
    x, dw = batch.states, batch.increments
    M, d = x.shape[0], model.d
    n = model.n_params
    theta = model.flatten()
    if h < 1e3 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(theta)))):
        warnings.warn(f"finite-difference step h={h} is near round-off for |theta|", NumericWarning)
    # row layout: [base, +e_0 .. +e_{n-1}, -e_0 .. -e_{n-1}]
    rows = 1 + 2 * n
    sign = np.concatenate([[0.0], np.ones(n), -np.ones(n)])
    which = np.concatenate([[-1], np.arange(n), np.arange(n)])
    u = np.full((rows, M), model.u0)
    u[which == 0] += sign[which == 0][:, None] * h
    offsets = model.offsets()
    for step in range(grid.N):
        xs, dws, t, dt = x[:, step], dw[:, step], grid.times[step], grid.dt[step]
        if step == 0:
            base = np.broadcast_to(model.z0, (M, d))
            sel = (which >= 1) & (which <= d)
            zp = np.broadcast_to(base, (int(sel.sum()), M, d)).copy()
            zp[np.arange(zp.shape[0]), :, which[sel] - 1] += sign[sel][:, None] * h
            rows_sel = np.flatnonzero(sel)
        else:
            net = model.nets[step - 1]
            base = net(xs)
            k, p = offsets[step - 1], net.n_params
            if isinstance(net, FeedForwardNet):
                zp = _perturbed_z(net, xs, h)
            else:
                tn = net.flatten()
                zp = np.stack([net.with_params(tn + s * h * e)(xs) for s in (1.0, -1.0) for e in np.eye(p)])
            rows_sel = np.concatenate([np.arange(1 + k, 1 + k + p), np.arange(1 + n + k, 1 + n + k + p)])
        # rows untouched at this step share the base z
        u_sel = u[rows_sel]
        u = u - problem.f(t, xs, u, base) * dt + np.sum(base * dws, axis=-1)
        u[rows_sel] = u_sel - problem.f(t, xs, u_sel, zp) * dt + np.sum(zp * dws, axis=-1)
    r = problem.g(x[:, -1]) - u
    losses = np.mean(r * r, axis=1)
    diff = losses[1:1 + n] - losses[1 + n:]
    if not np.any(diff) and h > 0:
        warnings.warn("all central differences vanished; h may be too small", NumericWarning)
    return float(losses[0]), diff / (2.0 * h)


def estimate_gradient(model: BsdeModel, problem: PdeProblem, batch: PathBatch, config: TrainConfig,
                      stream: Stream | None = None) -> tuple[float, np.ndarray]:
    """(batch loss, gradient over all trainables) with the configured estimator."""
    if config.estimator == "backprop":
        return backprop_gradient(model, problem, batch)
    if config.estimator == "forward_gradient":
        stream = Stream(config.seed, "fwdgrad") if stream is None else stream
        return forward_gradient(model, problem, batch, config.v_samples, stream, config.truncate_v)
    return numerical_gradient(model, problem, batch, config.h)
