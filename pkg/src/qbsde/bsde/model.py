"""The stacked per-step architecture: u0, z0 and one network per interior time step."""

from __future__ import annotations

import dataclasses
from typing import Sequence

import numpy as np

from ..autodiff import ops
from ..autodiff.network import FeedForwardNet, NumericError, init_net
from ..sde import PathBatch, TimeGrid, euler_maruyama, sample_increments
from .problems import PdeProblem


@dataclasses.dataclass(frozen=True)
class BsdeModel:
    """Trainables are laid out as [u0, z0 (d), net_1, ..., net_{N-1}].

    A step network is anything with n_params, flatten(), with_params(theta),
    __call__(x) and apply(theta, x); FeedForwardNet and HybridNet both qualify.
    """

    u0: float
    z0: np.ndarray
    nets: tuple
    grid: TimeGrid

    def __post_init__(self):
        if len(self.nets) != self.grid.N - 1:
            raise ValueError(f"need {self.grid.N - 1} step networks, got {len(self.nets)}")
        object.__setattr__(self, "z0", np.asarray(self.z0, dtype=np.float64))

    @property
    def d(self) -> int:
        return self.z0.shape[0]

    @property
    def net_sizes(self) -> list[int]:
        return [net.n_params for net in self.nets]

    @property
    def n_params(self) -> int:
        return 1 + self.d + sum(self.net_sizes)

    def offsets(self) -> list[int]:
        """Start index of each step network inside the flat vector."""
        out, k = [], 1 + self.d
        for n in self.net_sizes:
            out.append(k)
            k += n
        return out

    def flatten(self) -> np.ndarray:
        return np.concatenate([[self.u0], self.z0] + [net.flatten() for net in self.nets])

    def with_params(self, theta) -> "BsdeModel":
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.n_params,):
            raise ValueError(f"parameter vector of length {theta.size}, expected {self.n_params}")
        nets = tuple(net.with_params(theta[k:k + net.n_params]) for net, k in zip(self.nets, self.offsets()))
        return BsdeModel(float(theta[0]), theta[1:1 + self.d].copy(), nets, self.grid)


def default_widths(d: int) -> list[int]:
    """Two hidden layers of width d + 10."""
    return [d, d + 10, d + 10, d]


def make_model(problem: PdeProblem, N: int, rng: np.random.Generator, layer_sizes: Sequence[int] | None = None,
               activations=None, u0: float = 0.0, nets=None) -> BsdeModel:
    grid = TimeGrid.uniform(problem.t0, problem.T, N)
    if nets is None:
        sizes = default_widths(problem.d) if layer_sizes is None else list(layer_sizes)
        if sizes[0] != problem.d or sizes[-1] != problem.d:
            raise ValueError("step networks must map R^d to R^d")
        nets = tuple(init_net(sizes, rng, activations) for _ in range(N - 1))
    z0 = rng.uniform(-0.1, 0.1, problem.d)
    return BsdeModel(float(u0), z0, tuple(nets), grid)


def sample_batch(problem: PdeProblem, grid: TimeGrid, M: int, stream, path0: int = 0) -> PathBatch:
    dw = sample_increments(grid, problem.d, M, stream, path0)
    return euler_maruyama(problem.sde(), grid, dw)


def rollout(model: BsdeModel, problem: PdeProblem, batch: PathBatch) -> tuple[np.ndarray, np.ndarray]:
    """(u_hat at t_N, X_hat at t_N) per path."""
    grid = model.grid
    if batch.increments.shape[1] != grid.N:
        raise ValueError("batch grid does not match the model grid")
    x, dw = batch.states, batch.increments
    u = np.full(batch.batch, model.u0)
    for n in range(grid.N):
        z = np.broadcast_to(model.z0, x[:, 0].shape) if n == 0 else model.nets[n - 1](x[:, n])
        u = u - problem.f(grid.times[n], x[:, n], u, z) * grid.dt[n] + np.sum(z * dw[:, n], axis=-1)
        if not np.isfinite(u).all():
            raise NumericError(f"non-finite u at step {n + 1}")
    return u, x[:, -1]


def loss_batch(model: BsdeModel, problem: PdeProblem, batch: PathBatch) -> float:
    u, x_n = rollout(model, problem, batch)
    r = problem.g(x_n) - u
    return float(np.mean(r * r))


def payoffs(model: BsdeModel, problem: PdeProblem, batch: PathBatch) -> np.ndarray:
    """Per-path squared terminal mismatch."""
    u, x_n = rollout(model, problem, batch)
    return (problem.g(x_n) - u) ** 2


def loss_generic(model: BsdeModel, problem: PdeProblem, batch: PathBatch, theta):
    """The batch loss as a function of a generic flat parameter vector."""
    grid = model.grid
    x, dw = batch.states, batch.increments
    d = model.d
    offsets = model.offsets()
    u = theta[0]
    for n in range(grid.N):
        if n == 0:
            z = theta[1:1 + d]
        else:
            k = offsets[n - 1]
            net = model.nets[n - 1]
            z = net.apply(theta[k:k + net.n_params], x[:, n])
        u = u - problem.f(grid.times[n], x[:, n], u, z) * grid.dt[n] + ops.sum(z * dw[:, n], axis=-1)
    r = problem.g(x[:, -1]) - u
    return ops.mean(r * r)


MODEL_MAGIC = "qbsde-model v1"


def dumps_model(model: BsdeModel) -> str:
    """Header (N, t0, T, d), u0 and z0 in hex, then one network checkpoint per step separated by '%%'."""
    from ..autodiff.network import dumps_checkpoint

    g = model.grid
    head = [MODEL_MAGIC, f"grid {g.N} {float(g.times[0]).hex()} {float(g.times[-1]).hex()}", f"d {model.d}",
            "u0 " + float(model.u0).hex(), "z0 " + " ".join(v.hex() for v in model.z0.tolist())]
    return "\n".join(head) + "\n%%\n" + "%%\n".join(dumps_checkpoint(net) for net in model.nets)


def loads_model(text: str) -> BsdeModel:
    from ..autodiff.network import RejectedInput, loads_checkpoint

    blocks = text.split("%%\n")
    head = blocks[0].strip().split("\n")
    if not head or head[0] != MODEL_MAGIC:
        raise RejectedInput("not a model checkpoint")
    _, n, t0, T = head[1].split()
    grid = TimeGrid.uniform(float.fromhex(t0), float.fromhex(T), int(n))
    u0 = float.fromhex(head[3].split()[1])
    z0 = np.array([float.fromhex(s) for s in head[4].split()[1:]])
    nets = tuple(loads_checkpoint(b) for b in blocks[1:])
    return BsdeModel(u0, z0, nets, grid)
