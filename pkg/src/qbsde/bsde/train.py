"""Plain SGD training loop."""

from __future__ import annotations

import csv
import dataclasses
import time

import numpy as np

from ..rng import Stream
from .estimators import TrainConfig, estimate_gradient
from .model import BsdeModel, loss_batch, sample_batch
from .problems import PdeProblem

DIVERGENCE = 1e12


class TrainingDiverged(ArithmeticError):
    pass


@dataclasses.dataclass
class LossHistory:
    loss: list[float] = dataclasses.field(default_factory=list)
    u0: list[float] = dataclasses.field(default_factory=list)
    wall_ms: list[float] = dataclasses.field(default_factory=list)

    def __len__(self):
        return len(self.loss)

    def append(self, loss: float, u0: float, wall_ms: float) -> None:
        self.loss.append(loss)
        self.u0.append(u0)
        self.wall_ms.append(wall_ms)

    def write_csv(self, path, record_time: bool = True) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "loss", "u0", "wall_ms"])
            for i, (l, u, t) in enumerate(zip(self.loss, self.u0, self.wall_ms)):
                w.writerow([i, repr(l), repr(u), f"{t:.3f}" if record_time else "0"])


def clip_gradient(g: np.ndarray, c: float | None) -> np.ndarray:
    """Entrywise clip to [-c, c]; signs are preserved."""
    return g if c is None else np.clip(g, -c, c)


def train(model: BsdeModel, problem: PdeProblem, config: TrainConfig, callback=None) -> tuple[BsdeModel, LossHistory]:
    """Sample a fresh batch, estimate the gradient, take an SGD step; repeat.

    The history records the batch loss and u0 before each update.
    """
    paths = Stream(config.seed, "paths")
    directions = Stream(config.seed, "directions")
    hist = LossHistory()
    theta = model.flatten()
    t_start = time.perf_counter()
    for it in range(config.iterations):
        batch = sample_batch(problem, model.grid, config.batch, paths.split(it))
        loss, grad = estimate_gradient(model, problem, batch, config, directions.split(it))
        if not np.isfinite(loss) or loss > DIVERGENCE:
            raise TrainingDiverged(f"loss {loss!r} at iteration {it} (u0={model.u0!r})")
        hist.append(loss, model.u0, 1e3 * (time.perf_counter() - t_start))
        grad = clip_gradient(grad, config.clip)
        if config.lr > 0:
            theta = theta - config.lr * grad
            model = model.with_params(theta)
        if callback is not None:
            callback(it, model, loss)
    return model, hist


def evaluation_loss(model: BsdeModel, problem: PdeProblem, M: int = 4096, seed: int = 12345) -> float:
    """Batch loss on a fixed large held-out batch."""
    return loss_batch(model, problem, sample_batch(problem, model.grid, M, Stream(seed, "evaluation")))
