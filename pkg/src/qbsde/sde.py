"""Brownian increments, Euler-Maruyama paths, strong-order fits, Gaussian grids."""

from __future__ import annotations

import dataclasses
import struct
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .rng import Stream

Drift = Callable[[float, np.ndarray], np.ndarray]


class NumericOverflow(ArithmeticError):
    pass


@dataclasses.dataclass(frozen=True)
class SdeSpec:
    """dX = mu(t, X) dt + sigma(t, X) dW on [t0, T].

    mu maps (t, x[..., d]) to [..., d]; sigma maps to a matrix broadcastable
    against [..., d, d].
    """

    d: int
    mu: Drift
    sigma: Drift
    x0: np.ndarray
    t0: float = 0.0
    T: float = 1.0

    def __post_init__(self):
        if not self.T > self.t0:
            raise ValueError("need T > t0")
        object.__setattr__(self, "x0", np.broadcast_to(np.asarray(self.x0, dtype=np.float64), (self.d,)).copy())


@dataclasses.dataclass(frozen=True)
class TimeGrid:
    times: np.ndarray

    @classmethod
    def uniform(cls, t0: float, T: float, N: int) -> "TimeGrid":
        return cls(np.linspace(t0, T, int(N) + 1))

    @property
    def N(self) -> int:
        return len(self.times) - 1

    @property
    def dt(self) -> np.ndarray:
        return np.diff(self.times)


@dataclasses.dataclass
class PathBatch:
    increments: np.ndarray  # [batch, N, d]
    states: np.ndarray  # [batch, N + 1, d]

    @property
    def batch(self) -> int:
        return self.increments.shape[0]


@dataclasses.dataclass(frozen=True)
class DiscretizedDistribution:
    points: np.ndarray
    probs: np.ndarray
    n_bits: int
    tail_mass: float = 0.0

    def mean(self) -> float:
        return float(self.probs @ self.points)

    def expect(self, f) -> float:
        return float(self.probs @ np.asarray([f(x) for x in self.points]))


def sample_increments(grid: TimeGrid, d: int, batch: int, stream: Stream, path0: int = 0) -> np.ndarray:
    """[batch, N, d] increments with entries N(0, dt_n); row r is keyed by path index path0 + r."""
    if batch < 1:
        raise ValueError("batch must be >= 1")
    z = stream.normals(batch, grid.N * d, row0=path0).reshape(batch, grid.N, d)
    return z * np.sqrt(grid.dt)[None, :, None]


def _apply_sigma(s: np.ndarray, dw: np.ndarray) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64)
    if s.ndim == 0:
        return s * dw
    return np.einsum("...ij,...j->...i", s, dw)


def euler_maruyama(spec: SdeSpec, grid: TimeGrid, increments: np.ndarray) -> PathBatch:
    batch, n, d = increments.shape
    if n != grid.N or d != spec.d:
        raise ValueError(f"increments {increments.shape} inconsistent with N={grid.N}, d={spec.d}")
    x = np.empty((batch, n + 1, d))
    x[:, 0] = spec.x0
    dt = grid.dt
    for k in range(n):
        t, xk = grid.times[k], x[:, k]
        x[:, k + 1] = xk + spec.mu(t, xk) * dt[k] + _apply_sigma(spec.sigma(t, xk), increments[:, k])
        bad = ~np.isfinite(x[:, k + 1]).all(axis=1)
        if bad.any():
            raise NumericOverflow(f"non-finite state on path {int(np.argmax(bad))} at step {k + 1}")
    return PathBatch(increments, x)


def simulate(spec: SdeSpec, N: int, batch: int, stream: Stream, path0: int = 0) -> PathBatch:
    grid = TimeGrid.uniform(spec.t0, spec.T, N)
    return euler_maruyama(spec, grid, sample_increments(grid, spec.d, batch, stream, path0))


def coarsen(increments: np.ndarray) -> np.ndarray:
    """Pair-sum increments along the step axis (fine grid -> grid with half the steps)."""
    if increments.shape[1] % 2:
        raise ValueError("need an even number of steps")
    return increments[:, 0::2] + increments[:, 1::2]


def empirical_strong_order(spec: SdeSpec, exact: Callable[[np.ndarray, np.ndarray], np.ndarray],
                           grids: Sequence[int], batch: int, stream: Stream) -> float:
    """Fit r in E[sup_n |X_hat - X|] ~ dt^r.

    exact(t, W) returns the true state at times t given the Brownian values W
    (shape [batch, len(t), d]). All grids must divide the finest one; the
    coarse paths reuse the finest Brownian path.
    """
    grids = sorted(int(g) for g in grids)
    if len(grids) < 3:
        raise ValueError("need at least 3 grids")
    fine = grids[-1]
    if any(fine % g for g in grids):
        raise ValueError("grids must divide the finest grid")
    fgrid = TimeGrid.uniform(spec.t0, spec.T, fine)
    dw_fine = sample_increments(fgrid, spec.d, batch, stream)
    errs, dts = [], []
    for g in grids:
        m = fine // g
        dw = dw_fine.reshape(batch, g, m, spec.d).sum(axis=2)
        grid = TimeGrid.uniform(spec.t0, spec.T, g)
        paths = euler_maruyama(spec, grid, dw)
        w = np.concatenate([np.zeros((batch, 1, spec.d)), np.cumsum(dw, axis=1)], axis=1)
        x_true = exact(grid.times, w)
        err = np.linalg.norm(paths.states - x_true, axis=2).max(axis=1).mean()
        errs.append(err)
        dts.append((spec.T - spec.t0) / g)
    slope, _ = np.polyfit(np.log(dts), np.log(errs), 1)
    return float(slope)


TRUNCATION = 3.0


def discretize_gaussian(n_bits: int, variance: float) -> DiscretizedDistribution:
    """2^n_bits equispaced points spanning [-3s, 3s], weights from the density at each point.

    The weights are a left-rule Riemann sum of the N(0, s^2) density on the
    grid cells, renormalized; the mass outside +-3s (about 0.0027) is dropped
    and recorded as tail_mass.
    """
    if n_bits < 1:
        raise ValueError("n_bits must be >= 1")
    s = np.sqrt(variance)
    n = 1 << n_bits
    if s == 0.0:
        points = np.zeros(n)
        probs = np.zeros(n)
        probs[n // 2] = 1.0
        return DiscretizedDistribution(points, probs, n_bits, 0.0)
    points = np.linspace(-TRUNCATION * s, TRUNCATION * s, n)
    w = np.exp(-0.5 * (points / s) ** 2)
    w = 0.5 * (w + w[::-1])  # exact mirror symmetry in floating point
    probs = w / w.sum()
    tail = 2.0 * stats.norm.sf(TRUNCATION)
    return DiscretizedDistribution(points, probs, n_bits, float(tail))


_DUMP_MAGIC = b"QBSDEPTH"


def dump_paths(path, batch: PathBatch, seed: int) -> None:
    """Binary dump: magic, header (batch, N, d, seed) as little-endian u64, then float64 arrays."""
    b, n, d = batch.increments.shape
    with open(path, "wb") as fh:
        fh.write(_DUMP_MAGIC + struct.pack("<4Q", b, n, d, int(seed) & 0xFFFFFFFFFFFFFFFF))
        fh.write(np.ascontiguousarray(batch.increments, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(batch.states, dtype="<f8").tobytes())


def load_paths(path) -> tuple[PathBatch, int]:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:8] != _DUMP_MAGIC:
        raise ValueError("not a path dump")
    b, n, d, seed = struct.unpack("<4Q", raw[8:40])
    k = b * n * d
    inc = np.frombuffer(raw, dtype="<f8", count=k, offset=40).reshape(b, n, d).copy()
    st = np.frombuffer(raw, dtype="<f8", count=b * (n + 1) * d, offset=40 + 8 * k).reshape(b, n + 1, d).copy()
    return PathBatch(inc, st), seed


def gbm_spec(d: int = 1, a: float = 0.05, b: float = 0.2, x0: float = 1.0, T: float = 1.0) -> SdeSpec:
    """dX = a X dt + b X dW, componentwise with independent drivers."""
    return SdeSpec(d, lambda t, x: a * x, lambda t, x: b * x[..., :, None] * np.eye(d), np.full(d, x0), 0.0, T)


def gbm_exact(a: float, b: float, x0: float):
    def exact(t, w):
        return x0 * np.exp((a - 0.5 * b * b) * t[None, :, None] + b * w)
    return exact
