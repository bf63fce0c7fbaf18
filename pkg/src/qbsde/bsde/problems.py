"""Semilinear parabolic problems u_t + 1/2 Tr(s s^T Hess u) + mu.grad u + f(t, x, u, s^T grad u) = 0."""

from __future__ import annotations

import dataclasses
from typing import Callable

import numpy as np

from ..autodiff import ops
from ..sde import SdeSpec


@dataclasses.dataclass(frozen=True)
class PdeProblem:
    """f and g are written with `ops` so they accept arrays, tape variables and duals.

    f(t, x, u, z): x is [..., d] (plain array), u is [...], z is [..., d]; returns [...].
    g(x): x is [..., d] (plain array); returns [...].
    """

    d: int
    mu: Callable
    sigma: Callable
    f: Callable
    g: Callable
    t0: float = 0.0
    T: float = 1.0
    x0: np.ndarray | None = None
    name: str = "pde"

    def __post_init__(self):
        x0 = np.zeros(self.d) if self.x0 is None else np.broadcast_to(np.asarray(self.x0, float), (self.d,)).copy()
        object.__setattr__(self, "x0", x0)

    def sde(self) -> SdeSpec:
        return SdeSpec(self.d, self.mu, self.sigma, self.x0, self.t0, self.T)


def make_hjb(d: int, T: float = 1.0, x0=None) -> PdeProblem:
    """mu = 0, sigma = 2 I, f = |grad u|^2, g(x) = log((1 + |x|^2) / 2).

    The nonlinearity receives z = sigma^T grad u = 2 grad u, so |grad u|^2 = |z|^2 / 4.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    eye2 = 2.0 * np.eye(d)

    def f(t, x, u, z):
        return ops.sum(z * z, axis=-1) * 0.25

    def g(x):
        return np.log(0.5 * (1.0 + np.sum(x * x, axis=-1)))

    return PdeProblem(d, lambda t, x: np.zeros_like(x), lambda t, x: eye2, f, g, 0.0, T, x0, "hjb")


def make_allen_cahn(d: int, T: float = 0.3, x0=None) -> PdeProblem:
    """u_t + Laplace u + u - u^3 = 0 with g(x) = 1 / (2 + 0.4 |x|^2)."""
    s = np.sqrt(2.0) * np.eye(d)

    def f(t, x, u, z):
        return u - u ** 3

    def g(x):
        return 1.0 / (2.0 + 0.4 * np.sum(x * x, axis=-1))

    return PdeProblem(d, lambda t, x: np.zeros_like(x), lambda t, x: s, f, g, 0.0, T, x0, "allen_cahn")


def make_black_scholes_default(d: int, T: float = 1.0, x0=None, mu_bar: float = 0.02, sig: float = 0.2,
                               delta: float = 2.0 / 3.0, R: float = 0.02, vh: float = 50.0, vl: float = 70.0,
                               gh: float = 0.2, gl: float = 0.02) -> PdeProblem:
    """Pricing with default risk: f = -(1 - delta) Q(u) u - R u with a piecewise linear hazard Q."""
    x0 = np.full(d, 100.0) if x0 is None else x0
    slope = (gh - gl) / (vh - vl)

    def f(t, x, u, z):
        lin = ops.minimum(ops.maximum(u, vh), vl)
        q = (lin - vh) * slope + gh
        return -(1.0 - delta) * q * u - R * u

    def g(x):
        return np.min(x, axis=-1)

    return PdeProblem(d, lambda t, x: mu_bar * x, lambda t, x: sig * x[..., :, None] * np.eye(d), f, g,
                      0.0, T, x0, "black_scholes_default")
