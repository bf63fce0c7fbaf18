"""Hybrid classical/quantum step networks and PQC-only networks.

A HybridNet runs pre layers, feeds the last n_qubits pre outputs into a
hardware-efficient ansatz as R_X embedding angles, passes the other pre
outputs straight through, and maps [passthrough, <Z_1>, ..., <Z_n>] through
the post layers. Parameters are laid out as [pre, circuit angles, post].
"""

from __future__ import annotations

import dataclasses
import itertools

import numpy as np

from .autodiff import ops
from .autodiff.dual import Dual
from .autodiff.network import FeedForwardNet, init_net, stored_param_count
from .autodiff.tape import Tape, Var
from .qsim.hea import hea_expectations_batch, shift_jacobian
from .qsim.state import MAX_EVOLVE_QUBITS, CapacityError

QUBITS = 8
REPS = 2


def pqc_apply(angles, theta, n: int, r: int, t: float):
    """<Z_i> of the ansatz for each row of angles; accepts arrays, tape variables or duals."""
    av = angles.value if isinstance(angles, Var) else angles.p if isinstance(angles, Dual) else angles
    tv = theta.value if isinstance(theta, Var) else theta.p if isinstance(theta, Dual) else theta
    av = np.asarray(av, dtype=np.float64)
    single = av.ndim == 1
    a2 = np.atleast_2d(av)
    if not isinstance(angles, (Var, Dual)) and not isinstance(theta, (Var, Dual)):
        e = hea_expectations_batch(n, r, a2, tv, t)
        return e[0] if single else e
    e, jz, jt = shift_jacobian(n, r, a2, tv, t)
    if single:
        e, jz, jt = e[0], jz[0], jt[0]
    if isinstance(angles, Dual) or isinstance(theta, Dual):
        tan = 0.0
        if isinstance(angles, Dual):
            tan = tan + np.einsum("...ij,v...j->v...i", jz, angles.t)
        if isinstance(theta, Dual):
            tan = tan + np.einsum("...ij,vj->v...i", jt, theta.t)
        return Dual(e, tan)
    parents = [p for p in (angles, theta) if isinstance(p, Var)]
    tape = parents[0].tape

    def vjp(g):
        out = []
        if isinstance(angles, Var):
            out.append(np.einsum("...i,...ij->...j", g, jz))
        if isinstance(theta, Var):
            out.append(np.einsum("bi,bij->j", g.reshape(-1, n), jt.reshape(-1, n, jt.shape[-1])))
        return tuple(out)

    return tape.op("pqc", e, tuple(parents), vjp)


@dataclasses.dataclass(frozen=True)
class HybridNet:
    n_qubits: int
    reps: int
    angles: np.ndarray
    pre: FeedForwardNet | None = None
    post: FeedForwardNet | None = None
    t: float = 1.0
    bypass: bool = False

    def __post_init__(self):
        if self.n_qubits > MAX_EVOLVE_QUBITS:
            raise CapacityError(f"PQC limited to {MAX_EVOLVE_QUBITS} qubits")
        a = np.asarray(self.angles, dtype=np.float64).reshape(-1)
        if a.size != self.n_qubits * self.reps:
            raise ValueError("need n_qubits * reps circuit angles")
        object.__setattr__(self, "angles", a)
        width = self.pre.layer_sizes[-1] if self.pre is not None else self.n_qubits
        if width < self.n_qubits:
            raise ValueError("pre layers must output at least n_qubits values")
        if self.post is not None and self.post.layer_sizes[0] != width:
            raise ValueError("post input width must equal the pre output width")

    @property
    def passthrough(self) -> int:
        return (self.pre.layer_sizes[-1] if self.pre is not None else self.n_qubits) - self.n_qubits

    @property
    def n_angles(self) -> int:
        return self.n_qubits * self.reps

    @property
    def n_classical(self) -> int:
        return (self.pre.n_params if self.pre else 0) + (self.post.n_params if self.post else 0)

    @property
    def n_params(self) -> int:
        return self.n_classical + self.n_angles

    def flatten(self) -> np.ndarray:
        parts = [self.pre.flatten()] if self.pre else []
        parts.append(self.angles)
        if self.post:
            parts.append(self.post.flatten())
        return np.concatenate(parts)

    def _split(self, theta):
        k = self.pre.n_params if self.pre else 0
        return theta[:k], theta[k:k + self.n_angles], theta[k + self.n_angles:]

    def with_params(self, theta) -> "HybridNet":
        theta = np.asarray(theta, dtype=np.float64)
        a, q, b = self._split(theta)
        return dataclasses.replace(self, angles=q.copy(),
                                   pre=self.pre.with_params(a) if self.pre else None,
                                   post=self.post.with_params(b) if self.post else None)

    def classical_equivalent(self) -> FeedForwardNet:
        """pre and post joined into one plain network (what the net computes under bypass)."""
        sizes = self.pre.layer_sizes + self.post.layer_sizes[1:]
        return FeedForwardNet(sizes, self.pre.weights + self.post.weights, self.pre.biases + self.post.biases,
                              self.pre.activations + self.post.activations)

    def __call__(self, x):
        return self.apply(self.flatten(), x)

    def apply(self, theta, x):
        a_par, q_par, b_par = self._split(theta)
        if self.bypass:
            if self.pre is None or self.post is None:
                return x
            net = self.classical_equivalent()
            return net.apply(ops.concat([a_par, b_par], axis=-1) if isinstance(theta, (Var, Dual))
                             else np.concatenate([a_par, b_par]), x)
        h = self.pre.apply(a_par, x) if self.pre else x
        c = self.passthrough
        e = pqc_apply(h[..., c:], q_par, self.n_qubits, self.reps, self.t)
        h = ops.concat([h[..., :c], e], axis=-1) if c > 0 else e
        return self.post.apply(b_par, h) if self.post else h


def hybrid_gradient(net: HybridNet, x: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    """Gradient of sum(upstream * net(x)) over all parameters (classical and circuit)."""
    tape = Tape()
    th = tape.var(net.flatten())
    out = net.apply(th, np.asarray(x, dtype=np.float64))
    y = ops.sum(out * np.asarray(upstream, dtype=np.float64))
    return tape.gradient(y, [th])[0]


def make_hybrid(d: int, a: int, c: int, rng: np.random.Generator, n_qubits: int = QUBITS, reps: int = REPS,
                t: float = 1.0, bypass: bool = False, angle_scale: float = 0.1) -> HybridNet:
    """pre [d, a, c + n_qubits] (relu), circuit, post [c + n_qubits, d] (identity)."""
    pre = init_net([d, a, c + n_qubits], rng, ["relu", "relu"])
    post = init_net([c + n_qubits, d], rng, ["identity"])
    angles = rng.uniform(-angle_scale, angle_scale, n_qubits * reps)
    return HybridNet(n_qubits, reps, angles, pre, post, t, bypass)


def pqc_only_model(d: int, rng: np.random.Generator | None = None, t: float = 1.0, angle_scale: float = 0.1) -> HybridNet:
    """d qubits, d + 1 repetitions: d (d + 1) angles and nothing classical."""
    if d > 6:
        raise CapacityError("PQC-only models are limited to d <= 6")
    rng = np.random.default_rng(0) if rng is None else rng
    return HybridNet(d, d + 1, rng.uniform(-angle_scale, angle_scale, d * (d + 1)), None, None, t)


def hybrid_param_total(d: int, a: int, c: int, n_qubits: int = QUBITS, reps: int = REPS) -> int:
    return stored_param_count([d, a, c + n_qubits]) + n_qubits * reps + stored_param_count([c + n_qubits, d])


def match_widths(d: int, total: int, n_qubits: int = QUBITS, reps: int = REPS, max_width: int = 200) -> tuple[int, int]:
    """(a, c) with the given total; fewest passthrough nodes c first, then smallest a."""
    for c, a in itertools.product(range(max_width), range(1, max_width)):
        if hybrid_param_total(d, a, c, n_qubits, reps) == total:
            return a, c
    raise ValueError(f"no hybrid widths reach {total} parameters at d={d}")


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    name: str
    d: int
    kind: str  # "classical", "hybrid" or "pqc"
    layer_sizes: tuple = ()
    hybrid_widths: tuple = ()
    n_params: int = 0
    lr: float = 0.05
    batch: int = 20


CLASSICAL_HIDDEN = {5: 10, 10: 15, 20: 20}


def experiment_configs() -> list[ExperimentConfig]:
    """Hybrid-vs-classical at d = 5, 10, 20 and PQC-vs-classical at d = 4, 5, 6, with matched totals."""
    out = []
    for d, h in CLASSICAL_HIDDEN.items():
        sizes = (d, h, h, d)
        total = stored_param_count(sizes)
        a, c = match_widths(d, total)
        out.append(ExperimentConfig(f"classical-d{d}", d, "classical", sizes, (), total))
        out.append(ExperimentConfig(f"hybrid-d{d}", d, "hybrid", (), (a, c), hybrid_param_total(d, a, c)))
    for d in (4, 5, 6):
        n = d * (d + 1)
        sizes = (d, d)
        out.append(ExperimentConfig(f"pqc-d{d}", d, "pqc", (), (), n))
        out.append(ExperimentConfig(f"classical-sep-d{d}", d, "classical", sizes, (), stored_param_count(sizes)))
    return out
