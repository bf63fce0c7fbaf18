"""Hardware-efficient ansatz: entangled initial state, R_X embedding, R_X layers and a circular CNOT ladder.

Circuits are simulated in batches: amplitudes have shape (B, 2, ..., 2) so
every sample in a batch can carry its own embedding angles.
"""

from __future__ import annotations

import dataclasses
import functools

import numpy as np

from .. import kernels
from .state import MAX_EVOLVE_QUBITS, CapacityError, I2, X, Y, Z, StateVector, evolve_hamiltonian, kron_all

SHIFT = np.pi / 2  # s = pi / (4 r) with r = 1/2 for R_X


@dataclasses.dataclass(frozen=True)
class HeaSpec:
    n: int
    r: int
    z: np.ndarray
    theta: np.ndarray
    t: float = 1.0

    def __post_init__(self):
        if self.n < 1 or self.n > MAX_EVOLVE_QUBITS:
            raise CapacityError(f"HEA limited to {MAX_EVOLVE_QUBITS} qubits")
        z = np.asarray(self.z, dtype=np.float64).reshape(self.n)
        th = np.asarray(self.theta, dtype=np.float64).reshape(-1)
        if th.size != self.r * self.n:
            raise ValueError(f"need r*n = {self.r * self.n} angles, got {th.size}")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "theta", th)


def _pauli_on(ops: dict, n: int) -> np.ndarray:
    """Tensor product with the given single-qubit operators, repeated qubits multiplied in order."""
    mats = [I2] * n
    for q, m in ops:
        mats[q] = m @ mats[q]
    return kron_all(mats)


def hea_hamiltonian(n: int) -> np.ndarray:
    """sum_i X_i X_{i+1} + Y_i Y_{i+1} + 2 Z_i Z_{i+1} + X_i with index n+1 wrapping to 1."""
    if n > MAX_EVOLVE_QUBITS:
        raise CapacityError(f"dense Hamiltonian limited to {MAX_EVOLVE_QUBITS} qubits")
    H = np.zeros((1 << n, 1 << n), dtype=np.complex128)
    for i in range(n):
        j = (i + 1) % n
        H += _pauli_on([(i, X), (j, X)], n)
        H += _pauli_on([(i, Y), (j, Y)], n)
        H += 2.0 * _pauli_on([(i, Z), (j, Z)], n)
        H += _pauli_on([(i, X)], n)
    return H


@functools.lru_cache(maxsize=64)
def _initial_state(n: int, t: float) -> np.ndarray:
    s = StateVector(n)
    if t != 0.0:
        evolve_hamiltonian(s, hea_hamiltonian(n), t)
    out = s.amplitudes.copy()
    out.flags.writeable = False
    return out


def initial_state(n: int, t: float = 1.0) -> np.ndarray:
    """|psi_t> = exp(-i H t)|0...0>."""
    return _initial_state(int(n), float(t))


def cnot_pairs(n: int) -> list[tuple[int, int]]:
    """Ladder 0->1, 1->2, ..., plus the wrap (n-1)->0 when it is a new pair (n > 2)."""
    pairs = [(i, i + 1) for i in range(n - 1)]
    if n > 2:
        pairs.append((n - 1, 0))
    return pairs


def run_batch(n: int, r: int, z: np.ndarray, theta: np.ndarray, t: float = 1.0) -> np.ndarray:
    """Final amplitudes, shape (B, 2^n), for embedding angles z (B, n) and per-row angles theta (B, r*n)."""
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    B = z.shape[0]
    theta = np.broadcast_to(np.asarray(theta, dtype=np.float64), (B, r * n))
    psi = np.tile(initial_state(n, t), (B, 1))
    for q in range(n):
        kernels.rx_batch(psi, np.ascontiguousarray(z[:, q]), q, n)
    pairs = cnot_pairs(n)
    for k in range(r):
        for q in range(n):
            kernels.rx_batch(psi, np.ascontiguousarray(theta[:, k * n + q]), q, n)
        for c, tq in pairs:
            kernels.cnot_batch(psi, c, tq, n)
    return psi


def z_signs(n: int) -> np.ndarray:
    """(2^n, n) table of Z_i eigenvalues per basis label."""
    labels = np.arange(1 << n)
    bits = (labels[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1
    return 1.0 - 2.0 * bits


def hea_expectations_batch(n: int, r: int, z, theta, t: float = 1.0) -> np.ndarray:
    """Exact <Z_i> for each batch row, shape (B, n)."""
    psi = run_batch(n, r, z, theta, t)
    return (np.abs(psi) ** 2) @ z_signs(n)


def hea_expectations(spec: HeaSpec, shots: int | None = None, rng: np.random.Generator | None = None) -> np.ndarray:
    """<Z_i> for one circuit; exact unless a shot count is given."""
    psi = run_batch(spec.n, spec.r, spec.z[None, :], spec.theta[None, :], spec.t)[0]
    p = np.abs(psi) ** 2
    if shots is None:
        return p @ z_signs(spec.n)
    rng = np.random.default_rng() if rng is None else rng
    counts = rng.multinomial(shots, p / p.sum())
    return counts @ z_signs(spec.n) / shots


def shift_jacobian(n: int, r: int, z, theta, t: float = 1.0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(expectations (B, n), d/dz (B, n, n), d/dtheta (B, n, r*n)) by the parameter-shift rule.

    Every angle enters exactly one R_X gate, so the derivative of <Z_i> is
    (f(angle + pi/2) - f(angle - pi/2)) / 2. R_X(z_q) is followed directly by
    R_X(theta_q) of the first repetition, so both shifts give the same circuit
    and are evaluated once. All shifted circuits run in one batch.
    """
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    B = z.shape[0]
    P = r * n
    theta = np.broadcast_to(np.asarray(theta, dtype=np.float64), (B, P))
    eye = np.eye(P) * SHIFT
    th = np.concatenate([theta[:, None, :], theta[:, None, :] + eye, theta[:, None, :] - eye], axis=1)
    zz = np.broadcast_to(z[:, None, :], (B, 1 + 2 * P, n))
    e = hea_expectations_batch(n, r, zz.reshape(-1, n), th.reshape(-1, P), t).reshape(B, 1 + 2 * P, n)
    jt = np.transpose(0.5 * (e[:, 1:1 + P] - e[:, 1 + P:]), (0, 2, 1))  # (B, n, P)
    return e[:, 0], jt[:, :, :n].copy(), jt


def param_shift_grad(spec: HeaSpec, observable: int, j: int) -> float:
    """d<Z_observable>/d theta_j via r_ev (f(theta_j + s) - f(theta_j - s)) with r_ev = 1/2, s = pi/2."""
    th = spec.theta.copy()
    th[j] += SHIFT
    plus = hea_expectations(dataclasses.replace(spec, theta=th))[observable]
    th[j] -= 2 * SHIFT
    minus = hea_expectations(dataclasses.replace(spec, theta=th))[observable]
    return 0.5 * (plus - minus)
