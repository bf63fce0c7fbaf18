"""Dense statevector with named registers. Qubit 0 is the most significant bit of a basis label."""

from __future__ import annotations

import numpy as np

from .. import kernels

MAX_QUBITS = 22
MAX_EVOLVE_QUBITS = 12
UNITARY_TOL = 1e-10


class CapacityError(RuntimeError):
    pass


class RejectedGate(ValueError):
    pass


class StateVector:
    def __init__(self, n_qubits: int, amplitudes: np.ndarray | None = None):
        if n_qubits < 1 or n_qubits > MAX_QUBITS:
            raise CapacityError(f"{n_qubits} qubits outside 1..{MAX_QUBITS}")
        self.n_qubits = n_qubits
        if amplitudes is None:
            self.amplitudes = np.zeros(1 << n_qubits, dtype=np.complex128)
            self.amplitudes[0] = 1.0
        else:
            a = np.asarray(amplitudes, dtype=np.complex128).copy()
            if a.shape != (1 << n_qubits,):
                raise ValueError("amplitude vector has wrong length")
            self.amplitudes = a
        self.registers: dict[str, range] = {}

    # registers
    def add_register(self, name: str, start: int, width: int) -> range:
        r = range(start, start + width)
        if r.stop > self.n_qubits or start < 0:
            raise ValueError(f"register {name} out of range")
        for other, q in self.registers.items():
            if set(q) & set(r):
                raise ValueError(f"register {name} overlaps {other}")
        self.registers[name] = r
        return r

    def qubits(self, reg) -> list[int]:
        return list(self.registers[reg]) if isinstance(reg, str) else list(reg)

    def copy(self) -> "StateVector":
        s = StateVector(self.n_qubits, self.amplitudes)
        s.registers = dict(self.registers)
        return s

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape((2,) * self.n_qubits)

    def marginal(self, qubits) -> np.ndarray:
        """Outcome distribution of the listed qubits, first listed = most significant."""
        qs = self.qubits(qubits)
        p = self.probabilities().reshape((2,) * self.n_qubits)
        rest = tuple(i for i in range(self.n_qubits) if i not in qs)
        m = p.sum(axis=rest) if rest else p
        order = sorted(qs)
        m = np.transpose(m, [order.index(q) for q in qs])
        return m.reshape(-1)

    def expectation_z(self, qubit: int) -> float:
        p = self.marginal([qubit])
        return float(p[0] - p[1])

    def apply_gate(self, gate: np.ndarray, targets) -> "StateVector":
        apply_gate(self, gate, targets)
        return self


def check_unitary(gate: np.ndarray) -> np.ndarray:
    g = np.asarray(gate, dtype=np.complex128)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise RejectedGate("gate must be square")
    if np.max(np.abs(g.conj().T @ g - np.eye(g.shape[0]))) > UNITARY_TOL:
        raise RejectedGate("gate is not unitary")
    return g


def apply_gate(state: StateVector, gate: np.ndarray, targets) -> None:
    """Apply a k-qubit unitary to the listed targets in place (first target = most significant)."""
    targets = state.qubits(targets) if isinstance(targets, str) else [int(t) for t in np.atleast_1d(targets)]
    g = check_unitary(gate)
    k = len(targets)
    if g.shape[0] != 1 << k:
        raise RejectedGate(f"gate of size {g.shape[0]} does not match {k} targets")
    if len(set(targets)) != k or min(targets) < 0 or max(targets) >= state.n_qubits:
        raise ValueError("invalid targets")
    if k == 1:
        kernels.apply_1q(state.amplitudes, np.ascontiguousarray(g), targets[0], state.n_qubits)
        return
    psi = state.tensor()
    out = np.tensordot(g.reshape((2,) * (2 * k)), psi, axes=(list(range(k, 2 * k)), targets))
    rest = [i for i in range(state.n_qubits) if i not in targets]
    perm = np.argsort(targets + rest)
    state.amplitudes = np.ascontiguousarray(np.transpose(out, perm)).reshape(-1)


def controlled(gate: np.ndarray, n_controls: int = 1) -> np.ndarray:
    """Block-diagonal controlled gate; controls come first and must all be 1."""
    g = np.asarray(gate, dtype=np.complex128)
    n = g.shape[0]
    out = np.eye(n << n_controls, dtype=np.complex128)
    out[-n:, -n:] = g
    return out


def evolve_hamiltonian(state: StateVector, H: np.ndarray, t: float) -> StateVector:
    """psi <- exp(-i H t) psi by dense eigendecomposition."""
    if state.n_qubits > MAX_EVOLVE_QUBITS:
        raise CapacityError(f"dense evolution limited to {MAX_EVOLVE_QUBITS} qubits")
    H = np.asarray(H, dtype=np.complex128)
    if H.shape != (1 << state.n_qubits,) * 2:
        raise ValueError("Hamiltonian dimension mismatch")
    if np.max(np.abs(H - H.conj().T)) > 1e-12:
        raise RejectedGate("Hamiltonian is not Hermitian")
    w, V = np.linalg.eigh(H)
    state.amplitudes = V @ (np.exp(-1j * w * t) * (V.conj().T @ state.amplitudes))
    return state


def entanglement_entropy(state: StateVector, cut: int) -> float:
    """Von Neumann entropy (nats) of qubits [0, cut) against the rest."""
    m = state.amplitudes.reshape(1 << cut, -1)
    s = np.linalg.svd(m, compute_uv=False) ** 2
    s = s[s > 1e-15]
    return float(-np.sum(s * np.log(s)))


# single-qubit gates
I2 = np.eye(2, dtype=np.complex128)
X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
H = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2)
CNOT = controlled(X)


def rx(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)


def ry(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


def kron_all(mats) -> np.ndarray:
    out = np.ones((1, 1), dtype=np.complex128)
    for m in mats:
        out = np.kron(out, m)
    return out


def embed(op: np.ndarray, qubit: int, n: int) -> np.ndarray:
    mats = [I2] * n
    mats[qubit] = op
    return kron_all(mats)
