"""Function oracles, controlled rotations and distribution loading on a StateVector."""

from __future__ import annotations

import dataclasses
import math
from typing import Callable

import numpy as np
from scipy import integrate

from .state import StateVector


class ContractViolation(ValueError):
    pass


class LoadError(ValueError):
    pass


class NumericError(ArithmeticError):
    pass


def _label_index(n: int, qubits) -> np.ndarray:
    """For every basis index, the integer held by the listed qubits (first listed = most significant)."""
    idx = np.arange(1 << n)
    out = np.zeros(1 << n, dtype=np.int64)
    for q in qubits:
        out = (out << 1) | ((idx >> (n - 1 - q)) & 1)
    return out


def _with_label(n: int, qubits, base: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Basis indices equal to base with the listed qubits overwritten by values."""
    out = base.copy()
    w = len(qubits)
    for k, q in enumerate(qubits):
        bit = (values >> (w - 1 - k)) & 1
        shift = n - 1 - q
        out = (out & ~(1 << shift)) | (bit << shift)
    return out


@dataclasses.dataclass(frozen=True)
class FunctionOracle:
    """U_f |x>|y> = |x>|y xor f(x)> for a classical f on basis labels."""

    f: Callable[[np.ndarray], np.ndarray]
    n_in: int
    n_out: int
    cost_tag: str | None = None

    def table(self) -> np.ndarray:
        vals = np.asarray(self.f(np.arange(1 << self.n_in)), dtype=np.int64)
        if vals.shape != (1 << self.n_in,) or np.any(vals < 0) or np.any(vals >= 1 << self.n_out):
            raise ContractViolation("oracle output does not fit the target register")
        return vals

    def apply(self, state: StateVector, inp, out, ledger=None) -> StateVector:
        qi, qo = state.qubits(inp), state.qubits(out)
        if len(qi) != self.n_in or len(qo) != self.n_out:
            raise ValueError("register widths do not match the oracle")
        n = state.n_qubits
        x = _label_index(n, qi)
        y = _label_index(n, qo)
        dest = _with_label(n, qo, np.arange(1 << n), y ^ self.table()[x])
        new = np.empty_like(state.amplitudes)
        new[dest] = state.amplitudes
        state.amplitudes = new
        if ledger is not None and self.cost_tag is not None:
            ledger.add(self.cost_tag)
        return state


def oracle_rotation(state: StateVector, v, reg, ancilla: int, check_ancilla: bool = True) -> StateVector:
    """|x>|0> -> |x>(sqrt(1 - v(x))|0> + sqrt(v(x))|1>).

    v is a callable on basis labels or a table of length 2^width. The map is
    applied as the unitary R_Y(2 arcsin sqrt(v(x))) controlled on x, so it is
    well defined on any ancilla state; with check_ancilla the ancilla must
    start in |0>.
    """
    qs = state.qubits(reg)
    table = np.asarray(v(np.arange(1 << len(qs))) if callable(v) else v, dtype=np.float64)
    if table.shape != (1 << len(qs),):
        raise ValueError("v table has the wrong length")
    if np.any(table < -1e-12) or np.any(table > 1 + 1e-12) or not np.all(np.isfinite(table)):
        raise ContractViolation("v must take values in [0, 1]")
    table = np.clip(table, 0.0, 1.0)
    n = state.n_qubits
    shift = n - 1 - ancilla
    idx = np.arange(1 << n)
    zero = idx[((idx >> shift) & 1) == 0]
    one = zero | (1 << shift)
    a0, a1 = state.amplitudes[zero], state.amplitudes[one]
    if check_ancilla and np.sum(np.abs(a1) ** 2) > 1e-12:
        raise ContractViolation("ancilla is not in |0>")
    x = _label_index(n, qs)[zero]
    c, s = np.sqrt(1.0 - table[x]), np.sqrt(table[x])
    new = state.amplitudes.copy()
    new[zero] = c * a0 - s * a1
    new[one] = s * a0 + c * a1
    state.amplitudes = new
    return state


def load_distribution(state: StateVector, probs, reg) -> StateVector:
    """Initialize an untouched register to sum_i sqrt(p_i)|i>."""
    p = np.asarray(getattr(probs, "probs", probs), dtype=np.float64)
    qs = state.qubits(reg)
    if p.shape != (1 << len(qs),):
        raise LoadError(f"{p.size} probabilities for a {len(qs)}-qubit register")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-10:
        raise LoadError("probabilities must be nonnegative and sum to 1")
    n = state.n_qubits
    lab = _label_index(n, qs)
    if np.sum(np.abs(state.amplitudes[lab != 0]) ** 2) > 1e-12:
        raise LoadError("register is not in |0...0>")
    base = np.nonzero(lab == 0)[0]
    new = np.zeros_like(state.amplitudes)
    amps = state.amplitudes[base]
    for i, pi in enumerate(p):
        if pi > 0:
            new[_with_label(n, qs, base, np.full(base.shape, i))] = amps * math.sqrt(pi)
    state.amplitudes = new
    return state


# --- Grover-Rudolph ------------------------------------------------------------------------

def _mass(pdf, a: float, b: float) -> float:
    val, err = integrate.quad(pdf, a, b, epsabs=1e-14, epsrel=1e-12, limit=200)
    if not np.isfinite(val) or err > 1e-10 * max(1.0, abs(val)):
        raise NumericError(f"quadrature failed on [{a}, {b}]")
    return val


def grover_rudolph_angles(pdf: Callable[[float], float], m: int, lo: float, hi: float) -> list[np.ndarray]:
    """Angle tables for levels 0..m-1; level l holds 2^l angles theta_i = arccos(sqrt(f_GR(i))).

    f_GR(i) is the share of region i's mass in its left half, so the split
    point is the midpoint (x_L + x_R)/2.
    """
    if m < 1 or not hi > lo:
        raise ValueError("need m >= 1 and hi > lo")
    out = []
    for level in range(m):
        edges = np.linspace(lo, hi, (1 << level) + 1)
        th = np.empty(1 << level)
        for i in range(1 << level):
            a, b = edges[i], edges[i + 1]
            tot = _mass(pdf, a, b)
            f = 0.5 if tot <= 0 else _mass(pdf, a, 0.5 * (a + b)) / tot
            th[i] = math.acos(math.sqrt(min(max(f, 0.0), 1.0)))
        out.append(th)
    return out


def grover_rudolph_load(state: StateVector, angles: list[np.ndarray], reg) -> StateVector:
    """Apply the level-by-level controlled rotations cos(theta_i)|0> + sin(theta_i)|1> to an all-zero register."""
    qs = state.qubits(reg)
    if len(angles) != len(qs):
        raise ValueError("one angle table per register qubit")
    n = state.n_qubits
    for level, th in enumerate(angles):
        target = qs[level]
        ctrl = qs[:level]
        shift = n - 1 - target
        idx = np.arange(1 << n)
        zero = idx[((idx >> shift) & 1) == 0]
        one = zero | (1 << shift)
        i = _label_index(n, ctrl)[zero] if ctrl else np.zeros(zero.size, dtype=np.int64)
        c, s = np.cos(th[i]), np.sin(th[i])
        a0, a1 = state.amplitudes[zero], state.amplitudes[one]
        new = state.amplitudes.copy()
        new[zero] = c * a0 - s * a1
        new[one] = s * a0 + c * a1
        state.amplitudes = new
    return state


def cell_probabilities(pdf, m: int, lo: float, hi: float) -> np.ndarray:
    edges = np.linspace(lo, hi, (1 << m) + 1)
    p = np.array([_mass(pdf, a, b) for a, b in zip(edges[:-1], edges[1:])])
    return p / p.sum()
