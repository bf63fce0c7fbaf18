"""Amplitude estimation by phase estimation on the Grover iterate, the median trick,
QAMC mean estimation and robust inner-product estimation."""

from __future__ import annotations

import dataclasses
import math
from typing import Callable

import numpy as np

from ..mc import EstimatorResult
from .oracles import ContractViolation, load_distribution, oracle_rotation
from .state import MAX_QUBITS, CapacityError, H, StateVector


@dataclasses.dataclass(frozen=True)
class AeOutcome:
    """Exact outcome law of one amplitude-estimation run."""

    probs: np.ndarray      # over phase-register labels y
    estimates: np.ndarray  # sin^2(pi y / 2^m)
    queries: int           # applications of A (or A^dagger)


def grover_iterate(chi: np.ndarray, good: np.ndarray) -> np.ndarray:
    """G = -U V with V = I - 2 P_good and U = I - 2|chi><chi|.

    On span{good, bad} G rotates by 2 phi where a = sin^2 phi, so its
    eigenphases are +-2 phi and a and 1 - a stay distinguishable.
    """
    dim = chi.shape[0]
    U = np.eye(dim, dtype=np.complex128) - 2.0 * np.outer(chi, chi.conj())
    V = np.eye(dim, dtype=np.complex128)
    V[good, good] = -1.0
    return -(U @ V)


def inverse_qft(m: int) -> np.ndarray:
    k = 1 << m
    j = np.arange(k)
    return np.exp(-2j * np.pi * np.outer(j, j) / k) / math.sqrt(k)


def good_mask(n_qubits: int, qubit: int) -> np.ndarray:
    idx = np.arange(1 << n_qubits)
    return ((idx >> (n_qubits - 1 - qubit)) & 1) == 1


def ae_distribution(chi: np.ndarray, good: np.ndarray, m: int) -> AeOutcome:
    """Run phase estimation on |chi>: Hadamards on m phase qubits, controlled G^(2^j), inverse QFT.

    The joint state is held as a (2^m, dim) array; the controlled power
    G^(2^j) acts on the rows whose phase label has bit j set.
    """
    chi = np.asarray(chi, dtype=np.complex128)
    n_sys = int(round(math.log2(chi.shape[0])))
    if m < 1 or m + n_sys > MAX_QUBITS:
        raise CapacityError(f"{m} phase qubits plus {n_sys} system qubits exceed capacity")
    G = grover_iterate(chi, good)
    k = 1 << m
    joint = np.tile(chi, (k, 1)) / math.sqrt(k)
    labels = np.arange(k)
    power = G
    for j in range(m):
        rows = (labels >> j) & 1 == 1
        joint[rows] = joint[rows] @ power.T
        power = power @ power
    joint = inverse_qft(m) @ joint
    probs = np.sum(np.abs(joint) ** 2, axis=1)
    probs = probs / probs.sum()
    est = np.sin(np.pi * labels / k) ** 2
    return AeOutcome(probs, est, 1 + 2 * (k - 1))


def amplitude_estimate(chi: np.ndarray, good: np.ndarray, m: int, rng: np.random.Generator, reps: int = 1,
                       ledger=None, cost: dict | None = None) -> np.ndarray:
    """reps independent estimates of a = |P_good chi|^2 using 2^m - 1 Grover iterates each."""
    out = ae_distribution(chi, good, m)
    y = rng.choice(out.probs.size, size=reps, p=out.probs)
    if ledger is not None and cost:
        ledger.charge(cost, out.queries * reps)
    return out.estimates[y]


def ae_error_bound(a: float, k: int) -> float:
    """2 pi sqrt(a (1 - a)) / k + pi^2 / k^2; holds with probability >= 8 / pi^2."""
    return 2 * math.pi * math.sqrt(max(a * (1 - a), 0.0)) / k + math.pi ** 2 / k ** 2


def phase_bits_for(eps: float, max_bits: int = 16) -> int:
    """Smallest m with pi / 2^m + pi^2 / 4^m <= eps, the worst case of the bound over a."""
    for m in range(1, max_bits + 1):
        k = 1 << m
        if math.pi / k + math.pi ** 2 / k ** 2 <= eps:
            return m
    raise CapacityError(f"accuracy {eps} needs more than {max_bits} phase bits")


def median_reps(delta: float) -> int:
    return 1 if delta >= 0.5 else int(math.ceil(18.0 * math.log(1.0 / delta)))


def median_power(estimator: Callable[[], float], delta: float) -> float:
    """Median of ceil(18 ln(1/delta)) runs (one run when delta >= 1/2)."""
    vals = [estimator() for _ in range(median_reps(delta))]
    return float(np.median(vals))


# --- QAMC ----------------------------------------------------------------------------------

def prepare_mean_state(probs, v01) -> tuple[np.ndarray, np.ndarray]:
    """A|0> = sum_x sqrt(p_x)|x>(sqrt(1 - v(x))|0> + sqrt(v(x))|1>) and its good-subspace mask."""
    p = np.asarray(getattr(probs, "probs", probs), dtype=np.float64)
    nb = int(round(math.log2(p.size)))
    s = StateVector(nb + 1)
    load_distribution(s, p, range(nb))
    oracle_rotation(s, v01, range(nb), nb)
    return s.amplitudes, good_mask(nb + 1, nb)


def qamc_mean(dist, v, lo: float, hi: float, eps: float, delta: float, rng: np.random.Generator,
              m: int | None = None, ledger=None, cost: dict | None = None, dither: bool = True) -> EstimatorResult:
    """Estimate sum_x p_x v(x) for v with values in [lo, hi].

    v is rescaled to w in [0, 1]. Each run draws c ~ U[0, 1/2] and estimates
    the amplitude of c + w / 2, which moves the target off the estimator's
    grid of representable amplitudes; the mean is recovered as 2 (a - c).
    The median over ceil(18 ln(1/delta)) runs is returned. With m unset the
    phase register is sized so the per-run error on the mean is at most eps.
    """
    p = np.asarray(getattr(dist, "probs", dist), dtype=np.float64)
    vals = np.asarray(v(np.arange(p.size)) if callable(v) else v, dtype=np.float64)
    if not hi > lo:
        raise ValueError("need hi > lo")
    if np.any(vals < lo - 1e-12) or np.any(vals > hi + 1e-12):
        raise ContractViolation("v leaves the declared range")
    w = np.clip((vals - lo) / (hi - lo), 0.0, 1.0)
    scale = (2.0 if dither else 1.0) * (hi - lo)
    if m is None:
        m = phase_bits_for(eps / scale)
    outcome_cache = {}

    def one_run() -> float:
        c = rng.uniform(0.0, 0.5) if dither else 0.0
        target = c + w / 2 if dither else w
        chi, good = prepare_mean_state(p, target)
        out = ae_distribution(chi, good, m)
        outcome_cache["q"] = out.queries
        a = out.estimates[rng.choice(out.probs.size, p=out.probs)]
        return (2.0 * (a - c) if dither else a)

    reps = median_reps(delta)
    est01 = median_power(one_run, delta)
    queries = outcome_cache["q"] * reps
    if ledger is not None and cost:
        ledger.charge(cost, queries)
    k = 1 << m
    return EstimatorResult(lo + (hi - lo) * est01, scale * (math.pi / k + math.pi ** 2 / k ** 2), queries)


# --- robust inner-product estimation --------------------------------------------------------

def hadamard_test_state(v: np.ndarray, c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """H on the ancilla of (|0>|v> + |1>|c>)/sqrt(2); P(ancilla = 1) = (1 - <v|c>) / 2 for real unit vectors."""
    dim = 1 << max(1, int(math.ceil(math.log2(max(v.size, 2)))))
    vp = np.zeros(dim)
    cp = np.zeros(dim)
    vp[:v.size] = v
    cp[:c.size] = c
    nb = int(round(math.log2(dim)))
    s = StateVector(nb + 1, np.concatenate([vp, cp]) / math.sqrt(2))
    s.apply_gate(H, 0)
    return s.amplitudes, good_mask(nb + 1, 0)


def inner_product_estimate(v, c, eps: float, gamma: float, rng: np.random.Generator, m: int | None = None) -> float:
    """Estimate v . c to additive error eps with failure probability gamma."""
    v = np.asarray(v, dtype=np.float64).ravel()
    c = np.asarray(c, dtype=np.float64).ravel()
    if v.shape != c.shape:
        raise ValueError("vectors differ in length")
    nv, nc = np.linalg.norm(v), np.linalg.norm(c)
    if nv == 0 or nc == 0:
        raise ContractViolation("zero-norm vector")
    chi, good = hadamard_test_state(v / nv, c / nc)
    if m is None:
        m = phase_bits_for(eps / (2 * nv * nc))
    out = ae_distribution(chi, good, m)

    def one_run() -> float:
        return float(out.estimates[rng.choice(out.probs.size, p=out.probs)])

    p1 = median_power(one_run, gamma)
    return nv * nc * (1.0 - 2.0 * p1)
