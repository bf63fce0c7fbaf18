"""Classical Monte Carlo: Chebyshev sizing, multivariate Hoeffding sizing, multilevel MC,
Riemann-sum error bounds and the three-way error budget."""

from __future__ import annotations

import dataclasses
import math
from typing import Callable

import numpy as np

from .rng import Stream
from .sde import SdeSpec, TimeGrid, coarsen, euler_maruyama, sample_increments


class ContractViolation(ValueError):
    pass


class MlmcConfigError(ValueError):
    pass


def _ceil(x: float) -> int:
    """Ceiling that ignores round-off just above an integer (e.g. 100.00000000000001)."""
    r = round(x)
    return int(r) if abs(x - r) <= 1e-9 * max(1.0, abs(x)) else int(math.ceil(x))


@dataclasses.dataclass(frozen=True)
class EstimatorResult:
    value: float | np.ndarray
    half_width: float | np.ndarray
    samples_or_queries: int


def stable_mean(x: np.ndarray, axis=0):
    """Mean computed around the first sample; exact when all samples are equal."""
    x = np.asarray(x, dtype=np.float64)
    ref = np.take(x, [0], axis=axis)
    return np.squeeze(ref, axis=axis) + np.mean(x - ref, axis=axis)


def chebyshev_samples(var: float, eps: float, delta: float) -> int:
    """Samples so that P(|mean - mu| >= eps) <= delta: ceil(var / (delta eps^2)), at least 1."""
    if not (eps > 0 and delta > 0):
        raise ValueError("eps and delta must be positive")
    return max(1, _ceil(var / (delta * eps * eps)))


def mc_mean(sampler: Callable[[int], np.ndarray], k: int, delta: float = 0.05) -> EstimatorResult:
    """Sample mean of k draws with the Chebyshev half-width sqrt(var / (delta k))."""
    if k < 1:
        raise ValueError("k must be >= 1")
    x = np.asarray(sampler(k), dtype=np.float64)
    var = float(np.var(x - x[0], ddof=1)) if k > 1 else 0.0
    return EstimatorResult(float(stable_mean(x)), math.sqrt(var / (delta * k)), k)


def mv_mc_samples(B: float, eps: float, delta: float, d: int) -> int:
    """Hoeffding plus a union bound over d coordinates: ceil((2 B^2 / eps^2) ln(2 d / delta))."""
    return max(1, _ceil(2.0 * B * B / (eps * eps) * math.log(2.0 * d / delta)))


def mv_mc_mean(sampler: Callable[[int], np.ndarray], B: float, eps: float, delta: float, d: int) -> EstimatorResult:
    """Coordinatewise mean of a bounded vector sampler; l_inf error <= eps w.p. >= 1 - delta."""
    k = mv_mc_samples(B, eps, delta, d)
    x = np.asarray(sampler(k), dtype=np.float64).reshape(k, d)
    if np.max(np.abs(x)) > B:
        raise ContractViolation(f"sample with |x|_inf = {np.max(np.abs(x)):.4g} exceeds B = {B}")
    return EstimatorResult(stable_mean(x), np.full(d, eps), k)


# --- multilevel Monte Carlo ---------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class MlmcPlan:
    K: int
    samples: tuple[int, ...]
    steps: tuple[int, ...]

    def cost(self) -> int:
        return sum(n * c for n, c in zip(self.samples, level_costs(self.steps)))


@dataclasses.dataclass(frozen=True)
class LevelStats:
    level: int
    samples: int
    mean_correction: float
    variance: float
    cost: int


def max_level(eps: float) -> int:
    return max(0, _ceil(math.log2(2.0 / eps)))


def level_steps(K: int, T: float) -> tuple[int, ...]:
    base = max(1, int(math.ceil(T)))
    return tuple(base << k for k in range(K + 1))


def level_costs(steps) -> list[int]:
    """Euler steps per sample: fine path plus the coupled coarse path."""
    return [s + (s // 2 if k > 0 else 0) for k, s in enumerate(steps)]


def level_samples(spec: SdeSpec, payoff: Callable, level: int, steps: int, n: int, stream: Stream,
                  row0: int = 0) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(P_fine, P_coarse, fine increments, coarse increments) for n coupled paths.

    The coarse path is driven by pair sums of the fine increments, so both
    come from one Brownian path. At level 0 there is no coarse path (zeros).
    """
    grid = TimeGrid.uniform(spec.t0, spec.T, steps)
    dw = sample_increments(grid, spec.d, n, stream.split("level", level), path0=row0)
    fine = payoff(euler_maruyama(spec, grid, dw).states[:, -1])
    if level == 0:
        return fine, np.zeros_like(fine), dw, np.zeros((n, 0, spec.d))
    dwc = coarsen(dw)
    cgrid = TimeGrid.uniform(spec.t0, spec.T, steps // 2)
    coarse = payoff(euler_maruyama(spec, cgrid, dwc).states[:, -1])
    return fine, coarse, dw, dwc


def giles_allocation(variances, costs, eps: float) -> list[int]:
    """N_k = ceil(2 eps^-2 sqrt(V_k / C_k) sum_j sqrt(V_j C_j)), so that sum V_k / N_k <= eps^2 / 2."""
    s = sum(math.sqrt(v * c) for v, c in zip(variances, costs))
    return [max(1, int(math.ceil(2.0 / eps ** 2 * math.sqrt(v / c) * s))) for v, c in zip(variances, costs)]


def mlmc_estimate(spec: SdeSpec, payoff: Callable, eps: float, r: float = 0.5, stream: Stream | None = None,
                  pilot: int = 1000, max_cost: float = 5e8) -> tuple[EstimatorResult, list[LevelStats]]:
    """Y = sum_k mean(P_k - P_{k-1}) with K = ceil(log2(2 / eps)) and Giles sample allocation.

    Each level mean divides by N_k and sums N_k terms. The reported
    half_width is one standard error, sqrt(sum V_k / N_k). The strong order
    r is accepted for interface symmetry with the complexity formulas; the
    level count and allocation depend on measured variances only.
    """
    stream = Stream(0, "mlmc") if stream is None else stream
    K = max_level(eps)
    steps = level_steps(K, spec.T - spec.t0)
    costs = level_costs(steps)
    var = []
    for k in range(K + 1):
        f, c, _, _ = level_samples(spec, payoff, k, steps[k], pilot, stream.split("pilot"))
        var.append(float(np.var(f - c, ddof=1)))
    alloc = giles_allocation(var, costs, eps)
    plan = MlmcPlan(K, tuple(alloc), steps)
    if plan.cost() > max_cost:
        raise MlmcConfigError(f"level budget {plan.cost():.3g} exceeds {max_cost:.3g}")
    stats, total, se2 = [], 0.0, 0.0
    for k in range(K + 1):
        n = max(alloc[k], 2)
        f, c, _, _ = level_samples(spec, payoff, k, steps[k], n, stream)
        y = f - c
        m = float(stable_mean(y))
        v = float(np.var(y, ddof=1))
        stats.append(LevelStats(k, n, m, v, n * costs[k]))
        total += m
        se2 += v / n
    return EstimatorResult(total, math.sqrt(se2), sum(s.samples for s in stats)), stats


def level_variances(spec: SdeSpec, payoff: Callable, K: int, n: int, stream: Stream) -> np.ndarray:
    """Sample variance of P_k - P_{k-1} for k = 0..K."""
    steps = level_steps(K, spec.T - spec.t0)
    out = []
    for k in range(K + 1):
        f, c, _, _ = level_samples(spec, payoff, k, steps[k], n, stream)
        out.append(np.var(f - c, ddof=1))
    return np.array(out)


def mlmc_sample_complexity(eps: float, r: float) -> float:
    """Classical MLMC cost: eps^-2 (r > 1/2), eps^-2 ln^2(1/eps) (r = 1/2), eps^(-1/r) (r < 1/2)."""
    _check_eps_r(eps, r)
    if r > 0.5:
        return eps ** -2
    if r == 0.5:
        return eps ** -2 * math.log(1.0 / eps) ** 2
    return eps ** (-1.0 / r)


def qamlmc_sample_complexity(eps: float, r: float) -> float:
    """Quantum-accelerated MLMC cost with polylog factors (constants 1)."""
    _check_eps_r(eps, r)
    lg = math.log(1.0 / eps)
    llg = math.log(lg)
    if r > 1:
        return eps ** -1 * lg ** 1.5 * llg ** 2
    if r == 1:
        return eps ** -1 * lg ** 3.5 * llg ** 2
    return eps ** (-1.0 / r) * lg ** 1.5 * llg ** 2


def _check_eps_r(eps, r):
    if not (0 < eps < 1) or not r > 0:
        raise ValueError("need eps in (0, 1) and r > 0")


# --- Riemann sums and the error budget ------------------------------------------------------

def riemann_error_bound(L: float, a: float, b: float, M: int, n: int) -> float:
    """M L |b - a|^(M+1) / (2 n) for M nested left- or right-rule sums."""
    if not b > a or n < 1 or M < 1:
        raise ValueError("need b > a, n >= 1, M >= 1")
    return M * L * abs(b - a) ** (M + 1) / (2.0 * n)


def left_riemann(f: Callable, a: float, b: float, n: int) -> float:
    dx = (b - a) / n
    return float(np.sum(f(a + dx * np.arange(n))) * dx)


def ngauss_bound(N: int, d: int, L_fp: float, dt: float, eps: float) -> float:
    """Lower bound on the Gaussian grid size so the discretisation error is at most eps / 3."""
    lg = ngauss_log2(N, d, L_fp, dt, eps)
    return 2.0 ** lg if lg < 1024 else math.inf


def ngauss_log2(N: int, d: int, L_fp: float, dt: float, eps: float) -> float:
    """log2 of ngauss_bound, finite where the bound itself overflows."""
    if L_fp <= 0 or dt == 0:
        return -math.inf
    return (math.log2(3.0 * N * d * L_fp / (2.0 * eps)) + (N * d + 1) * math.log2(abs(6.0 * dt)))


def ngauss_qubits(n_gauss: float) -> int:
    return max(1, _ceil(math.log2(n_gauss))) if n_gauss > 1 else 1


def steps_for_accuracy(eps: float, r: float) -> int:
    """N = ceil(eps^(-1/r)) so the time-discretisation error is O(eps)."""
    return max(1, _ceil(eps ** (-1.0 / r)))


def error_budget(eps: float, r: float, d: int, L_fp: float, dt: float | None = None, T: float = 1.0,
                 lam: float = 1.0, delta: float = 0.01) -> dict:
    """Split eps into thirds: time steps, Gaussian grid size, and estimator sample/query counts.

    dt defaults to T / N. Classical samples use Chebyshev with variance lam^2
    at accuracy eps / 3; quantum queries are ceil(lam / (eps / 3)).
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    third = eps / 3.0
    N = steps_for_accuracy(eps, r)
    step = T / N if dt is None else dt
    n_g = ngauss_bound(N, d, L_fp, step, eps)
    lg = ngauss_log2(N, d, L_fp, step, eps)
    return {
        "eps_each": third,
        "N": N,
        "dt": step,
        "N_Gauss": n_g,
        "n_Gauss": max(1, _ceil(lg)) if lg > 0 else 1,
        "samples": chebyshev_samples(lam * lam, third, delta),
        "queries": max(1, _ceil(lam / third)),
    }
