"""Micro-scale QAMC estimate of the deep-BSDE loss.

The joint register holds one n_gauss-bit Gaussian increment per step and
dimension. The payoff |g(X_N) - u_N|^2 is tabulated classically on every
basis label (the oracle-callback model) and QAMC estimates its mean. Each
application of the state-preparation unitary A is charged to the ledger as
one loss-circuit walk: the initial-value unitaries once, U_Gauss d N times,
U_mu, U_sigma and U_f N times, U_NN N - 1 times and arithmetic d^2 N times.
"""

from __future__ import annotations

import dataclasses
import itertools

import numpy as np

from ..bsde.model import BsdeModel, payoffs
from ..bsde.problems import PdeProblem
from ..costs import QueryLedger
from ..mc import EstimatorResult
from ..sde import PathBatch, discretize_gaussian, euler_maruyama
from .ampest import qamc_mean

MAX_STEPS = 2
MAX_GAUSS_BITS = 3


def walk_cost(N: int, d: int) -> dict:
    """Unitary applications in one forward walk of the loss circuit."""
    return {"U_X0": 1, "U_t0": 1, "U_u0": 1, "U_grad0": 1, "U_Gauss": d * N, "U_mu": N, "U_sigma": N,
            "U_f": N, "U_NN": N - 1, "arith": d * d * N, "U_loss": 1}


@dataclasses.dataclass(frozen=True)
class PipelineResult:
    estimate: EstimatorResult
    exact: float
    ledger: dict
    n_qubits: int


def payoff_table(model: BsdeModel, problem: PdeProblem, n_gauss: int) -> tuple[np.ndarray, np.ndarray]:
    """(probabilities, payoffs) over every joint increment label."""
    grid = model.grid
    N, d = grid.N, problem.d
    if N > MAX_STEPS or d != 1 or n_gauss > MAX_GAUSS_BITS:
        raise ValueError(f"micro pipeline supports N <= {MAX_STEPS}, d = 1, n_gauss <= {MAX_GAUSS_BITS}")
    cells = [discretize_gaussian(n_gauss, float(dt)) for dt in grid.dt]
    combos = np.array(list(itertools.product(range(1 << n_gauss), repeat=N * d)))
    inc = np.stack([cells[k].points[combos[:, k]] for k in range(N)], axis=1)[..., None]
    prob = np.prod([cells[k].probs[combos[:, k]] for k in range(N)], axis=0)
    states = euler_maruyama(problem.sde(), grid, inc).states
    return prob, payoffs(model, problem, PathBatch(inc, states))


def qamc_loss(model: BsdeModel, problem: PdeProblem, n_gauss: int, eps: float, delta: float,
              rng: np.random.Generator, m: int | None = None, ledger: QueryLedger | None = None) -> PipelineResult:
    ledger = QueryLedger() if ledger is None else ledger
    before = ledger.snapshot()
    prob, pay = payoff_table(model, problem, n_gauss)
    hi = float(pay.max()) * (1 + 1e-9) + 1e-12
    res = qamc_mean(prob, pay, 0.0, hi, eps, delta, rng, m=m, ledger=ledger,
                    cost=walk_cost(model.grid.N, problem.d))
    n_q = int(np.log2(prob.size)) + 1
    return PipelineResult(res, float(prob @ pay), ledger.diff(before), n_q)
