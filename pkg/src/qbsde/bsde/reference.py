"""Reference values for the one-dimensional HJB problem.

u_t + 2 u_xx + (u_x)^2 = 0, u(T, x) = g(x). Two independent routes:

* a Crank-Nicolson grid solve on [-10, 10] with the nonlinear term treated
  by trapezoidal Picard iteration, refined until successive answers agree;
* the substitution w = exp(u / 2), which turns the equation into the
  backward heat equation w_t + 2 w_xx = 0, so that
  u(t, x) = 2 log E[exp(g(x + 2 W_{T-t}) / 2)], evaluated by Gauss-Hermite
  quadrature or Monte Carlo.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu


class OracleFailure(RuntimeError):
    pass


def _hjb_g(x):
    return np.log(0.5 * (1.0 + x * x))


def crank_nicolson(g, T: float, x0: float, nx: int, nt: int, nonlinear: bool = True, L: float = 10.0,
                   diffusion: float = 2.0, picard_tol: float = 1e-13, picard_max: int = 50) -> float:
    """Solve u_tau = diffusion u_xx + [nonlinear] (u_x)^2 forward in tau = T - t; return u(t0, x0).

    Boundary rows impose a vanishing third difference (quadratic extrapolation).
    """
    x = np.linspace(-L, L, nx)
    dx = x[1] - x[0]
    u = g(x).astype(np.float64)
    if nt == 0 or T == 0.0:
        return float(np.interp(x0, x, u))
    dtau = T / nt
    main = np.full(nx, -2.0)
    lap = sparse.diags([np.ones(nx - 1), main, np.ones(nx - 1)], [-1, 0, 1], format="lil") * (diffusion / dx ** 2)
    lap[0, :] = 0.0
    lap[nx - 1, :] = 0.0
    lap = lap.tocsr()
    eye = sparse.identity(nx, format="lil")
    a = (eye - 0.5 * dtau * lap).tolil()
    for row, cols in ((0, (0, 1, 2, 3)), (nx - 1, (nx - 1, nx - 2, nx - 3, nx - 4))):
        a[row, :] = 0.0
        for c, w in zip(cols, (1.0, -3.0, 3.0, -1.0)):
            a[row, c] = w
    solver = splu(a.tocsc())
    b_op = (sparse.identity(nx) + 0.5 * dtau * lap).tocsr()

    def nl(v):
        if not nonlinear:
            return np.zeros_like(v)
        g1 = np.zeros_like(v)
        g1[1:-1] = (v[2:] - v[:-2]) / (2 * dx)
        out = g1 * g1
        out[0] = out[-1] = 0.0
        return out

    for _ in range(nt):
        rhs0 = b_op @ u
        n_old = nl(u)
        rhs0[0] = rhs0[-1] = 0.0
        new = solver.solve(rhs0 + dtau * n_old)
        for _ in range(picard_max if nonlinear else 0):
            nxt = solver.solve(rhs0 + 0.5 * dtau * (n_old + nl(new)))
            if np.max(np.abs(nxt - new)) < picard_tol:
                new = nxt
                break
            new = nxt
        u = new
    return float(np.interp(x0, x, u))


def refine(g, T: float, x0: float, nonlinear: bool = True, tol: float = 1e-4, start=(401, 50), max_levels: int = 6):
    """Double the space and time resolution until successive answers agree to tol."""
    nx, nt = start
    prev = crank_nicolson(g, T, x0, nx, nt, nonlinear)
    for _ in range(max_levels):
        nx, nt = 2 * nx - 1, 2 * nt
        cur = crank_nicolson(g, T, x0, nx, nt, nonlinear)
        if abs(cur - prev) < tol:
            return cur
        prev = cur
    raise OracleFailure(f"grid refinement did not settle (last change {abs(cur - prev):.2e})")


def hjb_reference(d: int = 1, T: float = 1.0, x0: float = 0.0, tol: float = 1e-4) -> float:
    """u(0, x0) for the HJB problem in one dimension by the refined grid solve."""
    if d != 1:
        raise ValueError("the grid oracle is one-dimensional")
    return refine(_hjb_g, T, x0, True, tol)


def cole_hopf_quadrature(T: float = 1.0, x0: float = 0.0, n: int = 120) -> float:
    """2 log E[exp(g(x0 + 2 W_T) / 2)] by Gauss-Hermite quadrature."""
    if T == 0.0:
        return float(_hjb_g(x0))
    z, w = np.polynomial.hermite_e.hermegauss(n)
    vals = np.exp(0.5 * _hjb_g(x0 + 2.0 * np.sqrt(T) * z))
    return float(2.0 * np.log(np.sum(w * vals) / np.sqrt(2.0 * np.pi)))


def cole_hopf_monte_carlo(T: float, x0, samples: np.ndarray) -> tuple[float, float]:
    """Monte Carlo version of the same expectation in any dimension; samples are N(0, I) rows.

    Returns (estimate, standard error propagated through the log).
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=np.float64))
    x = x0 + 2.0 * np.sqrt(T) * samples
    w = np.sqrt(0.5 * (1.0 + np.sum(x * x, axis=-1)))
    m = w.mean()
    se = w.std(ddof=1) / np.sqrt(len(w))
    return float(2.0 * np.log(m)), float(2.0 * se / m)
