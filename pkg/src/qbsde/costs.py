"""Query ledger and closed-form query complexities.

Every formula is evaluated with leading constant 1 and log factors dropped,
so it fixes the shape (exponents, ratios) of a cost and never its absolute size.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import math
import threading
from typing import Iterable

import numpy as np

UNITARIES = ("U_X0", "U_t0", "U_u0", "U_grad0", "U_mu", "U_sigma", "U_f", "U_NN", "U_Gauss", "U_loss", "arith")
SHAPE_NOTE = "constants fixed at 1, log factors dropped: compare shapes, not absolute values"


class QueryLedger:
    """Monotone per-unitary counters; safe to share between threads."""

    def __init__(self):
        self._lock = threading.Lock()
        self._counts = dict.fromkeys(UNITARIES, 0)

    def add(self, name: str, count: int = 1) -> None:
        if name not in self._counts:
            raise KeyError(f"unknown unitary {name!r}")
        if count < 0:
            raise ValueError("ledger counts only increase")
        with self._lock:
            self._counts[name] += int(count)

    def charge(self, cost: dict, times: int = 1) -> None:
        """Add times * cost[name] for every entry of a per-application cost table."""
        for name, c in cost.items():
            self.add(name, c * times)

    def __getitem__(self, name: str) -> int:
        return self._counts[name]

    def snapshot(self) -> dict:
        with self._lock:
            return dict(self._counts)

    def diff(self, before: dict) -> dict:
        now = self.snapshot()
        return {k: now[k] - before.get(k, 0) for k in now}

    def total(self) -> int:
        return sum(self.snapshot().values())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["unitary", "count"])
        for k, v in self.snapshot().items():
            w.writerow([k, v])
        return buf.getvalue()


# --- gradient-estimation complexities -------------------------------------------------------

_ROWS = {
    ("classical", None, "backprop"): lambda d, g, e, n: g / e ** 2,
    ("classical", "classical", "forward_gradient"): lambda d, g, e, n: n ** 2 * g / e ** 2,
    ("classical", None, "numerical"): lambda d, g, e, n: n * g / e ** 2,
    ("quantum", None, "backprop"): lambda d, g, e, n: n * math.sqrt(g) / e,
    ("quantum", "classical", "forward_gradient"): lambda d, g, e, n: n ** 2.5 * g ** 1.5 / e ** 3,
    ("quantum", "quantum", "forward_gradient"): lambda d, g, e, n: n ** 1.25 * math.sqrt(g) / e,
    ("quantum", None, "numerical"): lambda d, g, e, n: n ** 1.25 * math.sqrt(g) / e,
}


@dataclasses.dataclass(frozen=True)
class ComplexityQuery:
    method: str
    x_mode: str
    v_mode: str | None = None
    d: int = 1
    g_max: float = 1.0
    eps: float = 0.1
    n_theta: int | None = None

    def key(self):
        return (self.x_mode, self.v_mode, self.method)


def gradient_method_complexity(q: ComplexityQuery) -> float:
    """NN queries to estimate the gradient to l_inf error eps.

    With n_theta unset the parameter count is d^2, which gives the tabulated
    d-forms (d^4 g / eps^2, d^2 sqrt(g) / eps, ...). Passing n_theta evaluates
    the same rows in the parameter count directly.
    """
    f = _ROWS.get(q.key())
    if f is None:
        raise ValueError(f"no complexity row for X={q.x_mode}, v={q.v_mode}, method={q.method}")
    if not (q.eps > 0 and q.g_max >= 0 and q.d >= 1):
        raise ValueError("need eps > 0, g_max >= 0, d >= 1")
    n = q.d ** 2 if q.n_theta is None else q.n_theta
    return f(q.d, q.g_max, q.eps, n)


def fwdgrad_option1_bound(n_theta: int, d: int, g_max: float, eps: float) -> float:
    """n_theta sqrt(d g_max) / eps as stated for the fully quantum forward gradient.

    The derivation behind it is for a d-dimensional gradient; the variant in
    n_theta alone is n_theta sqrt(n_theta g_max) / eps (see the next function).
    """
    return n_theta * math.sqrt(d * g_max) / eps


def fwdgrad_option1_bound_ntheta(n_theta: int, g_max: float, eps: float) -> float:
    return n_theta * math.sqrt(n_theta * g_max) / eps


def fwdgrad_mixed_bound(n_theta: int, g_max: float, eps: float) -> float:
    """n_theta^2.5 g_max^1.5 / eps^3 (quantum X, classical v)."""
    return n_theta ** 2.5 * g_max ** 1.5 / eps ** 3


# --- full solver budgets -------------------------------------------------------------------

_INIT = ("U_X0", "U_t0", "U_u0", "U_grad0", "U_loss")
_PER_STEP = ("U_mu", "U_sigma", "U_f", "U_NN")


def theoretical_budget(mode: str, N: int | None, d: int, eps: float, lam: float, r: float | None = None) -> dict:
    """Queries per unitary for one loss estimate.

    quantum: init unitaries lam/eps, U_mu/U_sigma/U_f/U_NN N lam/eps,
    U_Gauss d N lam/eps, arith d^2 N lam/eps. classical: lam/eps replaced by
    lam^2/eps^2. With N=None and r given, N = eps^(-1/r) (solution mode).
    """
    if mode not in ("classical", "qamc"):
        raise ValueError("mode must be 'classical' or 'qamc'")
    if not eps > 0:
        raise ValueError("eps must be positive")
    if N is None:
        if r is None:
            raise ValueError("give N or r")
        N = eps ** (-1.0 / r)
    base = lam / eps if mode == "qamc" else (lam / eps) ** 2
    out = {k: base for k in _INIT}
    out.update({k: N * base for k in _PER_STEP})
    out["U_Gauss"] = d * N * base
    out["arith"] = d * d * N * base
    return out


def payoff_variance_bound(K_fp: float, K2: float, dt: float, r: float, C: float, x0) -> float:
    """lambda^2 = K_fp (1 + K2 dt^(2r) + C (1 + |x0|^2))."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=np.float64))
    if min(K_fp, K2, dt, r, C) < 0:
        raise ValueError("inputs must be nonnegative")
    return K_fp * (1.0 + K2 * dt ** (2 * r) + C * (1.0 + float(x0 @ x0)))


def loss_estimation_budget(L: float, f0: float, E_X2: float, eps: float) -> float:
    """(L + |f(0)|^2)(1 + E|X|^2) / eps queries for the NN loss under QAMC."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    return (L + f0 * f0) * (1.0 + E_X2) / eps


def complexity_table(d: int, g_max: float, eps: float) -> list[tuple[str, float]]:
    rows = []
    for (x, v, m) in _ROWS:
        q = ComplexityQuery(m, x, v, d, g_max, eps)
        rows.append((f"{m}[X={x},v={v or '-'}]", gradient_method_complexity(q)))
    return rows


# --- empirical scaling ---------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    ci_low: float
    ci_high: float


def scaling_fit(points: Iterable[tuple[float, float]], n_boot: int = 2000, level: float = 0.95,
                rng: np.random.Generator | None = None) -> ScalingFit:
    """Least-squares slope of log(error) against log(queries) with a bootstrap CI."""
    pts = np.asarray(list(points), dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 4:
        raise ValueError("need at least 4 (queries, error) points")
    if np.any(pts <= 0):
        raise ValueError("queries and errors must be positive")
    lx, ly = np.log(pts[:, 0]), np.log(pts[:, 1])
    slope, icpt = np.polyfit(lx, ly, 1)
    rng = np.random.default_rng(0) if rng is None else rng
    boots = []
    for _ in range(n_boot):
        idx = rng.integers(0, len(lx), len(lx))
        if np.ptp(lx[idx]) == 0:
            continue
        boots.append(np.polyfit(lx[idx], ly[idx], 1)[0])
    a = (1 - level) / 2
    lo, hi = (np.quantile(boots, [a, 1 - a]) if boots else (slope, slope))
    return ScalingFit(float(slope), float(icpt), float(lo), float(hi))
