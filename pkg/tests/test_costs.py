import math
import threading

import numpy as np
import pytest

from qbsde.autodiff import forward_eval, init_net, lipschitz_bound
from qbsde.bsde import make_hjb, make_model, payoffs, sample_batch
from qbsde.bsde.estimators import draw_directions
from qbsde.costs import (
    UNITARIES,
    ComplexityQuery,
    QueryLedger,
    complexity_table,
    fwdgrad_mixed_bound,
    fwdgrad_option1_bound,
    fwdgrad_option1_bound_ntheta,
    gradient_method_complexity,
    loss_estimation_budget,
    payoff_variance_bound,
    scaling_fit,
    theoretical_budget,
)
from qbsde.rng import stream


# gradient-estimation table

def test_table_examples():
    assert gradient_method_complexity(ComplexityQuery("backprop", "classical", None, 1, 4, 0.1)) == pytest.approx(400)
    assert gradient_method_complexity(ComplexityQuery("backprop", "quantum", None, 3, 4, 0.1)) == pytest.approx(180)
    mixed = gradient_method_complexity(ComplexityQuery("forward_gradient", "quantum", "classical", 3, 4, 0.1))
    assert mixed == pytest.approx(3**5 * 4**1.5 / 0.1**3)
    assert mixed == pytest.approx(fwdgrad_mixed_bound(9, 4, 0.1))


def test_table_rows_in_d():
    d, g, e = 2, 9.0, 0.05
    expect = {
        ("classical", None, "backprop"): g / e**2,
        ("classical", "classical", "forward_gradient"): d**4 * g / e**2,
        ("classical", None, "numerical"): d**2 * g / e**2,
        ("quantum", None, "backprop"): d**2 * math.sqrt(g) / e,
        ("quantum", "quantum", "forward_gradient"): d**2.5 * math.sqrt(g) / e,
        ("quantum", None, "numerical"): d**2.5 * math.sqrt(g) / e,
    }
    for (x, v, m), val in expect.items():
        assert gradient_method_complexity(ComplexityQuery(m, x, v, d, g, e)) == pytest.approx(val)
    assert len(complexity_table(d, g, e)) == 7


def test_unlisted_combination_rejected():
    with pytest.raises(ValueError):
        gradient_method_complexity(ComplexityQuery("backprop", "quantum", "quantum"))
    with pytest.raises(ValueError):
        gradient_method_complexity(ComplexityQuery("adjoint", "classical"))


def test_option1_variants():
    assert fwdgrad_option1_bound(16, 4, 1.0, 0.1) == pytest.approx(16 * 2 / 0.1)
    assert fwdgrad_option1_bound_ntheta(16, 1.0, 0.1) == pytest.approx(16 * 4 / 0.1)


# solver budgets

def test_theoretical_budget_examples():
    c = theoretical_budget("classical", 4, 2, 0.1, 1.0)
    q = theoretical_budget("qamc", 4, 2, 0.1, 1.0)
    assert c["U_Gauss"] == pytest.approx(800) and q["U_Gauss"] == pytest.approx(80)
    assert all(c[k] / q[k] == pytest.approx(10) for k in UNITARIES)
    assert q["U_NN"] == pytest.approx(40) and q["arith"] == pytest.approx(160) and q["U_u0"] == pytest.approx(10)
    with pytest.raises(ValueError):
        theoretical_budget("grover", 4, 2, 0.1, 1.0)


def test_solution_mode_exponent():
    pts = [(e, theoretical_budget("qamc", None, 1, e, 1.0, r=0.5)["U_f"]) for e in (0.1, 0.05, 0.02, 0.01)]
    slope = np.polyfit(np.log([p[0] for p in pts]), np.log([p[1] for p in pts]), 1)[0]
    assert slope == pytest.approx(-3.0)
    pts = [(e, theoretical_budget("classical", None, 1, e, 1.0, r=0.5)["U_f"]) for e in (0.1, 0.01)]
    assert np.log(pts[1][1] / pts[0][1]) / np.log(0.1) == pytest.approx(-4.0)


def test_budget_monotonicity():
    for mode in ("classical", "qamc"):
        base = theoretical_budget(mode, 4, 2, 0.1, 1.0)
        for other in (theoretical_budget(mode, 4, 2, 0.2, 1.0),):
            assert all(other[k] <= base[k] for k in UNITARIES)
        for other in (theoretical_budget(mode, 5, 2, 0.1, 1.0), theoretical_budget(mode, 4, 3, 0.1, 1.0),
                      theoretical_budget(mode, 4, 2, 0.1, 2.0)):
            assert all(other[k] >= base[k] for k in UNITARIES)


def test_payoff_variance_bound_examples():
    # K_fp (1 + K2 dt^(2r) + C (1 + |x0|^2)) at (1, 1, 0.25, 0.5, 1, 0) is 1 + 0.25 + 1 = 2.25
    assert payoff_variance_bound(1, 1, 0.25, 0.5, 1, 0) == pytest.approx(2.25)
    assert payoff_variance_bound(1, 1, 0.25, 0.5, 1, 1) == pytest.approx(3.25)
    assert payoff_variance_bound(0, 1, 0.25, 0.5, 1, [3.0, 4.0]) == 0.0
    with pytest.raises(ValueError):
        payoff_variance_bound(-1, 1, 0.25, 0.5, 1, 0)


def test_measured_hjb_payoff_variance_within_bound():
    problem = make_hjb(1)
    for seed in range(3):
        model = make_model(problem, 10, np.random.default_rng(seed))
        batch = sample_batch(problem, model.grid, 20_000, stream(seed, "var"))
        fp = payoffs(model, problem, batch)
        sup_x2 = np.max(np.sum(batch.states**2, axis=2), axis=1)
        K_fp = np.max(fp**2 / (1 + sup_x2))
        # Euler is exact for zero drift and constant diffusion, so the strong-error term vanishes
        C = np.mean(sup_x2) / (1 + float(problem.x0 @ problem.x0))
        bound = payoff_variance_bound(K_fp, 0.0, float(model.grid.dt[0]), 0.5, C, problem.x0)
        assert np.var(fp) <= bound


def test_loss_estimation_budget():
    assert loss_estimation_budget(1, 0, 0, 0.1) == pytest.approx(10)
    assert loss_estimation_budget(1, 0, 3, 0.1) == pytest.approx(2 * loss_estimation_budget(1, 0, 1, 0.1))
    assert loss_estimation_budget(2, 1, 1, 0.5) == pytest.approx(12)


def test_measured_network_variance_within_growth_constant():
    rng = np.random.default_rng(1)
    for _ in range(10):
        net = init_net([3, 8, 1], rng, ["tanh", "identity"])
        net = net.with_params(net.flatten() + 0.5 * rng.standard_normal(net.n_params))
        x = rng.standard_normal((50_000, 3)) * 2
        fx = forward_eval(net, x)[:, 0]
        f0 = float(forward_eval(net, np.zeros(3))[0])
        budget_factor = (lipschitz_bound(net) ** 2 + f0**2) * (1 + np.mean(np.sum(x * x, axis=1)))
        assert np.var(fx) <= budget_factor


def test_direction_moments():
    n_theta = 30
    v = draw_directions(50_000, n_theta, stream(2, "chi"))
    sq = np.sum(v * v, axis=1)
    assert abs(sq.mean() - n_theta) < 4 * math.sqrt(2 * n_theta / sq.size)
    assert sq.var() == pytest.approx(2 * n_theta, rel=0.05)
    assert np.mean(v**4) == pytest.approx(3.0, rel=0.02)


# scaling fits

def test_scaling_fit_exact_power_laws():
    q = np.array([16, 64, 256, 1024, 4096], dtype=float)
    f = scaling_fit(zip(q, 3.0 / q))
    assert f.slope == pytest.approx(-1.0) and f.ci_low == pytest.approx(-1.0) and f.ci_high == pytest.approx(-1.0)
    assert scaling_fit(zip(q, 1 / np.sqrt(q))).slope == pytest.approx(-0.5)
    noisy = scaling_fit(zip(q, np.exp(np.random.default_rng(0).normal(0, 0.1, 5)) / q))
    assert noisy.ci_low <= noisy.slope <= noisy.ci_high


def test_scaling_fit_rejections():
    with pytest.raises(ValueError):
        scaling_fit([(1, 1), (2, 0.5), (4, 0.25)])
    with pytest.raises(ValueError):
        scaling_fit([(1, 1), (2, 0.5), (4, 0.0), (8, 0.1)])


# ledger

def test_ledger_snapshot_diff_and_csv():
    led = QueryLedger()
    led.add("U_NN", 3)
    snap = led.snapshot()
    led.charge({"U_NN": 2, "U_Gauss": 1}, times=5)
    diff = led.diff(snap)
    assert diff["U_NN"] == 10 and diff["U_Gauss"] == 5 and diff["U_f"] == 0
    assert led["U_NN"] == 13 and led.total() == 18
    text = led.to_csv()
    assert text.splitlines()[0] == "unitary,count"
    assert "U_NN,13" in text.splitlines()
    assert len(text.splitlines()) == 1 + len(UNITARIES)


def test_ledger_rejects_decrease_and_unknown_names():
    led = QueryLedger()
    with pytest.raises(ValueError):
        led.add("U_f", -1)
    with pytest.raises(KeyError):
        led.add("U_oracle")


def test_ledger_threads():
    led = QueryLedger()

    def work():
        for _ in range(2000):
            led.add("U_mu")

    ts = [threading.Thread(target=work) for _ in range(4)]
    for t in ts:
        t.start()
    for t in ts:
        t.join()
    assert led["U_mu"] == 8000
