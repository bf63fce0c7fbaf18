import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qbsde.autodiff import (
    Dual,
    NumericError,
    RejectedInput,
    Tape,
    apply_sgd,
    backprop,
    dumps_checkpoint,
    flatten,
    forward_directional,
    forward_eval,
    init_net,
    linear_loss,
    lipschitz_bound,
    load_checkpoint,
    loads_checkpoint,
    make_net,
    ops,
    output_loss,
    param_count,
    quadratic_loss,
    reverse_gradient,
    save_checkpoint,
    spectral_norm,
    stored_param_count,
    unflatten,
)


def toy_net(w1, w2, act="tanh"):
    """Two inputs, two hidden neurons, one output, no biases."""
    theta = np.concatenate([np.ravel(w1), [0, 0], np.ravel(w2), [0]])
    return make_net([2, 2, 1], theta, [act, "identity"])


def central_diff(net, x, loss, h):
    theta = net.flatten()
    g = np.zeros_like(theta)
    for k in range(theta.size):
        e = np.zeros_like(theta)
        e[k] = h
        cp = loss(forward_eval(net.with_params(theta + e), x))[0]
        cm = loss(forward_eval(net.with_params(theta - e), x))[0]
        g[k] = (cp - cm) / (2 * h)
    return g


def random_net(rng, sizes=None, acts=None):
    sizes = sizes or [int(rng.integers(1, 5)) for _ in range(int(rng.integers(2, 5)))]
    acts = acts or [str(rng.choice(["identity", "relu", "sigmoid", "tanh"])) for _ in sizes[1:]]
    net = init_net(sizes, rng, acts)
    return net.with_params(net.flatten() + 0.1 * rng.standard_normal(net.n_params))


# forward_eval

def test_identity_net_passes_input_through():
    net = make_net([2, 2], np.array([1.0, 0, 0, 1, 0, 0]), "identity")
    assert np.array_equal(forward_eval(net, [3.0, 4.0]), [3.0, 4.0])


def test_toy_net_half_weights_identity():
    net = toy_net(np.full((2, 2), 0.5), np.full((1, 2), 0.5), act="identity")
    # straight-line evaluation: hidden = 0.5 + 0.5 each, output = 0.5 * 1 + 0.5 * 1
    w1, w2 = np.full((2, 2), 0.5), np.full((1, 2), 0.5)
    assert forward_eval(net, [1.0, 1.0])[0] == pytest.approx((w2 @ (w1 @ np.ones(2)))[0])
    assert forward_eval(net, [1.0, 1.0])[0] == 1.0


def test_sigmoid_zero_weights_gives_half():
    net = make_net([3, 4], None, "sigmoid")
    assert np.array_equal(forward_eval(net, [1.0, -2.0, 7.0]), np.full(4, 0.5))


def test_dimension_mismatch_rejected():
    net = make_net([3, 1])
    with pytest.raises(RejectedInput):
        forward_eval(net, [1.0, 2.0])


def test_batch_evaluation_matches_rows():
    rng = np.random.default_rng(1)
    net = random_net(rng, [3, 5, 2], ["tanh", "identity"])
    x = rng.standard_normal((6, 3))
    out = forward_eval(net, x)
    for i in range(6):
        assert np.allclose(out[i], forward_eval(net, x[i]), atol=1e-15)


# reverse_gradient

def test_toy_gradient_matches_expanded_directional_formula():
    rng = np.random.default_rng(2)
    w1, w2 = rng.standard_normal((2, 2)), rng.standard_normal((1, 2))
    x = rng.standard_normal(2)
    net = toy_net(w1, w2)
    # loss C = a^2 / 2 so f_loss'(a) = a
    loss = lambda a: (0.5 * float(a[0] ** 2), a.copy())
    grad = reverse_gradient(net, x, loss)
    a1 = w1 @ x
    f, fp = np.tanh(a1), 1 - np.tanh(a1) ** 2
    a2 = float((w2 @ f)[0])
    for _ in range(5):
        v1, v2 = rng.standard_normal((2, 2)), rng.standard_normal((1, 2))
        dc = a2 * (fp[0] * (x[0] * v1[0, 0] + x[1] * v1[0, 1]) * w2[0, 0] + f[0] * v2[0, 0]
                   + fp[1] * (x[0] * v1[1, 0] + x[1] * v1[1, 1]) * w2[0, 1] + f[1] * v2[0, 1])
        v = np.concatenate([v1.ravel(), [0, 0], v2.ravel(), [0]])
        assert grad @ v == pytest.approx(dc, rel=1e-12)
        assert forward_directional(net, x, v, loss)[1] == pytest.approx(dc, rel=1e-12)
    assert np.allclose(grad, central_diff(net, x, loss, 1e-6), atol=1e-8)


def test_zero_weight_sigmoid_output_gradient():
    net = make_net([2, 3, 2], None, ["sigmoid", "sigmoid"])
    x = np.array([0.7, -0.2])
    target = np.array([1.0, 0.0])
    grad = reverse_gradient(net, x, quadratic_loss(target))
    # output 0.5, dC/da = 2 (0.5 - t), sigmoid' = 0.25, hidden activations 0.5
    delta = 2 * (0.5 - target) * 0.25
    gw2 = grad[9:15].reshape(2, 3)
    assert np.allclose(gw2, np.outer(delta, np.full(3, 0.5)), atol=1e-15)
    assert np.allclose(grad, central_diff(net, x, quadratic_loss(target), 1e-6), atol=1e-9)


def test_linear_chain_last_weight_is_hidden_activation():
    rng = np.random.default_rng(3)
    net = random_net(rng, [2, 3, 1], ["identity", "identity"])
    x = rng.standard_normal(2)
    grad = reverse_gradient(net, x, output_loss(0))
    hidden = net.weights[0] @ x + net.biases[0]
    k = 2 * 3 + 3
    assert np.allclose(grad[k:k + 3], hidden, atol=1e-15)


def test_relu_subgradient_at_zero_is_zero():
    net = make_net([1, 1, 1], np.array([1.0, 0.0, 1.0, 0.0]), ["relu", "identity"])
    grad = reverse_gradient(net, [0.0], output_loss())
    assert grad[0] == 0.0 and grad[1] == 0.0


def test_batch_backprop_sums_rows():
    rng = np.random.default_rng(4)
    net = random_net(rng, [3, 4, 2], ["tanh", "identity"])
    x = rng.standard_normal((5, 3))
    up = rng.standard_normal((5, 2))
    g, gx = backprop(net, x, up)
    assert np.allclose(g, sum(backprop(net, x[i], up[i])[0] for i in range(5)), atol=1e-13)
    assert gx.shape == (5, 3)


def test_finite_difference_error_is_second_order():
    rng = np.random.default_rng(5)
    net = random_net(rng, [3, 6, 6, 2], ["tanh", "sigmoid", "identity"])
    net = net.with_params(net.flatten() * 3)
    x = rng.standard_normal(3)
    loss = quadratic_loss(np.array([0.3, -0.1]))
    exact = reverse_gradient(net, x, loss)
    hs = np.array([1e-2, 1e-3, 1e-4, 1e-5])
    errs = [np.max(np.abs(central_diff(net, x, loss, h) - exact)) for h in hs]
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert 1.8 <= slope <= 2.2


# forward_directional

def test_basis_direction_gives_gradient_entry():
    rng = np.random.default_rng(6)
    net = random_net(rng, [2, 4, 3], ["tanh", "identity"])
    x = rng.standard_normal(2)
    loss = linear_loss([1.0, -2.0, 0.5])
    grad = reverse_gradient(net, x, loss)
    for k in range(net.n_params):
        e = np.zeros(net.n_params)
        e[k] = 1.0
        assert forward_directional(net, x, e, loss)[1] == pytest.approx(grad[k], rel=1e-12, abs=1e-15)


def test_zero_direction_and_primal():
    rng = np.random.default_rng(7)
    net = random_net(rng, [2, 3, 1])
    x = rng.standard_normal(2)
    c, jvp = forward_directional(net, x, np.zeros(net.n_params), output_loss())
    assert jvp == 0.0
    assert c == forward_eval(net, x)[0]


def test_directional_matches_dot_product_random():
    rng = np.random.default_rng(8)
    for _ in range(300):
        net = random_net(rng)
        x = rng.standard_normal(net.n_in)
        loss = quadratic_loss(rng.standard_normal(net.n_out))
        v = rng.standard_normal(net.n_params)
        _, jvp = forward_directional(net, x, v, loss)
        assert abs(jvp - reverse_gradient(net, x, loss) @ v) <= 1e-10 * (1 + abs(jvp))


def test_directional_rejects_wrong_length():
    net = make_net([2, 1])
    with pytest.raises(RejectedInput):
        forward_directional(net, [1.0, 1.0], np.zeros(2), output_loss())


# parameter counts and layout

def test_param_count_literal_formula():
    assert param_count([2, 3, 1]) == 14
    assert param_count([1, 1]) == 2
    for d in range(1, 6):
        assert param_count([d, d]) == d * (d + 1)
    with pytest.raises(RejectedInput):
        param_count([4])


def test_stored_count_matches_traversal():
    net = make_net([2, 3, 1])
    assert stored_param_count([2, 3, 1]) == 13
    assert flatten(net).size == sum(w.size + b.size for w, b in zip(net.weights, net.biases)) == 13


def test_layout_is_layer_major_weights_then_biases():
    theta = np.arange(stored_param_count([2, 3, 1]), dtype=float)
    net = make_net([2, 3, 1], theta)
    assert np.array_equal(net.weights[0].ravel(), theta[:6])
    assert np.array_equal(net.biases[0], theta[6:9])
    assert np.array_equal(net.weights[1].ravel(), theta[9:12])
    assert np.array_equal(net.biases[1], theta[12:])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(1, 6), min_size=2, max_size=5), st.integers(0, 2**32 - 1))
def test_flatten_round_trip(sizes, seed):
    rng = np.random.default_rng(seed)
    theta = rng.standard_normal(stored_param_count(sizes))
    net = unflatten(sizes, "tanh", theta)
    assert np.array_equal(flatten(net), theta)


# Lipschitz bound

def test_lipschitz_identity_and_diagonal():
    net = make_net([3, 3, 3], np.concatenate([np.eye(3).ravel(), np.zeros(3)] * 2), "relu")
    assert lipschitz_bound(net) == pytest.approx(1.0, rel=1e-8)
    diag = make_net([2, 2], np.array([2.0, 0, 0, 1, 0, 0]), "identity")
    assert lipschitz_bound(diag) == pytest.approx(2.0, rel=1e-8)


def test_lipschitz_bounds_sampled_ratios():
    rng = np.random.default_rng(9)
    net = random_net(rng, [3, 5, 4, 2], ["tanh", "relu", "identity"])
    x = rng.standard_normal((10_000, 3))
    y = x + rng.standard_normal((10_000, 3)) * rng.uniform(0.01, 2, (10_000, 1))
    ratio = np.linalg.norm(forward_eval(net, x) - forward_eval(net, y), axis=1) / np.linalg.norm(x - y, axis=1)
    assert lipschitz_bound(net) >= ratio.max()


def test_spectral_norm_against_svd():
    rng = np.random.default_rng(10)
    w = rng.standard_normal((7, 4))
    assert spectral_norm(w) == pytest.approx(np.linalg.svd(w, compute_uv=False)[0], rel=1e-7)


def test_spectral_norm_nonconvergence_raises():
    w = np.random.default_rng(11).standard_normal((20, 20))
    with pytest.raises(NumericError):
        spectral_norm(w, tol=1e-16, max_iter=3)


def test_growth_bound_squared_convention():
    rng = np.random.default_rng(12)
    for _ in range(20):
        net = random_net(rng, [3, 6, 2], ["tanh", "identity"])
        net = net.with_params(net.flatten() + rng.standard_normal(net.n_params))
        lip_sq = lipschitz_bound(net) ** 2
        f0 = np.sum(forward_eval(net, np.zeros(3)) ** 2)
        x = rng.standard_normal((2000, 3)) * 5
        lhs = np.sum(forward_eval(net, x) ** 2, axis=1)
        assert np.all(lhs <= (lip_sq + f0) * (1 + np.sum(x * x, axis=1)))


# SGD

def test_sgd_properties():
    rng = np.random.default_rng(13)
    net = random_net(rng, [2, 3, 1])
    theta = net.flatten()
    assert np.array_equal(apply_sgd(net, np.zeros_like(theta), 0.1).flatten(), theta)
    assert not np.any(apply_sgd(net, theta, 1.0).flatten())
    g1, g2 = rng.standard_normal(theta.size), rng.standard_normal(theta.size)
    two = apply_sgd(apply_sgd(net, g1, 0.1), g2, 0.1).flatten()
    assert np.allclose(two, apply_sgd(net, g1 + g2, 0.1).flatten(), atol=1e-15)
    with pytest.raises(RejectedInput):
        apply_sgd(net, theta, 0.0)


# checkpoints

def test_checkpoint_round_trip_and_stability(tmp_path):
    rng = np.random.default_rng(14)
    net = random_net(rng, [3, 4, 2], ["relu", "identity"])
    text = dumps_checkpoint(net)
    back = loads_checkpoint(text)
    assert np.array_equal(back.flatten(), net.flatten())
    assert back.activations == net.activations
    assert dumps_checkpoint(back) == text
    p = tmp_path / "net.ckpt"
    save_checkpoint(net, p)
    assert p.read_bytes() == text.encode()
    assert np.array_equal(load_checkpoint(p).flatten(), net.flatten())
    with pytest.raises(RejectedInput):
        loads_checkpoint("garbage\n")


# tape and dual numbers

def test_tape_matches_backprop():
    rng = np.random.default_rng(15)
    net = random_net(rng, [3, 5, 2], ["sigmoid", "identity"])
    x = rng.standard_normal((4, 3))
    tape = Tape()
    theta = tape.var(net.flatten())
    out = net.apply(theta, x)
    c = ops.sum(out * out)
    (g,) = tape.gradient(c, [theta])
    up = 2 * forward_eval(net, x)
    assert np.allclose(g, backprop(net, x, up)[0], atol=1e-13)


def test_tape_elementwise_ops():
    tape = Tape()
    a = tape.var(np.array([0.5, 1.5, 2.0]))
    b = tape.var(np.array([1.0, -2.0, 3.0]))
    y = ops.sum(ops.exp(a) * b / (a + 1.0) + ops.tanh(b) ** 2 - ops.log(a))
    ga, gb = tape.gradient(y, [a, b])
    av, bv = a.value, b.value
    ref_a = np.exp(av) * bv / (av + 1) - np.exp(av) * bv / (av + 1) ** 2 - 1 / av
    ref_b = np.exp(av) / (av + 1) + 2 * np.tanh(bv) * (1 - np.tanh(bv) ** 2)
    assert np.allclose(ga, ref_a, atol=1e-14)
    assert np.allclose(gb, ref_b, atol=1e-14)


def test_dual_tangent_matches_tape_vjp():
    rng = np.random.default_rng(16)
    net = random_net(rng, [2, 4, 3], ["tanh", "identity"])
    x = rng.standard_normal((5, 2))
    V = rng.standard_normal((3, net.n_params))
    out = net.apply(Dual.seed(net.flatten(), V), x)
    c = ops.sum(out * out)
    tape = Tape()
    theta = tape.var(net.flatten())
    (g,) = tape.gradient(ops.sum(net.apply(theta, x) ** 2), [theta])
    assert np.allclose(c.t, V @ g, atol=1e-12)
