import numpy as np
import pytest
from scipy import stats

from qbsde.rng import stream
from qbsde.sde import (
    NumericOverflow,
    PathBatch,
    SdeSpec,
    TimeGrid,
    coarsen,
    discretize_gaussian,
    dump_paths,
    empirical_strong_order,
    euler_maruyama,
    gbm_exact,
    gbm_spec,
    load_paths,
    sample_increments,
    simulate,
)


def test_zero_step_gives_zero_increments():
    grid = TimeGrid(np.array([0.0, 0.5, 0.5, 1.0]))
    dw = sample_increments(grid, 2, 50, stream(0, "dw"))
    assert not np.any(dw[:, 1])
    assert np.all(dw[:, 0] != 0)


def test_increment_moments():
    grid = TimeGrid(np.array([0.0, 0.1]))
    dw = sample_increments(grid, 1, 1_000_000, stream(1, "moments")).ravel()
    n = dw.size
    assert abs(dw.mean()) < 4 * np.sqrt(0.1) / np.sqrt(n)
    assert abs(dw.var() / 0.1 - 1) < 0.01


def test_increments_reproducible_and_keyed_by_path():
    grid = TimeGrid.uniform(0, 1, 8)
    a = sample_increments(grid, 3, 40, stream(7, "paths"))
    b = sample_increments(grid, 3, 40, stream(7, "paths"))
    assert np.array_equal(a, b)
    part = sample_increments(grid, 3, 5, stream(7, "paths"), path0=20)
    assert np.array_equal(a[20:25], part)
    with pytest.raises(ValueError):
        sample_increments(grid, 3, 0, stream(7, "paths"))


def test_deterministic_euler_hits_grid_times():
    spec = SdeSpec(1, lambda t, x: np.ones_like(x), lambda t, x: 0.0, 0.0)
    grid = TimeGrid.uniform(0, 1, 10)
    paths = euler_maruyama(spec, grid, np.zeros((3, 10, 1)))
    assert np.allclose(paths.states[:, :, 0], grid.times[None, :], rtol=0, atol=1e-15)


def test_random_walk_sums_increments():
    spec = SdeSpec(2, lambda t, x: np.zeros_like(x), lambda t, x: np.eye(2), np.array([1.0, -1.0]))
    grid = TimeGrid.uniform(0, 1, 16)
    dw = sample_increments(grid, 2, 30, stream(2, "rw"))
    paths = euler_maruyama(spec, grid, dw)
    assert np.allclose(paths.states[:, -1], spec.x0 + dw.sum(axis=1), atol=1e-14)


def test_euler_recursion_residual_is_zero():
    spec = gbm_spec(d=2, a=0.1, b=0.3)
    paths = simulate(spec, 12, 25, stream(3, "gbm"))
    grid = TimeGrid.uniform(0, 1, 12)
    x, dw = paths.states, paths.increments
    for k in range(12):
        t = grid.times[k]
        nxt = x[:, k] + spec.mu(t, x[:, k]) * grid.dt[k] + np.einsum("bij,bj->bi", spec.sigma(t, x[:, k]), dw[:, k])
        assert np.array_equal(nxt, x[:, k + 1])


def test_gbm_strong_error_shrinks_like_sqrt_dt():
    a, b = 0.05, 0.5
    spec = gbm_spec(a=a, b=b)
    exact = gbm_exact(a, b, 1.0)
    errs = []
    for n in (16, 256):
        grid = TimeGrid.uniform(0, 1, n)
        dw = sample_increments(grid, 1, 4000, stream(4, "gbm", n))
        paths = euler_maruyama(spec, grid, dw)
        w = np.concatenate([np.zeros((4000, 1, 1)), np.cumsum(dw, axis=1)], axis=1)
        errs.append(np.abs(paths.states[:, -1, 0] - exact(grid.times, w)[:, -1, 0]).mean())
    # sixteen times smaller steps: error ratio near 4
    assert 2.5 < errs[0] / errs[1] < 6


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_overflow_names_path_and_step():
    spec = SdeSpec(1, lambda t, x: x * 1e300, lambda t, x: 0.0, 1.0)
    grid = TimeGrid.uniform(0, 1, 4)
    with pytest.raises(NumericOverflow, match="path 0 at step 2"):
        euler_maruyama(spec, grid, np.zeros((2, 4, 1)))


def test_shape_mismatch_rejected():
    spec = gbm_spec()
    with pytest.raises(ValueError):
        euler_maruyama(spec, TimeGrid.uniform(0, 1, 4), np.zeros((2, 5, 1)))


def test_coarsen_pair_sums_bitwise():
    dw = stream(5, "c").normals(10, 8).reshape(10, 8, 1)
    c = coarsen(dw)
    assert c.shape == (10, 4, 1)
    for k in range(4):
        assert np.array_equal(c[:, k], dw[:, 2 * k] + dw[:, 2 * k + 1])
    with pytest.raises(ValueError):
        coarsen(dw[:, :3])


def test_strong_order_additive_noise_linear_drift():
    # dX = t dt + 0.5 dW has X_t = t^2 / 2 + 0.5 W_t, and Euler's only error is the drift quadrature
    spec = SdeSpec(1, lambda t, x: np.full_like(x, t), lambda t, x: 0.5, 0.0)
    exact = lambda t, w: 0.5 * t[None, :, None] ** 2 + 0.5 * w
    r = empirical_strong_order(spec, exact, [4, 8, 16, 32, 64], 200, stream(6, "so"))
    assert 0.9 <= r <= 1.1


def test_strong_order_deterministic_ode():
    spec = SdeSpec(1, lambda t, x: x, lambda t, x: 0.0, 1.0)
    exact = lambda t, w: np.exp(t)[None, :, None] + 0 * w
    r = empirical_strong_order(spec, exact, [8, 16, 32, 64, 128], 4, stream(7, "so"))
    assert 0.85 <= r <= 1.15


def test_strong_order_gbm_half():
    spec = gbm_spec(a=0.05, b=0.2)
    r = empirical_strong_order(spec, gbm_exact(0.05, 0.2, 1.0), [8, 16, 32, 64, 128], 2000, stream(8, "so"))
    assert 0.35 <= r <= 0.65


def test_strong_order_needs_three_grids():
    spec = gbm_spec()
    with pytest.raises(ValueError):
        empirical_strong_order(spec, gbm_exact(0.05, 0.2, 1.0), [8, 16], 10, stream(9, "so"))


def test_discretized_gaussian_one_bit():
    dist = discretize_gaussian(1, 1.0)
    assert np.array_equal(dist.probs, [0.5, 0.5])
    assert np.allclose(dist.points, [-3.0, 3.0])


@pytest.mark.parametrize("n_bits", [2, 3, 5, 8])
def test_discretized_gaussian_symmetry(n_bits):
    dist = discretize_gaussian(n_bits, 0.3)
    assert abs(dist.mean()) <= 1e-12
    assert dist.probs.sum() == pytest.approx(1.0, abs=1e-15)
    assert np.all(dist.probs >= 0)
    assert dist.points.size == 2**n_bits
    assert dist.points[0] == pytest.approx(-3 * np.sqrt(0.3)) and dist.points[-1] == pytest.approx(3 * np.sqrt(0.3))


def test_discretized_gaussian_variance_tends_to_truncated_moment():
    target = stats.truncnorm(-3, 3).var()
    assert target == pytest.approx(0.973, abs=1e-3)
    dist = discretize_gaussian(12, 0.25)
    var = dist.probs @ dist.points**2 / 0.25
    assert abs(var / target - 1) < 0.01
    assert dist.tail_mass == pytest.approx(2 * stats.norm.sf(3))


def test_discretized_gaussian_mean_error_within_riemann_bound():
    # left rule on the density over [-3s, 3s]: |sum - integral| <= L (b - a)^2 / (2 n)
    s = 1.0
    for n_bits in range(2, 11):
        n = 2**n_bits
        edges = np.linspace(-3 * s, 3 * s, n + 1)
        left = stats.norm.pdf(edges[:-1]).sum() * (edges[1] - edges[0])
        exact = 1 - 2 * stats.norm.sf(3)
        lip = stats.norm.pdf(1.0)  # max |pdf'| sits at x = 1
        assert abs(left - exact) <= lip * 36 / (2 * n)


def test_path_dump_round_trip(tmp_path):
    spec = gbm_spec(d=2)
    paths = simulate(spec, 6, 9, stream(10, "dump"))
    p = tmp_path / "paths.bin"
    dump_paths(p, paths, seed=10)
    back, seed = load_paths(p)
    assert seed == 10
    assert np.array_equal(back.increments, paths.increments)
    assert np.array_equal(back.states, paths.states)
    raw = p.read_bytes()
    assert raw[:8] == b"QBSDEPTH" and len(raw) == 40 + 8 * (9 * 6 * 2 + 9 * 7 * 2)
    (tmp_path / "bad").write_bytes(b"nope" * 20)
    with pytest.raises(ValueError):
        load_paths(tmp_path / "bad")


def test_pathbatch_shapes():
    pb = PathBatch(np.zeros((3, 4, 2)), np.zeros((3, 5, 2)))
    assert pb.batch == 3
