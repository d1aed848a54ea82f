import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from illiquid_cpt.market import (BenchmarkSpec, DrivingPath, PriceMapSpec, PricePath, ProcessSpec,
                                 TimeGrid, benchmark_from_driving, price_from_driving,
                                 sample_driving_path, sample_driving_paths, uniform_draws)


def test_grid_endpoints():
    g = TimeGrid(8)
    assert g.times[0] == 0.0 and g.times[-1] == 1.0
    assert np.all(np.diff(g.times) > 0)
    assert g.dt == 0.125


@pytest.mark.parametrize("n", [0, 1, 2.5])
def test_grid_rejects_small(n):
    with pytest.raises(ValueError):
        TimeGrid(n)


def test_zero_noise_path_is_constant():
    spec = ProcessSpec("brownian_drift", start=0.7)
    path = sample_driving_path(spec, TimeGrid(10), 99)
    assert np.all(path.values == 0.7)


def test_deterministic_drift_integration():
    spec = ProcessSpec("jump_diffusion", drift=1.0, jump_rate=0.0)
    path = sample_driving_path(spec, TimeGrid(4), 5)
    np.testing.assert_allclose(path.values[:, 0], [0.0, 0.25, 0.5, 0.75, 1.0], rtol=0, atol=1e-15)


def test_start_value_fixed():
    spec = ProcessSpec("jump_diffusion", dimension=2, start=(1.0, -2.0), volatility=0.4,
                       jump_rate=3.0, jump_scale=0.2)
    for seed in range(5):
        assert np.array_equal(sample_driving_path(spec, TimeGrid(6), seed).values[0], [1.0, -2.0])


def test_increment_variance_matches_sigma2_dt():
    sigma, grid = 0.8, TimeGrid(2)
    spec = ProcessSpec("brownian_drift", volatility=sigma)
    paths = sample_driving_paths(spec, grid, 0, 100_000)
    inc = np.diff(paths[:, :, 0], axis=1)[:, 0]
    target = sigma ** 2 * grid.dt
    assert abs(inc.var(ddof=1) / target - 1.0) < 0.02


def test_increments_on_disjoint_cells_uncorrelated():
    spec = ProcessSpec("jump_diffusion", volatility=0.3, jump_rate=4.0, jump_mean=0.1, jump_scale=0.2)
    paths = sample_driving_paths(spec, TimeGrid(4), 1000, 10_000)
    inc = np.diff(paths[:, :, 0], axis=1)
    n = inc.shape[0]
    for i, j in [(0, 1), (0, 3), (1, 2)]:
        r = np.corrcoef(inc[:, i], inc[:, j])[0, 1]
        assert abs(r) < 3.0 / math.sqrt(n)


def test_jump_counts_raise_variance():
    # compound Poisson adds rate * (mean^2 + scale^2) per unit time
    spec = ProcessSpec("jump_diffusion", volatility=0.0, jump_rate=5.0, jump_mean=0.3, jump_scale=0.1)
    paths = sample_driving_paths(spec, TimeGrid(2), 0, 40_000)
    y1 = paths[:, -1, 0]
    assert abs(y1.mean() - 5.0 * 0.3) < 4 * y1.std() / math.sqrt(y1.size)
    assert abs(y1.var() / (5.0 * (0.09 + 0.01)) - 1.0) < 0.05


def test_symmetric_binary_two_values():
    spec = ProcessSpec("symmetric_binary", volatility=math.sqrt(2.0))
    paths = sample_driving_paths(spec, TimeGrid(2), 3, 2000)
    mid = paths[:, 1, 0]
    np.testing.assert_allclose(np.abs(mid), 1.0)
    assert abs((mid > 0).mean() - 0.5) < 0.05


def test_reproducible_and_seed_sensitive():
    spec = ProcessSpec("jump_diffusion", volatility=0.2, jump_rate=1.0, jump_scale=0.3)
    a = sample_driving_path(spec, TimeGrid(16), 42).values
    b = sample_driving_path(spec, TimeGrid(16), 42).values
    c = sample_driving_path(spec, TimeGrid(16), 43).values
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_batch_paths_extend_without_replay():
    spec = ProcessSpec("brownian_drift", volatility=0.5)
    small = sample_driving_paths(spec, TimeGrid(8), 10, 5)
    big = sample_driving_paths(spec, TimeGrid(8), 10, 9)
    assert np.array_equal(small, big[:5])
    assert np.array_equal(big[7], sample_driving_path(spec, TimeGrid(8), 17).values)


def test_seed_order_does_not_change_pooled_law():
    spec = ProcessSpec("brownian_drift", volatility=0.5)
    grid = TimeGrid(4)
    seeds = list(range(200))
    fwd = np.sort([sample_driving_path(spec, grid, s).values[-1, 0] for s in seeds])
    rev = np.sort([sample_driving_path(spec, grid, s).values[-1, 0] for s in reversed(seeds)])
    assert np.array_equal(fwd, rev)


def test_uniform_draws_prefix_and_independent_stream():
    u = uniform_draws(7, 10)
    assert np.array_equal(u, uniform_draws(7, 20)[:10])
    assert np.all((u >= 0) & (u < 1))
    # not the first uniform of the path seed stream
    assert u[0] != np.random.default_rng(7).random()


def test_uniform_draws_uncorrelated_with_paths():
    spec = ProcessSpec("brownian_drift", volatility=1.0)
    n = 10_000
    y1 = sample_driving_paths(spec, TimeGrid(2), 0, n)[:, -1, 0]
    u = uniform_draws(0, n)
    assert abs(np.corrcoef(u, y1)[0, 1]) < 3.0 / math.sqrt(n)


@pytest.mark.parametrize("kwargs", [
    {"volatility": math.nan},
    {"drift": math.inf},
    {"jump_rate": -1.0},
    {"volatility": -0.1},
    {"dimension": 0},
    {"kind": "levy"},
])
def test_process_spec_rejects(kwargs):
    with pytest.raises(ValueError):
        ProcessSpec(**kwargs)


def test_identity_map():
    path = DrivingPath(TimeGrid(2), np.array([[0.0], [0.5], [1.0]]))
    np.testing.assert_array_equal(price_from_driving(path, PriceMapSpec("identity")).s, [0.0, 0.5, 1.0])


def test_exponential_map_of_zero():
    path = DrivingPath(TimeGrid(3), np.zeros((4, 1)))
    s = price_from_driving(path, PriceMapSpec("exponential_of_first_coordinate", 1.0, 1.0)).s
    assert np.all(s == 1.0)


def test_affine_map():
    assert PriceMapSpec("affine_of_first_coordinate", base=2.0, scale=3.0)(0.5) == 3.5


def test_map_uses_first_coordinate_only():
    values = np.array([[0.1, 9.0], [0.2, -9.0], [0.3, 0.0]])
    s = price_from_driving(DrivingPath(TimeGrid(2), values), PriceMapSpec("identity")).s
    np.testing.assert_array_equal(s, [0.1, 0.2, 0.3])


@given(st.lists(st.floats(-50, 50), min_size=3, max_size=3))
def test_exponential_map_positive(ys):
    assert np.all(PriceMapSpec("exponential_of_first_coordinate", 2.0, 0.7)(ys) > 0)


def test_non_finite_driving_path_rejected():
    path = DrivingPath(TimeGrid(2), np.array([[0.0], [np.nan], [1.0]]))
    with pytest.raises(ValueError):
        price_from_driving(path, PriceMapSpec())


def test_price_path_validation():
    with pytest.raises(ValueError):
        PricePath(TimeGrid(2), np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        PricePath(TimeGrid(2), np.array([1.0, np.inf, 2.0]))


def test_benchmarks():
    path = DrivingPath(TimeGrid(2), np.array([[0.0], [0.4], [1.3]]))
    pm = PriceMapSpec("identity")
    assert benchmark_from_driving(path, pm, BenchmarkSpec("zero")) == 0.0
    assert benchmark_from_driving(path, pm, BenchmarkSpec("constant", 5.0)) == 5.0
    assert benchmark_from_driving(path, pm, BenchmarkSpec("terminal_price_multiple", 2.0)) == pytest.approx(2.6)
    # left-endpoint average over the two cells: (0 + 0.4) / 2
    assert benchmark_from_driving(path, pm, BenchmarkSpec("path_average_multiple", 1.0)) == pytest.approx(0.2)


@given(st.lists(st.floats(-1e6, 1e6), min_size=3, max_size=12),
       st.sampled_from(["zero", "constant", "terminal_price_multiple", "path_average_multiple"]))
def test_benchmark_finite_on_finite_paths(prices, kind):
    assert math.isfinite(float(BenchmarkSpec(kind, 1.5).evaluate(np.array(prices))))
