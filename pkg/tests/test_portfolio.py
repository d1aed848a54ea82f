import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from illiquid_cpt.frictions import FrictionSpec, market_bound
from illiquid_cpt.market import PricePath, TimeGrid
from illiquid_cpt.portfolio import (StrategyParams, cesaro_average, enforce_liquidation, evaluate_rate,
                                    make_admissible, simulate_paths, simulate_wealth, unwind_start)


def quadratic_value_symbolic():
    """Terminal cash of rate 1.5 - S_t against S_t = 1 + t with H = 1/2, alpha = 2."""
    t = sp.symbols("t")
    s = 1 + t
    lam = sp.Rational(1, 2)
    phi = (sp.Rational(3, 2) - s) / (2 * lam)
    return sp.integrate(-phi * s - lam * phi ** 2, (t, 0, 1))


def test_evaluate_rate_examples():
    ol = StrategyParams.open_loop([1.0, -1.0])
    assert evaluate_rate(ol, 0, 1.0, 0.0, 0.3) == 1.0
    fb = StrategyParams.feedback([0.0, 0.0, 0.0, 0.0])
    assert all(evaluate_rate(fb, k, 3.0, 2.0, 0.5, n_steps=8) == 0.0 for k in range(8))
    mix = StrategyParams.mixture([StrategyParams.open_loop([1.0, 1.0]),
                                  StrategyParams.open_loop([-1.0, -1.0])], [0.5, 0.5])
    assert evaluate_rate(mix, 0, 1.0, 0.0, 0.25) == 1.0
    assert evaluate_rate(mix, 1, 1.0, 0.0, 0.75) == -1.0


def test_evaluate_rate_feedback_and_clamp():
    fb = StrategyParams.feedback([1.0, 2.0, -1.0, 4.0], rate_bound=5.0)
    assert evaluate_rate(fb, 2, 0.5, 3.0, 0.0, n_steps=8) == pytest.approx(1 + 1 - 3 + 1)
    assert evaluate_rate(StrategyParams.open_loop([50.0, -60.0], rate_bound=5.0), 1, 0, 0, 0.5) == -5.0
    with pytest.raises(ValueError):
        evaluate_rate(fb, 0, 1.0, 0.0, 0.5)
    with pytest.raises(ValueError):
        evaluate_rate(fb, 0, 1.0, 0.0, 1.5, n_steps=4)


def test_evaluate_rate_matches_batch_simulation(rng):
    # the per-cell rule reproduces the vectorized rates
    n = 16
    fb = StrategyParams.feedback(rng.normal(size=4), rate_bound=3.0)
    s = np.exp(rng.normal(size=n + 1) * 0.2)
    out = simulate_wealth(fb, PricePath(TimeGrid(n), s), FrictionSpec(), unwind=False, z1=0.4)
    inv = 0.4
    for k in range(n):
        r = evaluate_rate(fb, k, s[k], inv, 0.5, n_steps=n)
        assert r == pytest.approx(out.rates[k], abs=1e-14)
        inv += r / n


@pytest.mark.parametrize("bad", [
    dict(kind="open_loop", rates=[np.nan]),
    dict(kind="feedback", coeffs=[1.0, 2.0]),
    dict(kind="randomized_mixture", components=(StrategyParams.open_loop([1.0]),), weights=[0.7]),
    dict(kind="randomized_mixture", components=(StrategyParams.open_loop([1.0]),) * 2, weights=[1.5, -0.5]),
    dict(kind="open_loop", rates=[1.0], rate_bound=0.0),
    dict(kind="other"),
])
def test_strategy_params_rejects(bad):
    with pytest.raises(ValueError):
        StrategyParams(**bad)


def test_strategy_dict_round_trip(rng):
    mix = StrategyParams.mixture([StrategyParams.open_loop(rng.normal(size=4)),
                                  StrategyParams.feedback(rng.normal(size=4))], [0.3, 0.7], 20.0)
    assert StrategyParams.from_dict(mix.to_dict()) == mix


def test_constant_rate_closed_form():
    grid = TimeGrid(10)
    out = simulate_wealth(StrategyParams.open_loop(np.ones(10)), PricePath(grid, np.full(11, 2.0)),
                          FrictionSpec(2.0, "constant", (0.5,)), unwind=False)
    assert out.terminal_money == pytest.approx(-2.5, abs=1e-14)
    assert out.terminal_inventory == pytest.approx(1.0, abs=1e-14)
    assert out.money[-1] == pytest.approx(out.terminal_money, abs=1e-14)


def test_zero_strategy(rng):
    s = PricePath(TimeGrid(8), np.exp(rng.normal(size=9)))
    out = simulate_wealth(StrategyParams.open_loop(np.zeros(8)), s, FrictionSpec(), z0=1.25)
    assert out.terminal_money == 1.25
    assert out.terminal_inventory == 0.0


def test_quadratic_symbolic_value():
    assert quadratic_value_symbolic() == sp.Rational(1, 24)


def test_quadratic_discretization_within_2pct():
    n = 256
    grid = TimeGrid(n)
    # sampled at left endpoints the rate leaves 1/(2n) shares unsold; project first
    rates = enforce_liquidation(0.5 - grid.times[:-1], grid)
    out = simulate_wealth(StrategyParams.open_loop(rates), PricePath(grid, 1 + grid.times),
                          FrictionSpec(2.0, "constant", (0.5,)))
    target = float(quadratic_value_symbolic())
    assert abs(out.terminal_money / target - 1) < 0.02
    assert abs(out.terminal_inventory) < 1e-12


def test_money_and_inventory_recursions(rng):
    n = 12
    grid = TimeGrid(n)
    s = np.exp(rng.normal(size=n + 1) * 0.3)
    rates = rng.normal(size=n)
    spec = FrictionSpec(1.7, "affine_positive", (0.2, 0.3))
    out = simulate_wealth(StrategyParams.open_loop(rates), PricePath(grid, s), spec, z0=1.0, z1=-0.5)
    money, inv = 1.0, -0.5
    for k in range(n):
        money -= rates[k] * s[k] / n + (0.2 + 0.3 * s[k]) * abs(rates[k]) ** 1.7 / n
        inv += rates[k] / n
        assert out.money[k + 1] == pytest.approx(money, abs=1e-12)
        assert out.inventory[k + 1] == pytest.approx(inv, abs=1e-12)
    assert out.bound == market_bound(PricePath(grid, s), spec)


def test_simulate_wealth_rejects_mismatched_grid():
    with pytest.raises(ValueError):
        simulate_wealth(StrategyParams.open_loop(np.zeros(4)), PricePath(TimeGrid(5), np.ones(6)),
                        FrictionSpec())


def test_enforce_liquidation_examples():
    np.testing.assert_array_equal(enforce_liquidation(np.full(5, 3.0)), np.zeros(5))
    z = np.array([1.0, -2.0, 1.0])
    np.testing.assert_array_equal(enforce_liquidation(z), z)
    out = enforce_liquidation(np.array([3.0, 1.0, -1.0, 2.0]), TimeGrid(4))
    np.testing.assert_allclose(out, [1.75, -0.25, -2.25, 0.75], atol=1e-15)
    assert abs(out.sum() * 0.25) < 1e-15


@given(arrays(float, st.integers(2, 64), elements=st.floats(-1e3, 1e3)))
def test_enforce_liquidation_properties(rates):
    out = enforce_liquidation(rates)
    assert abs(out.sum() / out.size) <= 1e-12 * (1 + np.abs(rates).max())
    np.testing.assert_allclose(enforce_liquidation(out), out, atol=1e-12 * (1 + np.abs(rates).max()))


def test_make_admissible_shrinks_into_box(rng):
    p = make_admissible(StrategyParams.open_loop(rng.normal(size=16) * 100, rate_bound=5.0))
    assert np.abs(p.rates).max() <= 5.0 + 1e-12
    assert abs(p.rates.mean()) < 1e-12


def test_feedback_unwind_liquidates(rng):
    n = 24
    k0 = unwind_start(n)
    assert k0 == n - 3
    grid = TimeGrid(n)
    s = PricePath(grid, np.exp(np.cumsum(rng.normal(size=n + 1)) * 0.1))
    fb = StrategyParams.feedback([5.0, 1.0, 0.5, -2.0], rate_bound=8.0)
    out = simulate_wealth(fb, s, FrictionSpec(), z1=2.0)
    assert abs(out.terminal_inventory) <= 1e-9 * (1 + out.max_abs_rate)
    # the unwind cells share one rate
    assert np.ptp(out.rates[k0:]) == 0.0


def test_cesaro_examples(rng):
    v = rng.normal(size=6)
    np.testing.assert_array_equal(cesaro_average([v]), v)
    np.testing.assert_array_equal(cesaro_average([np.ones(4), -np.ones(4)]), np.zeros(4))
    vs = [rng.normal(size=9) for _ in range(10)]
    manual = [sum(vec[k] for vec in vs) / 10 for k in range(9)]
    np.testing.assert_allclose(cesaro_average(vs), manual, rtol=0, atol=1e-12)
    with pytest.raises(ValueError):
        cesaro_average([])
    with pytest.raises(ValueError):
        cesaro_average([np.ones(3), np.ones(4)])


def test_mixture_follows_u_blocks():
    grid = TimeGrid(4)
    s = np.ones((3, 5))
    mix = StrategyParams.mixture([StrategyParams.open_loop(np.ones(4)),
                                  StrategyParams.open_loop(-np.ones(4)),
                                  StrategyParams.open_loop(np.zeros(4))], [0.2, 0.5, 0.3])
    out = simulate_paths(mix, s, FrictionSpec(), u=np.array([0.1, 0.6, 0.95]))
    np.testing.assert_array_equal(out.rates[:, 0], [1.0, -1.0, 0.0])
    assert grid.n_steps == out.rates.shape[1]


def test_single_component_mixture_identical(rng):
    comp = StrategyParams.open_loop(enforce_liquidation(rng.normal(size=8)))
    mix = StrategyParams.mixture([comp], [1.0])
    prices = np.exp(rng.normal(size=(50, 9)) * 0.2)
    u = rng.random(50)
    a = simulate_paths(comp, prices, FrictionSpec(), u)
    b = simulate_paths(mix, prices, FrictionSpec(), u)
    np.testing.assert_allclose(a.terminal_money, b.terminal_money, rtol=0, atol=1e-12)


rate_vectors = arrays(float, 8, elements=st.floats(-20, 20))
alphas = st.floats(1.1, 3.5)


@given(rate_vectors, arrays(float, 9, elements=st.floats(0.0, 5.0)), alphas, st.floats(0.05, 3.0))
def test_dominance_open_loop(rates, prices, alpha, lam):
    spec = FrictionSpec(alpha, "constant", (lam,))
    out = simulate_paths(StrategyParams.open_loop(rates), prices, spec)
    b = out.bound[0]
    assert out.terminal_money[0] <= b + 1e-9 * (1 + abs(b))


@given(rate_vectors, rate_vectors, st.floats(0.0, 1.0), alphas,
       arrays(float, 9, elements=st.floats(0.1, 5.0)))
def test_wealth_concave_in_rates(phi, psi, theta, alpha, prices):
    spec = FrictionSpec(alpha, "linear_in_price", (0.4,))

    def x1(r):
        return simulate_paths(StrategyParams.open_loop(r), prices, spec).terminal_money[0]

    mixed = x1(theta * phi + (1 - theta) * psi)
    scale = 1 + abs(x1(phi)) + abs(x1(psi))
    assert mixed >= theta * x1(phi) + (1 - theta) * x1(psi) - 1e-9 * scale


@given(arrays(float, 9, elements=st.floats(-10, 10)), st.floats(-5, 5))
def test_zero_strategy_neutral(prices, z0):
    out = simulate_paths(StrategyParams.open_loop(np.zeros(8)), prices, FrictionSpec(), z0=z0)
    assert out.terminal_money[0] == z0


@given(arrays(float, 4, elements=st.floats(-10, 10)), st.floats(-5, 5), st.integers(2, 40))
def test_feedback_unwind_property(coeffs, z1, n):
    prices = np.linspace(1.0, 2.0, n + 1)
    out = simulate_paths(StrategyParams.feedback(coeffs, rate_bound=50.0), prices, FrictionSpec(), z1=z1)
    assert abs(out.terminal_inventory[0]) <= 1e-9 * (1 + out.max_abs_rate[0])
    assert math.isfinite(out.terminal_money[0])
