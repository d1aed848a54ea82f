"""Trading-rate strategies and pathwise money/inventory dynamics.

A strategy emits a trading rate per grid cell.  The rate for cell ``k`` may
read the price and inventory at ``t_k`` and the randomization draw ``U`` but
nothing later, which makes every policy here progressively measurable by
construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .frictions import FrictionSpec, market_bounds
from .market import PricePath

STRATEGY_KINDS = ("open_loop", "feedback", "randomized_mixture")
DEFAULT_RATE_BOUND = 1e3


@dataclass(frozen=True, eq=False)
class StrategyParams:
    """Parameters of a trading-rate policy.

    open_loop
        ``rates[k]`` is the rate on cell ``k``.
    feedback
        ``coeffs = (a0, a1, a2, a3)`` and the rate is
        ``a0 + a1*s_k + a2*inventory_k + a3*t_k``.
    randomized_mixture
        ``components[i]`` is followed when ``U`` falls in the i-th block of the
        cumulative ``weights``.

    Every emitted rate is clamped to ``[-rate_bound, rate_bound]``.
    """

    kind: str
    rates: np.ndarray | None = None
    coeffs: np.ndarray | None = None
    components: tuple["StrategyParams", ...] = ()
    weights: np.ndarray | None = None
    rate_bound: float = DEFAULT_RATE_BOUND

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(f"strategy kind must be one of {STRATEGY_KINDS}, got {self.kind!r}")
        if not (math.isfinite(self.rate_bound) and self.rate_bound > 0):
            raise ValueError("rate_bound must be positive and finite")
        if self.kind == "open_loop":
            rates = np.asarray(self.rates, dtype=float)
            if rates.ndim != 1 or rates.size == 0 or not np.all(np.isfinite(rates)):
                raise ValueError("open_loop rates must be a finite nonempty vector")
            object.__setattr__(self, "rates", rates)
        elif self.kind == "feedback":
            coeffs = np.asarray(self.coeffs, dtype=float)
            if coeffs.shape != (4,) or not np.all(np.isfinite(coeffs)):
                raise ValueError("feedback needs four finite coefficients")
            object.__setattr__(self, "coeffs", coeffs)
        else:
            comps = tuple(self.components)
            weights = np.asarray(self.weights, dtype=float)
            if not comps or weights.shape != (len(comps),):
                raise ValueError("mixture needs one weight per component")
            if not np.all(np.isfinite(weights)) or np.any(weights < 0):
                raise ValueError("mixture weights must be finite and nonnegative")
            if abs(weights.sum() - 1.0) > 1e-9:
                raise ValueError("mixture weights must sum to 1")
            object.__setattr__(self, "components", comps)
            object.__setattr__(self, "weights", weights / weights.sum())

    @classmethod
    def open_loop(cls, rates, rate_bound: float = DEFAULT_RATE_BOUND) -> "StrategyParams":
        return cls("open_loop", rates=rates, rate_bound=rate_bound)

    @classmethod
    def feedback(cls, coeffs, rate_bound: float = DEFAULT_RATE_BOUND) -> "StrategyParams":
        return cls("feedback", coeffs=coeffs, rate_bound=rate_bound)

    @classmethod
    def mixture(cls, components, weights, rate_bound: float = DEFAULT_RATE_BOUND) -> "StrategyParams":
        return cls("randomized_mixture", components=tuple(components), weights=weights, rate_bound=rate_bound)

    def n_steps(self) -> int | None:
        if self.kind == "open_loop":
            return self.rates.size
        if self.kind == "randomized_mixture":
            sizes = {c.n_steps() for c in self.components} - {None}
            if len(sizes) > 1:
                raise ValueError("mixture components disagree on n_steps")
            return sizes.pop() if sizes else None
        return None

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "rate_bound": self.rate_bound}
        if self.kind == "open_loop":
            out["rates"] = self.rates.tolist()
        elif self.kind == "feedback":
            out["coeffs"] = self.coeffs.tolist()
        else:
            out["components"] = [c.to_dict() for c in self.components]
            out["weights"] = self.weights.tolist()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "StrategyParams":
        kind = data["kind"]
        bound = float(data.get("rate_bound", DEFAULT_RATE_BOUND))
        if kind == "open_loop":
            return cls.open_loop(data["rates"], bound)
        if kind == "feedback":
            return cls.feedback(data["coeffs"], bound)
        comps = [cls.from_dict(c) for c in data["components"]]
        return cls.mixture(comps, data["weights"], bound)

    def __eq__(self, other):
        return isinstance(other, StrategyParams) and self.to_dict() == other.to_dict()


@dataclass
class WealthOutcome:
    terminal_money: float
    terminal_inventory: float
    bound: float
    max_abs_rate: float
    friction_paid: float
    rates: np.ndarray = field(repr=False)
    money: np.ndarray = field(repr=False)
    inventory: np.ndarray = field(repr=False)


@dataclass
class PathOutcomes:
    """Terminal quantities for a batch of paths (arrays of shape ``(n_paths,)``)."""

    terminal_money: np.ndarray
    terminal_inventory: np.ndarray
    bound: np.ndarray
    max_abs_rate: np.ndarray
    friction_paid: np.ndarray
    rates: np.ndarray = field(repr=False)  # (n_paths, n_steps)


def _select_component(weights: np.ndarray, u):
    """Index of the mixture component picked by ``u``, and ``u`` rescaled within that block."""
    cum = np.cumsum(weights)
    cum[-1] = 1.0
    idx = np.minimum(np.searchsorted(cum, u, side="right"), len(weights) - 1)
    lower = np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)
    w = weights[idx]
    with np.errstate(divide="ignore", invalid="ignore"):
        inner = np.where(w > 0, (u - lower) / np.where(w > 0, w, 1.0), 0.0)
    return idx, np.clip(inner, 0.0, 1.0)


def evaluate_rate(params: StrategyParams, k: int, s_k: float, inv_k: float, u: float,
                  *, n_steps: int | None = None) -> float:
    """Rate emitted on cell ``k`` given the state observable at ``t_k``.

    ``n_steps`` is needed by feedback policies to form ``t_k``.
    """
    if not 0.0 <= u <= 1.0:
        raise ValueError("u must lie in [0, 1]")
    if params.kind == "randomized_mixture":
        idx, inner = _select_component(params.weights, u)
        comp = params.components[int(idx)]
        rate = evaluate_rate(comp, k, s_k, inv_k, float(inner), n_steps=n_steps)
    elif params.kind == "open_loop":
        rate = params.rates[k]
    else:
        if n_steps is None:
            raise ValueError("feedback policies need n_steps to form t_k")
        a0, a1, a2, a3 = params.coeffs
        rate = a0 + a1 * s_k + a2 * inv_k + a3 * k / n_steps
    return float(np.clip(rate, -params.rate_bound, params.rate_bound))


def unwind_start(n_steps: int) -> int:
    """First cell of the forced terminal unwind for state-dependent policies."""
    return n_steps - math.ceil(n_steps / 8)


def _path_rates(params: StrategyParams, s_left: np.ndarray, u: np.ndarray, z1: float,
                unwind: bool) -> np.ndarray:
    n_paths, n = s_left.shape
    bound = params.rate_bound
    if params.kind == "open_loop":
        if params.rates.size != n:
            raise ValueError(f"strategy has {params.rates.size} rates but the grid has {n} cells")
        return np.broadcast_to(np.clip(params.rates, -bound, bound), (n_paths, n)).copy()
    if params.kind == "randomized_mixture":
        idx, inner = _select_component(params.weights, u)
        out = np.empty((n_paths, n))
        for i, comp in enumerate(params.components):
            mask = idx == i
            if mask.any():
                out[mask] = _path_rates(comp, s_left[mask], inner[mask], z1, unwind)
        return out
    a0, a1, a2, a3 = params.coeffs
    dt = 1.0 / n
    k0 = unwind_start(n) if unwind else n
    out = np.empty((n_paths, n))
    inv = np.full(n_paths, float(z1))
    unwind_rate = None
    for k in range(n):
        if k >= k0:
            if unwind_rate is None:
                # exempt from the clamp so that liquidation is exact
                unwind_rate = -inv / ((n - k0) * dt)
            r = unwind_rate
        else:
            r = np.clip(a0 + a1 * s_left[:, k] + a2 * inv + a3 * k * dt, -bound, bound)
        out[:, k] = r
        inv = inv + r * dt
    return out


def simulate_paths(params: StrategyParams, prices: np.ndarray, spec: FrictionSpec, u=0.5,
                   z0: float = 0.0, z1: float = 0.0, unwind: bool = True,
                   h_left: np.ndarray | None = None, bound: np.ndarray | None = None) -> PathOutcomes:
    """Simulate a strategy on every row of ``prices`` (shape ``(n_paths, n_steps + 1)``).

    ``u`` is a scalar or one draw per path.  ``h_left`` and ``bound`` may be
    passed precomputed when the same scenarios are reused many times.
    """
    prices = np.atleast_2d(np.asarray(prices, dtype=float))
    n_paths, n = prices.shape[0], prices.shape[1] - 1
    u = np.broadcast_to(np.asarray(u, dtype=float), (n_paths,))
    if np.any((u < 0) | (u > 1)):
        raise ValueError("randomization draws must lie in [0, 1]")
    s_left = prices[:, :-1]
    if h_left is None:
        h_left = spec.h(s_left)
    if bound is None:
        bound = market_bounds(prices, spec)
    rates = _path_rates(params, s_left, u, z1, unwind)
    friction = (h_left * np.abs(rates) ** spec.alpha).sum(axis=1) / n
    spent = (rates * s_left).sum(axis=1) / n
    return PathOutcomes(
        terminal_money=z0 - spent - friction,
        terminal_inventory=z1 + rates.sum(axis=1) / n,
        bound=np.asarray(bound, dtype=float),
        max_abs_rate=np.abs(rates).max(axis=1),
        friction_paid=friction,
        rates=rates,
    )


def simulate_wealth(params: StrategyParams, price: PricePath, spec: FrictionSpec, u: float = 0.5,
                    z0: float = 0.0, z1: float = 0.0, unwind: bool = True) -> WealthOutcome:
    """Money and inventory along one price path.

    ``inventory[k+1] = inventory[k] + r_k dt`` and
    ``money[k+1] = money[k] - r_k s_k dt - H(s_k)|r_k|^alpha dt``.
    """
    n = price.grid.n_steps
    steps = params.n_steps()
    if steps is not None and steps != n:
        raise ValueError(f"strategy has {steps} cells but the price grid has {n}")
    out = simulate_paths(params, price.s[None, :], spec, u, z0, z1, unwind)
    rates = out.rates[0]
    dt = price.grid.dt
    s_left = price.s[:-1]
    money = np.empty(n + 1)
    money[0] = z0
    money[1:] = z0 - np.cumsum(rates * s_left * dt + spec.h(s_left) * np.abs(rates) ** spec.alpha * dt)
    inventory = np.empty(n + 1)
    inventory[0] = z1
    inventory[1:] = z1 + np.cumsum(rates * dt)
    return WealthOutcome(
        terminal_money=float(out.terminal_money[0]),
        terminal_inventory=float(out.terminal_inventory[0]),
        bound=float(out.bound[0]),
        max_abs_rate=float(out.max_abs_rate[0]),
        friction_paid=float(out.friction_paid[0]),
        rates=rates,
        money=money,
        inventory=inventory,
    )


def enforce_liquidation(rates, grid=None) -> np.ndarray:
    """Remove the time average so that the position traded over [0, 1] nets to zero."""
    rates = np.asarray(rates, dtype=float)
    if not np.all(np.isfinite(rates)):
        raise ValueError("rates must be finite")
    if grid is not None and rates.shape[-1] != grid.n_steps:
        raise ValueError("rates do not match the grid")
    return rates - rates.mean(axis=-1, keepdims=True)


def make_admissible(params: StrategyParams) -> StrategyParams:
    """Project open-loop parts onto zero-mean rate vectors inside the clamp box.

    The mean is removed first and the result is shrunk radially if it leaves
    ``[-M, M]``; shrinking preserves the zero mean.  Feedback policies are
    returned unchanged since the terminal unwind liquidates them.
    """
    if params.kind == "open_loop":
        r = enforce_liquidation(params.rates)
        peak = np.abs(r).max()
        if peak > params.rate_bound:
            r = r * (params.rate_bound / peak)
        return StrategyParams.open_loop(r, params.rate_bound)
    if params.kind == "randomized_mixture":
        return StrategyParams.mixture([make_admissible(c) for c in params.components],
                                      params.weights, params.rate_bound)
    return params


def cesaro_average(strategies) -> np.ndarray:
    """Cell-wise arithmetic mean of a sequence of open-loop rate vectors."""
    vectors = [np.asarray(s.rates if isinstance(s, StrategyParams) else s, dtype=float) for s in strategies]
    if not vectors:
        raise ValueError("cannot average an empty sequence of strategies")
    if len({v.shape for v in vectors}) != 1:
        raise ValueError("strategies must have equal lengths")
    return np.mean(np.stack(vectors), axis=0)

