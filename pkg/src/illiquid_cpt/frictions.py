"""Instantaneous price-impact penalty ``H(s)|x|^alpha``, its convex conjugate and diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .market import MarketModel, TimeGrid, PricePath, sample_driving_paths

H_KINDS = ("constant", "linear_in_price", "affine_positive")


@dataclass(frozen=True)
class FrictionSpec:
    """Penalty ``g(s, x) = H(s) |x|^alpha`` for trading at rate ``x`` when the price is ``s``.

    ``h_kind`` selects ``H``: ``constant`` is ``lam``, ``linear_in_price`` is
    ``lam * s`` and ``affine_positive`` is ``a + b * s`` with ``a > 0, b >= 0``.
    ``beta`` is the exponent used by the moment diagnostics; it defaults to the
    midpoint of ``(1, alpha)``.
    """

    alpha: float = 2.0
    h_kind: str = "constant"
    h_params: tuple[float, ...] = (1.0,)
    beta: float | None = None

    def __post_init__(self):
        if not math.isfinite(self.alpha) or self.alpha <= 1:
            raise ValueError("alpha must exceed 1")
        if self.h_kind not in H_KINDS:
            raise ValueError(f"h_kind must be one of {H_KINDS}, got {self.h_kind!r}")
        params = tuple(float(p) for p in np.atleast_1d(self.h_params))
        if not all(math.isfinite(p) for p in params):
            raise ValueError("h_params must be finite")
        need = 2 if self.h_kind == "affine_positive" else 1
        if len(params) != need:
            raise ValueError(f"h_kind {self.h_kind!r} takes {need} parameter(s)")
        if self.h_kind == "affine_positive":
            if params[0] <= 0 or params[1] < 0:
                raise ValueError("affine_positive H needs a > 0 and b >= 0")
        elif params[0] <= 0:
            raise ValueError("H coefficient must be positive")
        object.__setattr__(self, "h_params", params)
        beta = (1.0 + self.alpha) / 2.0 if self.beta is None else float(self.beta)
        if not 1.0 < beta < self.alpha:
            raise ValueError("beta must satisfy 1 < beta < alpha")
        object.__setattr__(self, "beta", beta)

    @property
    def gamma(self) -> float:
        return self.beta / (self.beta - 1.0)

    def h(self, s):
        s = np.asarray(s, dtype=float)
        if self.h_kind == "constant":
            return np.full(s.shape, self.h_params[0])
        if self.h_kind == "linear_in_price":
            return self.h_params[0] * s
        a, b = self.h_params
        return a + b * s

    def positive_on_all_prices(self) -> bool:
        return self.h_kind == "constant" or (self.h_kind == "affine_positive" and self.h_params[1] == 0)


def _finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise ValueError("inputs must be finite")


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def friction_cost(s, x, spec: FrictionSpec):
    """Cost per unit time of trading at rate ``x`` at price ``s``."""
    s = np.asarray(s, dtype=float)
    x = np.asarray(x, dtype=float)
    _finite(s, x)
    return _out(spec.h(s) * np.abs(x) ** spec.alpha)


def _conjugate(h, y, alpha):
    coef = (alpha - 1.0) / alpha * alpha ** (1.0 / (1.0 - alpha))
    return coef * h ** (1.0 / (1.0 - alpha)) * np.abs(y) ** (alpha / (alpha - 1.0))


def conjugate_cost(s, y, spec: FrictionSpec):
    """``sup_x (x*y - H(s)|x|^alpha)`` in closed form."""
    s = np.asarray(s, dtype=float)
    y = np.asarray(y, dtype=float)
    _finite(s, y)
    h = spec.h(s)
    if np.any(h <= 0):
        raise ValueError("H(s) must be positive for the conjugate to be finite")
    return _out(_conjugate(h, y, spec.alpha))


def market_bounds(prices: np.ndarray, spec: FrictionSpec) -> np.ndarray:
    """Market bound for every row of ``prices`` with shape ``(..., n_steps + 1)``."""
    prices = np.asarray(prices, dtype=float)
    left = prices[..., :-1]
    n = left.shape[-1]
    return np.asarray(conjugate_cost(left, -left, spec)).sum(axis=-1) / n


def market_bound(price: PricePath, spec: FrictionSpec) -> float:
    """Pathwise ceiling on terminal cash of any strategy trading on this path."""
    return float(market_bounds(price.s, spec))


@dataclass
class MomentReport:
    """Monte Carlo moment estimate together with its estimates over doubling path counts."""

    name: str
    estimate: float
    std_error: float
    n_paths: int
    doubling: list[tuple[int, float, float]] = field(default_factory=list)
    status: str = "OK"

    def rows(self) -> list[dict]:
        return [
            {"diagnostic": self.name, "n_paths": n, "estimate": est, "std_error": se,
             "status": self.status if n == self.n_paths else ""}
            for n, est, se in self.doubling
        ]


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    n = values.size
    mean = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return mean, se


def stabilization_report(name: str, per_path: np.ndarray, levels: int = 4) -> MomentReport:
    """Estimate from ``per_path`` plus prefix estimates at n/2^j.

    Flags WARN when the estimate is not finite, or when it increases at every
    doubling and the final increase exceeds three standard errors, the usual
    symptom of a moment that does not exist.
    """
    per_path = np.asarray(per_path, dtype=float)
    n = per_path.size
    counts = sorted({max(1, n >> j) for j in range(levels)})
    with np.errstate(invalid="ignore", over="ignore"):
        doubling = [(c, *_mean_se(per_path[:c])) for c in counts]
    est, se = doubling[-1][1], doubling[-1][2]
    status = "OK"
    if not np.all(np.isfinite(per_path)):
        status = "WARN"
    elif len(doubling) >= 3:
        ests = [d[1] for d in doubling]
        growing = all(b > a for a, b in zip(ests, ests[1:]))
        jump = ests[-1] - ests[-2]
        if growing and jump > 3.0 * math.hypot(se, doubling[-2][2]):
            status = "WARN"
    return MomentReport(name, est, se, n, doubling, status)


def integrability_integrand(prices: np.ndarray, spec: FrictionSpec) -> np.ndarray:
    """Per-path left-endpoint integral of ``H^{b/(b-a)}(S)(1+|S|)^{b a/(a-b)}``."""
    prices = np.asarray(prices, dtype=float)
    left = prices[..., :-1]
    a, b = spec.alpha, spec.beta
    h = spec.h(left)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        vals = h ** (b / (b - a)) * (1.0 + np.abs(left)) ** (b * a / (a - b))
    return vals.sum(axis=-1) / left.shape[-1]


def integrability_diagnostic(market: MarketModel, friction: FrictionSpec, n_paths: int,
                             grid: TimeGrid, seed: int) -> MomentReport:
    values = sample_driving_paths(market.process, grid, seed, n_paths)
    prices = market.price_map(values[..., 0])
    return stabilization_report("integrability", integrability_integrand(prices, friction))


def strategy_moment_diagnostic(rates, prices, spec: FrictionSpec | float) -> float:
    """Monte Carlo estimate of ``E int |phi|^beta (1+|S|)^beta dt``.

    ``rates`` has shape ``(n_paths, n_steps)`` (or ``(n_steps,)`` for one
    path), ``prices`` shape ``(n_paths, n_steps + 1)``.  ``spec`` may be a
    bare beta.
    """
    beta = spec.beta if isinstance(spec, FrictionSpec) else float(spec)
    rates = np.atleast_2d(np.asarray(rates, dtype=float))
    prices = np.atleast_2d(np.asarray(prices, dtype=float))
    if prices.shape[-1] != rates.shape[-1] + 1:
        raise ValueError("rates and prices must share a grid")
    left = prices[..., :-1]
    per_path = (np.abs(rates) ** beta * (1.0 + np.abs(left)) ** beta).sum(axis=-1) / rates.shape[-1]
    return float(np.mean(per_path))
