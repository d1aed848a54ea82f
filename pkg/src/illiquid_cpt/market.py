"""Driving processes, price maps and benchmarks on a uniform grid of [0, 1].

Paths are stored at the grid points and read with the right-continuous step
convention: the value at ``t_k`` holds on ``[t_k, t_{k+1})``.  Every pathwise
integral in the package is a left-endpoint Riemann sum over these values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

PROCESS_KINDS = ("brownian_drift", "jump_diffusion", "symmetric_binary")
PRICE_MAP_KINDS = ("exponential_of_first_coordinate", "affine_of_first_coordinate", "identity")
BENCHMARK_KINDS = ("zero", "constant", "terminal_price_multiple", "path_average_multiple")

# spawn keys separating the randomization stream from the path seeds
U_STREAM_KEY = (0x55,)


def _as_vector(value, dimension: int, name: str) -> tuple[float, ...]:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        arr = np.full(dimension, float(arr[0]))
    if arr.shape != (dimension,):
        raise ValueError(f"{name} must have length {dimension}, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return tuple(float(v) for v in arr)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform partition ``t_k = k / n_steps`` of [0, 1]."""

    n_steps: int

    def __post_init__(self):
        if int(self.n_steps) != self.n_steps or self.n_steps < 2:
            raise ValueError("n_steps must be an integer >= 2")

    @property
    def dt(self) -> float:
        return 1.0 / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) / self.n_steps


@dataclass(frozen=True)
class ProcessSpec:
    """Law of an m-dimensional process with independent increments.

    ``symmetric_binary`` moves each coordinate by ``drift*dt +/- vol*sqrt(dt)``
    with probability 1/2 each; it gives markets with finitely many outcomes.
    """

    kind: str = "brownian_drift"
    dimension: int = 1
    start: tuple[float, ...] | float = 0.0
    drift: tuple[float, ...] | float = 0.0
    volatility: tuple[float, ...] | float = 0.0
    jump_rate: float = 0.0
    jump_mean: float = 0.0
    jump_scale: float = 0.0

    def __post_init__(self):
        if self.kind not in PROCESS_KINDS:
            raise ValueError(f"process kind must be one of {PROCESS_KINDS}, got {self.kind!r}")
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise ValueError("dimension must be a positive integer")
        m = int(self.dimension)
        object.__setattr__(self, "dimension", m)
        for name in ("start", "drift", "volatility"):
            object.__setattr__(self, name, _as_vector(getattr(self, name), m, name))
        if min(self.volatility) < 0:
            raise ValueError("volatility entries must be nonnegative")
        for name in ("jump_rate", "jump_mean", "jump_scale"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, value)
        if self.jump_rate < 0:
            raise ValueError("jump_rate must be nonnegative")
        if self.jump_scale < 0:
            raise ValueError("jump_scale must be nonnegative")

    @property
    def is_deterministic(self) -> bool:
        no_jumps = self.kind != "jump_diffusion" or self.jump_rate == 0.0
        return max(self.volatility) == 0.0 and no_jumps


@dataclass(frozen=True)
class DrivingPath:
    grid: TimeGrid
    values: np.ndarray = field(repr=False)  # (n_steps + 1, m)


@dataclass(frozen=True)
class PricePath:
    grid: TimeGrid
    s: np.ndarray = field(repr=False)  # (n_steps + 1,)

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        if s.shape != (self.grid.n_steps + 1,):
            raise ValueError("price path length does not match the grid")
        if not np.all(np.isfinite(s)):
            raise ValueError("price path must be finite")
        object.__setattr__(self, "s", s)


@dataclass(frozen=True)
class PriceMapSpec:
    """Pointwise map from the first driving coordinate to the price.

    exponential: ``base * exp(scale * y)``; affine: ``base + scale * y``.
    """

    kind: str = "identity"
    base: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in PRICE_MAP_KINDS:
            raise ValueError(f"price map kind must be one of {PRICE_MAP_KINDS}, got {self.kind!r}")
        if not (math.isfinite(self.base) and math.isfinite(self.scale)):
            raise ValueError("price map parameters must be finite")
        if self.kind == "exponential_of_first_coordinate" and self.base <= 0:
            raise ValueError("exponential price map needs base > 0")

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        if self.kind == "exponential_of_first_coordinate":
            return self.base * np.exp(self.scale * y)
        if self.kind == "affine_of_first_coordinate":
            return self.base + self.scale * y
        return y.copy()

    def range_is_positive(self) -> bool:
        return self.kind == "exponential_of_first_coordinate"


@dataclass(frozen=True)
class BenchmarkSpec:
    kind: str = "zero"
    coefficient: float = 0.0

    def __post_init__(self):
        if self.kind not in BENCHMARK_KINDS:
            raise ValueError(f"benchmark kind must be one of {BENCHMARK_KINDS}, got {self.kind!r}")
        if not math.isfinite(self.coefficient):
            raise ValueError("benchmark coefficient must be finite")

    def evaluate(self, prices: np.ndarray) -> np.ndarray:
        """Benchmark for each row of ``prices`` (shape ``(..., n_steps + 1)``)."""
        prices = np.asarray(prices, dtype=float)
        shape = prices.shape[:-1]
        if self.kind == "zero":
            return np.zeros(shape)
        if self.kind == "constant":
            return np.full(shape, self.coefficient)
        if self.kind == "terminal_price_multiple":
            return self.coefficient * prices[..., -1]
        n = prices.shape[-1] - 1
        return self.coefficient * prices[..., :-1].sum(axis=-1) / n


@dataclass(frozen=True)
class MarketModel:
    """Everything needed to turn seeds into (price path, benchmark) scenarios."""

    process: ProcessSpec = field(default_factory=ProcessSpec)
    price_map: PriceMapSpec = field(default_factory=PriceMapSpec)
    benchmark: BenchmarkSpec = field(default_factory=BenchmarkSpec)


def _increments(spec: ProcessSpec, grid: TimeGrid, rng: np.random.Generator) -> np.ndarray:
    n, m, dt = grid.n_steps, spec.dimension, grid.dt
    drift = np.asarray(spec.drift) * dt
    vol = np.asarray(spec.volatility) * math.sqrt(dt)
    if spec.kind == "symmetric_binary":
        signs = 2.0 * rng.integers(0, 2, size=(n, m)) - 1.0
        return drift + vol * signs
    inc = drift + vol * rng.standard_normal((n, m))
    if spec.kind == "jump_diffusion":
        counts = rng.poisson(spec.jump_rate * dt, size=(n, m)).astype(float)
        # sum of `counts` iid normal jumps, aggregated at the grid point
        inc = inc + counts * spec.jump_mean + np.sqrt(counts) * spec.jump_scale * rng.standard_normal((n, m))
    return inc


def sample_driving_path(spec: ProcessSpec, grid: TimeGrid, seed: int) -> DrivingPath:
    """Draw one path of the driving process; the path is a pure function of the seed."""
    if seed < 0 or seed >= 2**64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    rng = np.random.default_rng(int(seed))
    inc = _increments(spec, grid, rng)
    values = np.empty((grid.n_steps + 1, spec.dimension))
    values[0] = spec.start
    np.cumsum(inc, axis=0, out=values[1:])
    values[1:] += values[0]
    return DrivingPath(grid, values)


def sample_driving_paths(spec: ProcessSpec, grid: TimeGrid, base_seed: int, n_paths: int) -> np.ndarray:
    """Stack of paths ``i = 0..n_paths-1`` drawn with seeds ``base_seed + i``.

    Returns an array of shape ``(n_paths, n_steps + 1, m)``.
    """
    out = np.empty((n_paths, grid.n_steps + 1, spec.dimension))
    for i in range(n_paths):
        out[i] = sample_driving_path(spec, grid, base_seed + i).values
    return out


def uniform_draws(base_seed: int, n_paths: int) -> np.ndarray:
    """Randomization draws U, one per scenario, from a stream independent of the path seeds.

    The stream is sequential, so the draws for ``n`` scenarios are a prefix of
    the draws for any larger count.
    """
    rng = np.random.default_rng(np.random.SeedSequence(int(base_seed), spawn_key=U_STREAM_KEY))
    return rng.random(n_paths)


def price_from_driving(path: DrivingPath, price_map: PriceMapSpec) -> PricePath:
    values = np.asarray(path.values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise ValueError("driving path must be finite")
    return PricePath(path.grid, price_map(values[:, 0]))


def benchmark_from_driving(path: DrivingPath, price_map: PriceMapSpec, bench: BenchmarkSpec) -> float:
    prices = price_from_driving(path, price_map).s
    return float(bench.evaluate(prices))
