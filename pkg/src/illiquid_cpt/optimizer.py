"""Population search for the CPT-optimal liquidating strategy on frozen scenarios.

Every candidate of a run is scored on the same scenario set (common random
numbers), so comparisons between candidates are not blurred by resampling
noise.  The proposal is a diagonal Gaussian refitted to the elite fraction
each generation, cross-entropy style, and the Cesaro average of the elites
is tried as an extra candidate.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .cpt import CPTSpec, bootstrap_std_error, cpt_components
from .frictions import FrictionSpec, market_bounds, strategy_moment_diagnostic
from .market import MarketModel, TimeGrid, sample_driving_paths, uniform_draws
from .portfolio import (DEFAULT_RATE_BOUND, PathOutcomes, StrategyParams, cesaro_average,
                        make_admissible, simulate_paths)

log = logging.getLogger(__name__)


class OptimizationError(RuntimeError):
    pass


@dataclass(frozen=True)
class Problem:
    market: MarketModel
    friction: FrictionSpec
    cpt: CPTSpec
    grid: TimeGrid
    n_paths: int = 1024
    z0: float = 0.0
    z1: float = 0.0


@dataclass(frozen=True)
class OptimizerSettings:
    strategy_kind: str = "open_loop"
    component_kind: str = "open_loop"
    n_components: int = 2
    rate_bound: float = DEFAULT_RATE_BOUND
    population: int = 64
    elite_fraction: float = 0.125
    generations: int = 200
    init_spread: float = 1.0
    spread_floor: float = 1e-6
    collapse_tol: float = 1e-5
    smoothing: float = 0.3
    restarts: int = 1
    workers: int = 1
    n_bootstrap: int = 200

    def __post_init__(self):
        if self.population < 2:
            raise ValueError("population must be at least 2")
        if not 0 < self.elite_fraction <= 1:
            raise ValueError("elite_fraction must lie in (0, 1]")
        if not 0 < self.smoothing <= 1:
            raise ValueError("smoothing must lie in (0, 1]")
        if self.generations < 1 or self.restarts < 1:
            raise ValueError("generations and restarts must be positive")
        if self.init_spread <= 0 or self.spread_floor <= 0:
            raise ValueError("spreads must be positive")

    @property
    def n_elite(self) -> int:
        return max(1, int(math.ceil(self.elite_fraction * self.population)))


@dataclass
class ScenarioSet:
    """Frozen scenarios: price paths, benchmarks and randomization draws."""

    grid: TimeGrid
    base_seed: int
    prices: np.ndarray = field(repr=False)     # (n_paths, n_steps + 1)
    benchmark: np.ndarray = field(repr=False)  # (n_paths,)
    u: np.ndarray = field(repr=False)          # (n_paths,)
    h_left: np.ndarray = field(repr=False)
    bound: np.ndarray = field(repr=False)

    @property
    def n_paths(self) -> int:
        return self.prices.shape[0]


def build_scenarios(market: MarketModel, friction: FrictionSpec, grid: TimeGrid, n_paths: int,
                    base_seed: int) -> ScenarioSet:
    values = sample_driving_paths(market.process, grid, base_seed, n_paths)
    prices = market.price_map(values[..., 0])
    h_left = friction.h(prices[:, :-1])
    if np.any(h_left <= 0):
        raise ValueError("H must be positive along every scenario path")
    return ScenarioSet(
        grid=grid,
        base_seed=base_seed,
        prices=prices,
        benchmark=market.benchmark.evaluate(prices),
        u=uniform_draws(base_seed, n_paths),
        h_left=h_left,
        bound=market_bounds(prices, friction),
    )


def simulate_on(params: StrategyParams, scenarios: ScenarioSet, friction: FrictionSpec,
                z0: float = 0.0, z1: float = 0.0) -> PathOutcomes:
    return simulate_paths(params, scenarios.prices, friction, scenarios.u, z0, z1,
                          h_left=scenarios.h_left, bound=scenarios.bound)


def objective_sample(params: StrategyParams, scenarios: ScenarioSet, friction: FrictionSpec,
                     z0: float = 0.0, z1: float = 0.0) -> tuple[np.ndarray, PathOutcomes]:
    """Liquidating version of ``params`` simulated on every scenario; returns ``X1 - W``."""
    out = simulate_on(make_admissible(params), scenarios, friction, z0, z1)
    return out.terminal_money - scenarios.benchmark, out


def evaluate_objective(params: StrategyParams, scenarios: ScenarioSet, friction: FrictionSpec,
                       cpt: CPTSpec, z0: float = 0.0, z1: float = 0.0) -> float:
    sample, _ = objective_sample(params, scenarios, friction, z0, z1)
    if not np.all(np.isfinite(sample)):
        return -math.inf
    gains, losses = cpt_components(sample, cpt)
    return gains - losses


class StrategyCodec:
    """Flat parameter vectors <-> admissible ``StrategyParams``.

    Mixtures concatenate the component vectors followed by one logit per
    component; weights are the softmax of the logits.
    """

    def __init__(self, kind: str, n_steps: int, n_components: int = 2,
                 component_kind: str = "open_loop", rate_bound: float = DEFAULT_RATE_BOUND):
        if kind == "randomized_mixture" and component_kind == "randomized_mixture":
            raise ValueError("mixture components must be open_loop or feedback")
        self.kind = kind
        self.n_steps = n_steps
        self.n_components = n_components
        self.component_kind = component_kind
        self.rate_bound = rate_bound

    def _size(self, kind: str) -> int:
        return self.n_steps if kind == "open_loop" else 4

    @property
    def dim(self) -> int:
        if self.kind == "randomized_mixture":
            return self.n_components * (self._size(self.component_kind) + 1)
        return self._size(self.kind)

    def _decode_simple(self, kind: str, theta: np.ndarray) -> StrategyParams:
        if kind == "open_loop":
            return make_admissible(StrategyParams.open_loop(theta, self.rate_bound))
        return StrategyParams.feedback(theta, self.rate_bound)

    def decode(self, theta) -> StrategyParams:
        theta = np.asarray(theta, dtype=float)
        if self.kind != "randomized_mixture":
            return self._decode_simple(self.kind, theta)
        size = self._size(self.component_kind)
        k = self.n_components
        comps = [self._decode_simple(self.component_kind, theta[i * size:(i + 1) * size]) for i in range(k)]
        logits = theta[k * size:]
        z = np.exp(logits - logits.max())
        return StrategyParams.mixture(comps, z / z.sum(), self.rate_bound)

    def encode(self, params: StrategyParams) -> np.ndarray:
        def simple(p):
            return p.rates if p.kind == "open_loop" else p.coeffs
        if self.kind != "randomized_mixture":
            return np.array(simple(params), dtype=float)
        with np.errstate(divide="ignore"):
            logits = np.log(params.weights)
        logits = np.where(np.isfinite(logits), logits, -50.0)
        return np.concatenate([simple(c) for c in params.components] + [logits - logits.max()])


@dataclass
class OptimizationReport:
    best_params: StrategyParams
    best_value: float
    best_std_error: float
    v_plus: float
    v_minus: float
    value_trace: list[float]
    generation_best: list[float]
    moment_trace: list[float]
    spread_trace: list[float]
    cesaro_accepted: list[bool]
    slack_quantiles: dict[str, float]
    seed: int
    scenario_seed: int
    n_paths: int
    n_steps: int
    strategy_kind: str
    status: str
    wall_clock: float = 0.0
    outcomes: PathOutcomes | None = field(default=None, repr=False)
    sample: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_generations(self) -> int:
        return len(self.value_trace)

    def trace_rows(self) -> list[dict]:
        return [
            {"generation": g, "best_value": v, "generation_best": gb, "moment_diagnostic": m,
             "max_spread": s, "cesaro_accepted": int(c)}
            for g, (v, gb, m, s, c) in enumerate(zip(self.value_trace, self.generation_best,
                                                     self.moment_trace, self.spread_trace,
                                                     self.cesaro_accepted))
        ]

    def summary(self) -> dict:
        out = {
            "best_value": self.best_value,
            "best_std_error": self.best_std_error,
            "v_plus": self.v_plus,
            "v_minus": self.v_minus,
            "generations": self.n_generations,
            "status": self.status,
            "strategy_kind": self.strategy_kind,
            "n_paths": self.n_paths,
            "n_steps": self.n_steps,
            "seed": self.seed,
            "scenario_seed": self.scenario_seed,
        }
        out.update({f"slack_{k}": v for k, v in self.slack_quantiles.items()})
        return out


def _evaluate_many(codec, thetas, scenarios, problem, workers):
    def one(theta):
        params = codec.decode(theta)
        return params, evaluate_objective(params, scenarios, problem.friction, problem.cpt,
                                          problem.z0, problem.z1)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, thetas))
    return [one(t) for t in thetas]


def _search(problem: Problem, settings: OptimizerSettings, scenarios: ScenarioSet,
            rng: np.random.Generator, codec: StrategyCodec, init: np.ndarray):
    mean = codec.encode(codec.decode(init))
    spread = np.full(codec.dim, settings.init_spread)
    best_theta, best_val = None, -math.inf
    value_trace, gen_best, moments, spreads, cesaro_flags = [], [], [], [], []
    n_elite = settings.n_elite
    for gen in range(settings.generations):
        raw = mean + spread * rng.standard_normal((settings.population, codec.dim))
        evaluated = _evaluate_many(codec, raw, scenarios, problem, settings.workers)
        thetas = np.array([codec.encode(p) for p, _ in evaluated])
        values = np.array([v for _, v in evaluated])
        order = np.argsort(-values, kind="stable")
        elites = thetas[order[:n_elite]]
        top = order[0]
        if values[top] > best_val:
            best_val, best_theta = float(values[top]), thetas[top]
        # Cesaro average of the elites, kept only when it beats the running best
        avg = cesaro_average(list(elites))
        avg_params = codec.decode(avg)
        avg_val = evaluate_objective(avg_params, scenarios, problem.friction, problem.cpt,
                                     problem.z0, problem.z1)
        accepted = avg_val > best_val
        if accepted:
            best_val, best_theta = float(avg_val), codec.encode(avg_params)
        _, out = objective_sample(evaluated[top][0], scenarios, problem.friction, problem.z0, problem.z1)
        moments.append(strategy_moment_diagnostic(out.rates, scenarios.prices, problem.friction))
        mean = avg
        elite_std = elites.std(axis=0)
        spread = np.maximum(settings.smoothing * elite_std + (1 - settings.smoothing) * spread,
                            settings.spread_floor)
        value_trace.append(best_val)
        gen_best.append(float(values[top]))
        spreads.append(float(spread.max()))
        cesaro_flags.append(bool(accepted))
        if spread.max() < settings.collapse_tol:
            log.debug("spread collapsed after %d generations", gen + 1)
            break
    return best_theta, best_val, value_trace, gen_best, moments, spreads, cesaro_flags


def optimize(problem: Problem, settings: OptimizerSettings, seed: int,
             init: StrategyParams | None = None, scenarios: ScenarioSet | None = None) -> OptimizationReport:
    """Approximate the supremum of the CPT value over liquidating strategies."""
    started = time.perf_counter()
    codec = StrategyCodec(settings.strategy_kind, problem.grid.n_steps, settings.n_components,
                          settings.component_kind, settings.rate_bound)
    rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(2,)))
    init_theta = codec.encode(init) if init is not None else np.zeros(codec.dim)
    main = scenarios if scenarios is not None else build_scenarios(
        problem.market, problem.friction, problem.grid, problem.n_paths, seed)

    results = []
    for r in range(settings.restarts):
        # later restarts extend the seed counter so they see fresh scenarios
        scen = main if r == 0 else build_scenarios(problem.market, problem.friction, problem.grid,
                                                   main.n_paths, main.base_seed + r * main.n_paths)
        results.append(_search(problem, settings, scen, rng, codec, init_theta))

    finite = [res for res in results if res[0] is not None and math.isfinite(res[1])]
    if not finite:
        raise OptimizationError("no candidate produced a finite objective value within the budget")
    if len(finite) > 1:
        rescored = [evaluate_objective(codec.decode(res[0]), main, problem.friction, problem.cpt,
                                       problem.z0, problem.z1) for res in finite]
        chosen = finite[int(np.argmax(rescored))]
    else:
        chosen = finite[0]
    best_theta, _, value_trace, gen_best, moments, spreads, flags = chosen

    best = codec.decode(best_theta)
    sample, out = objective_sample(best, main, problem.friction, problem.z0, problem.z1)
    gains, losses = cpt_components(sample, problem.cpt)
    se = bootstrap_std_error(sample, problem.cpt, settings.n_bootstrap, seed)
    slack = out.bound - out.terminal_money
    quantiles = {name: float(np.quantile(slack, q)) for name, q in
                 (("min", 0.0), ("q05", 0.05), ("median", 0.5), ("q95", 0.95), ("max", 1.0))}
    status = "collapsed" if spreads and spreads[-1] < settings.collapse_tol else "budget"
    return OptimizationReport(
        best_params=best,
        best_value=gains - losses,
        best_std_error=se,
        v_plus=gains,
        v_minus=losses,
        value_trace=value_trace,
        generation_best=gen_best,
        moment_trace=moments,
        spread_trace=spreads,
        cesaro_accepted=flags,
        slack_quantiles=quantiles,
        seed=int(seed),
        scenario_seed=main.base_seed,
        n_paths=main.n_paths,
        n_steps=problem.grid.n_steps,
        strategy_kind=settings.strategy_kind,
        status=status,
        wall_clock=time.perf_counter() - started,
        outcomes=out,
        sample=sample,
    )


@dataclass
class ComparisonReport:
    randomized: OptimizationReport
    deterministic: OptimizationReport

    @property
    def difference(self) -> float:
        return self.randomized.best_value - self.deterministic.best_value

    @property
    def pooled_std_error(self) -> float:
        return math.hypot(self.randomized.best_std_error, self.deterministic.best_std_error)

    def summary(self) -> dict:
        return {
            "randomized_value": self.randomized.best_value,
            "randomized_std_error": self.randomized.best_std_error,
            "deterministic_value": self.deterministic.best_value,
            "deterministic_std_error": self.deterministic.best_std_error,
            "difference": self.difference,
            "pooled_std_error": self.pooled_std_error,
        }


def compare_randomized(problem: Problem, settings: OptimizerSettings, seed: int) -> ComparisonReport:
    """Optimize with and without access to the randomization draw on identical scenarios."""
    scenarios = build_scenarios(problem.market, problem.friction, problem.grid, problem.n_paths, seed)
    component = settings.component_kind
    randomized = optimize(problem, replace(settings, strategy_kind="randomized_mixture"), seed,
                          scenarios=scenarios)
    deterministic = optimize(problem, replace(settings, strategy_kind=component), seed,
                             scenarios=scenarios)
    return ComparisonReport(randomized, deterministic)


def clamp_sweep(problem: Problem, settings: OptimizerSettings, seed: int,
                bounds=(10.0, 100.0, 1000.0)) -> list[OptimizationReport]:
    """Optimize under an escalating rate clamp; used to expose ill-posed configurations."""
    return [optimize(problem, replace(settings, rate_bound=float(m)), seed) for m in bounds]
