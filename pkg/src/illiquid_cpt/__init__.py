"""Monte Carlo toolkit for CPT portfolio choice in markets with superlinear price impact."""

__version__ = "0.1.0"

from .cpt import CPTSpec, DistortionSpec, UtilitySpec, choquet_positive, cpt_value  # noqa: E402
from .frictions import FrictionSpec, conjugate_cost, friction_cost, market_bound  # noqa: E402
from .market import (BenchmarkSpec, MarketModel, PriceMapSpec, ProcessSpec, TimeGrid,  # noqa: E402
                     sample_driving_path)
from .optimizer import (OptimizerSettings, Problem, compare_randomized, evaluate_objective,  # noqa: E402
                        optimize)
from .portfolio import StrategyParams, enforce_liquidation, simulate_wealth  # noqa: E402
