"""INI experiment configs: parsing, validation and normalized serialization."""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .cpt import CPTSpec, DistortionSpec, UtilitySpec
from .frictions import FrictionSpec
from .market import (BenchmarkSpec, MarketModel, PriceMapSpec, ProcessSpec, TimeGrid,
                     sample_driving_path)
from .optimizer import OptimizerSettings, Problem
from .portfolio import STRATEGY_KINDS


class ConfigError(ValueError):
    """Invalid config; the message names the offending ``section.key``."""


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "experiment"
    seed: int = 0
    n_steps: int = 64
    n_paths: int = 1024
    diagnostic_paths: int = 1024
    output_dir: str = "out"
    allow_ill_posed: bool = False
    market: MarketModel = field(default_factory=MarketModel)
    friction: FrictionSpec = field(default_factory=FrictionSpec)
    cpt: CPTSpec = field(default_factory=CPTSpec)
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    z0: float = 0.0
    z1: float = 0.0

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid(self.n_steps)

    def problem(self) -> Problem:
        return Problem(self.market, self.friction, self.cpt, self.grid, self.n_paths, self.z0, self.z1)


_RUN_KEYS = ("name", "seed", "n_steps", "n_paths", "diagnostic_paths", "output_dir", "allow_ill_posed")
_OPT_KEYS = ("population", "elite_fraction", "generations", "init_spread", "spread_floor",
             "collapse_tol", "smoothing", "restarts", "workers", "n_bootstrap")


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (tuple, list)):
        return ", ".join(_fmt(v) for v in value)
    return str(value)


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


class _Section:
    """Typed reads from one INI section with ``section.key`` error messages."""

    def __init__(self, parser: configparser.ConfigParser, name: str):
        self.name = name
        self.data = parser[name] if parser.has_section(name) else {}
        self.used: set[str] = set()

    def get(self, key, default, cast):
        if key not in self.data:
            return default
        self.used.add(key)
        raw = self.data[key]
        try:
            return cast(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{self.name}.{key}: cannot parse {raw!r} ({exc})") from None

    def check_unused(self):
        extra = set(self.data) - self.used
        if extra:
            raise ConfigError(f"{self.name}: unknown key(s) {', '.join(sorted(extra))}")


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def _build(section: str, factory, **kwargs):
    try:
        return factory(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{section}: {exc}") from None


def parse_config(text: str, allow_ill_posed: bool | None = None) -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.read_string(text)
    known = {"run", "process", "price_map", "benchmark", "friction", "u_plus", "u_minus",
             "w_plus", "w_minus", "wellposedness", "strategy", "optimizer"}
    unknown = set(parser.sections()) - known
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")
    sections = []

    def sec(name):
        s = _Section(parser, name)
        sections.append(s)
        return s

    d = ExperimentConfig()
    run = sec("run")
    run_kw = {
        "name": run.get("name", d.name, str),
        "seed": run.get("seed", d.seed, int),
        "n_steps": run.get("n_steps", d.n_steps, int),
        "n_paths": run.get("n_paths", d.n_paths, int),
        "diagnostic_paths": run.get("diagnostic_paths", d.diagnostic_paths, int),
        "output_dir": run.get("output_dir", d.output_dir, str),
        "allow_ill_posed": run.get("allow_ill_posed", d.allow_ill_posed, _bool),
    }
    if run_kw["seed"] < 0:
        raise ConfigError("run.seed: must be a nonnegative 64-bit integer")
    if run_kw["n_steps"] < 2:
        raise ConfigError("run.n_steps: must be at least 2")
    if run_kw["n_paths"] < 1 or run_kw["diagnostic_paths"] < 1:
        raise ConfigError("run.n_paths: path counts must be positive")

    p = sec("process")
    dp = ProcessSpec()
    process = _build("process", ProcessSpec,
                     kind=p.get("kind", dp.kind, str),
                     dimension=p.get("dimension", dp.dimension, int),
                     start=p.get("start", dp.start, _floats),
                     drift=p.get("drift", dp.drift, _floats),
                     volatility=p.get("volatility", dp.volatility, _floats),
                     jump_rate=p.get("jump_rate", dp.jump_rate, float),
                     jump_mean=p.get("jump_mean", dp.jump_mean, float),
                     jump_scale=p.get("jump_scale", dp.jump_scale, float))
    pm = sec("price_map")
    price_map = _build("price_map", PriceMapSpec, kind=pm.get("kind", "identity", str),
                       base=pm.get("base", 1.0, float), scale=pm.get("scale", 1.0, float))
    b = sec("benchmark")
    bench = _build("benchmark", BenchmarkSpec, kind=b.get("kind", "zero", str),
                   coefficient=b.get("coefficient", 0.0, float))

    f = sec("friction")
    friction = _build("friction", FrictionSpec,
                      alpha=f.get("alpha", 2.0, float),
                      h_kind=f.get("h_kind", "constant", str),
                      h_params=f.get("h_params", (1.0,), _floats),
                      beta=f.get("beta", None, float))

    def utility(name):
        s = sec(name)
        return _build(name, UtilitySpec, form=s.get("form", "power", str), c=s.get("c", 1.0, float),
                      delta=s.get("delta", 1.0, float), a=s.get("a", 1.0, float))

    def distortion(name):
        s = sec(name)
        return _build(name, DistortionSpec, form=s.get("form", "identity", str),
                      param=s.get("param", 1.0, float))

    u_plus, u_minus = utility("u_plus"), utility("u_minus")
    w_plus, w_minus = distortion("w_plus"), distortion("w_minus")
    wp = sec("wellposedness")
    dc = CPTSpec()
    cpt = _build("wellposedness", CPTSpec, u_plus=u_plus, u_minus=u_minus, w_plus=w_plus,
                 w_minus=w_minus,
                 c1=wp.get("c1", dc.c1, float), c2=wp.get("c2", dc.c2, float),
                 delta1=wp.get("delta1", dc.delta1, float), c3=wp.get("c3", dc.c3, float),
                 delta2=wp.get("delta2", dc.delta2, float))

    st = sec("strategy")
    do = OptimizerSettings()
    strat_kw = {
        "strategy_kind": st.get("kind", do.strategy_kind, str),
        "component_kind": st.get("component_kind", do.component_kind, str),
        "n_components": st.get("n_components", do.n_components, int),
        "rate_bound": st.get("rate_bound", do.rate_bound, float),
    }
    z0 = st.get("z0", 0.0, float)
    z1 = st.get("z1", 0.0, float)
    for key in ("strategy_kind", "component_kind"):
        if strat_kw[key] not in STRATEGY_KINDS:
            label = "kind" if key == "strategy_kind" else key
            raise ConfigError(f"strategy.{label}: must be one of {STRATEGY_KINDS}")
    if strat_kw["component_kind"] == "randomized_mixture":
        raise ConfigError("strategy.component_kind: mixture components must be open_loop or feedback")
    if strat_kw["n_components"] < 1:
        raise ConfigError("strategy.n_components: must be positive")
    if not strat_kw["rate_bound"] > 0:
        raise ConfigError("strategy.rate_bound: must be positive")

    o = sec("optimizer")
    opt_kw = {}
    for key in _OPT_KEYS:
        default = getattr(do, key)
        opt_kw[key] = o.get(key, default, type(default))
    optimizer = _build("optimizer", OptimizerSettings, **strat_kw, **opt_kw)

    for s in sections:
        s.check_unused()
    cfg = ExperimentConfig(**run_kw, market=MarketModel(process, price_map, bench), friction=friction,
                           cpt=cpt, optimizer=optimizer, z0=z0, z1=z1)
    if allow_ill_posed:
        cfg = replace(cfg, allow_ill_posed=True)
    validate(cfg)
    return cfg


def load_config(path, allow_ill_posed: bool | None = None) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, allow_ill_posed)


def validate(cfg: ExperimentConfig, allow_ill_posed: bool | None = None) -> None:
    """Cross-section checks run before any computation."""
    allow = cfg.allow_ill_posed if allow_ill_posed is None else allow_ill_posed
    fr = cfg.friction
    if not fr.alpha > 1:
        raise ConfigError("friction.alpha: alpha must exceed 1")
    if not 1 < fr.beta < fr.alpha:
        raise ConfigError("friction.beta: beta must satisfy 1 < beta < alpha")
    if not cfg.cpt.well_ordered and not allow and not cfg.cpt.is_concave_expected_utility():
        raise ConfigError("wellposedness.delta1: delta1 must exceed delta2 "
                          "(pass --allow-ill-posed to run the ill-posed demo)")
    if not fr.positive_on_all_prices() and not cfg.market.price_map.range_is_positive():
        process = cfg.market.process
        if not process.is_deterministic:
            raise ConfigError("friction.h_kind: H must be positive on the range of the price map; "
                              "use an exponential price map or a constant H")
        path = sample_driving_path(process, cfg.grid, 0)
        if np.any(fr.h(cfg.market.price_map(path.values[:, 0])) <= 0):
            raise ConfigError("friction.h_kind: H is not positive along the deterministic price path")
    if cfg.optimizer.strategy_kind == "open_loop" and cfg.n_steps < 2:
        raise ConfigError("run.n_steps: open-loop strategies need at least two cells")


def to_ini(cfg: ExperimentConfig) -> str:
    """Normalized INI text; ``parse_config(to_ini(cfg)) == cfg``."""
    m, fr, cpt, opt = cfg.market, cfg.friction, cfg.cpt, cfg.optimizer
    out: dict[str, dict] = {
        "run": {k: getattr(cfg, k) for k in _RUN_KEYS},
        "process": {
            "kind": m.process.kind, "dimension": m.process.dimension, "start": m.process.start,
            "drift": m.process.drift, "volatility": m.process.volatility,
            "jump_rate": m.process.jump_rate, "jump_mean": m.process.jump_mean,
            "jump_scale": m.process.jump_scale,
        },
        "price_map": {"kind": m.price_map.kind, "base": m.price_map.base, "scale": m.price_map.scale},
        "benchmark": {"kind": m.benchmark.kind, "coefficient": m.benchmark.coefficient},
        "friction": {"alpha": fr.alpha, "h_kind": fr.h_kind, "h_params": fr.h_params, "beta": fr.beta},
    }
    for name in ("u_plus", "u_minus"):
        u = getattr(cpt, name)
        out[name] = {"form": u.form, "c": u.c, "delta": u.delta, "a": u.a}
    for name in ("w_plus", "w_minus"):
        w = getattr(cpt, name)
        out[name] = {"form": w.form, "param": w.param}
    out["wellposedness"] = {k: getattr(cpt, k) for k in ("c1", "c2", "delta1", "c3", "delta2")}
    out["strategy"] = {"kind": opt.strategy_kind, "component_kind": opt.component_kind,
                       "n_components": opt.n_components, "rate_bound": opt.rate_bound,
                       "z0": cfg.z0, "z1": cfg.z1}
    out["optimizer"] = {k: getattr(opt, k) for k in _OPT_KEYS}
    lines = []
    for name, body in out.items():
        lines.append(f"[{name}]")
        lines.extend(f"{k} = {_fmt(v)}" for k, v in body.items())
        lines.append("")
    return "\n".join(lines)


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(to_ini(cfg).encode("utf-8")).hexdigest()


def with_overrides(cfg: ExperimentConfig, seed: int | None = None, output_dir: str | None = None,
                   allow_ill_posed: bool | None = None) -> ExperimentConfig:
    changes = {}
    if seed is not None:
        changes["seed"] = int(seed)
    if output_dir is not None:
        changes["output_dir"] = str(output_dir)
    if allow_ill_posed:
        changes["allow_ill_posed"] = True
    return replace(cfg, **changes) if changes else cfg

