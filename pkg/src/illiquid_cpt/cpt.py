"""Cumulative prospect theory value of Monte Carlo samples.

Gains and losses are valued separately by Choquet integrals
``int_0^inf w(P(u(X) >= y)) dy``.  For an empirical sample this integral is
a finite sum over the sorted utilities, which is what ``choquet_positive``
computes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

UTILITY_FORMS = ("power", "exp_saturating", "exp_growing")
DISTORTION_FORMS = ("identity", "power", "inverse_s")


@dataclass(frozen=True)
class UtilitySpec:
    """Utility on ``[0, inf)`` with ``u(0) = 0``.

    power          ``c * x**delta``
    exp_saturating ``c * (1 - exp(-a x))``
    exp_growing    ``c * (exp(a x) - 1)``

    Paired as ``u_plus = exp_saturating`` and ``u_minus = exp_growing`` with
    the same ``a`` and ``c``, the two sides form the exponential utility
    ``c * (1 - exp(-a x))`` on the whole real line.
    """

    form: str = "power"
    c: float = 1.0
    delta: float = 1.0
    a: float = 1.0

    def __post_init__(self):
        if self.form not in UTILITY_FORMS:
            raise ValueError(f"utility form must be one of {UTILITY_FORMS}, got {self.form!r}")
        for name in ("c", "delta", "a"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"utility parameter {name} must be positive")

    @property
    def concave(self) -> bool:
        return self.form == "exp_saturating" or (self.form == "power" and self.delta <= 1)

    @property
    def convex(self) -> bool:
        return self.form == "exp_growing" or (self.form == "power" and self.delta >= 1)

    def slope_at_zero(self) -> float:
        if self.form == "power":
            return math.inf if self.delta < 1 else self.c if self.delta == 1 else 0.0
        return self.c * self.a

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.form == "power":
            return self.c * x ** self.delta
        with np.errstate(over="ignore"):
            if self.form == "exp_saturating":
                return -self.c * np.expm1(-self.a * x)
            return self.c * np.expm1(self.a * x)


@dataclass(frozen=True)
class DistortionSpec:
    """Probability distortion ``w`` with ``w(0) = 0`` and ``w(1) = 1``.

    power      ``p**param``
    inverse_s  ``p**g / (p**g + (1-p)**g)**(1/g)`` with ``g = param`` in (0, 1]
    """

    form: str = "identity"
    param: float = 1.0

    def __post_init__(self):
        if self.form not in DISTORTION_FORMS:
            raise ValueError(f"distortion form must be one of {DISTORTION_FORMS}, got {self.form!r}")
        if not (math.isfinite(self.param) and self.param > 0):
            raise ValueError("distortion parameter must be positive")
        if self.form == "inverse_s" and self.param > 1:
            raise ValueError("inverse_s parameter must lie in (0, 1]")

    @property
    def is_identity(self) -> bool:
        return self.form == "identity" or self.param == 1.0

    def __call__(self, p):
        p = np.clip(np.asarray(p, dtype=float), 0.0, 1.0)
        if self.form == "identity":
            return p.copy()
        if self.form == "power":
            return p ** self.param
        g = self.param
        num = p ** g
        return num / (num + (1.0 - p) ** g) ** (1.0 / g)


@dataclass(frozen=True)
class CPTSpec:
    """Preferences plus the constants declared for the well-posedness certificate.

    The declared bounds are ``u_minus(x) >= c1 x**delta1 - c2`` and
    ``w_minus(p) >= c3 p**delta2``.
    """

    u_plus: UtilitySpec = field(default_factory=UtilitySpec)
    u_minus: UtilitySpec = field(default_factory=UtilitySpec)
    w_plus: DistortionSpec = field(default_factory=DistortionSpec)
    w_minus: DistortionSpec = field(default_factory=DistortionSpec)
    c1: float = 1.0
    c2: float = 0.0
    delta1: float = 1.0
    c3: float = 1.0
    delta2: float = 0.5

    def __post_init__(self):
        for name in ("c1", "c2", "delta1", "c3", "delta2"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.c1 <= 0 or self.c3 <= 0 or self.c2 < 0:
            raise ValueError("bound constants need c1 > 0, c3 > 0, c2 >= 0")
        if self.delta1 <= 0 or self.delta2 <= 0:
            raise ValueError("delta1 and delta2 must be positive")

    @property
    def well_ordered(self) -> bool:
        return self.delta1 > self.delta2

    def is_concave_expected_utility(self) -> bool:
        """No distortion and a concave signed utility ``u_plus(x)`` / ``-u_minus(-x)``."""
        return (self.w_plus.is_identity and self.w_minus.is_identity and self.u_plus.concave
                and self.u_minus.convex and self.u_plus.slope_at_zero() <= self.u_minus.slope_at_zero())

    def utility(self, x):
        """Signed utility ``u_plus(x)`` for gains and ``-u_minus(-x)`` for losses."""
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, self.u_plus(np.maximum(x, 0.0)), -self.u_minus(np.maximum(-x, 0.0)))


def _decision_weights(n: int, w: DistortionSpec) -> np.ndarray:
    # weight of the i-th smallest value: w((n-i+1)/n) - w((n-i)/n), i = 1..n
    levels = w(np.arange(n + 1) / n)
    return levels[n:0:-1] - levels[n - 1::-1]


def choquet_positive(sample, u: UtilitySpec, w: DistortionSpec) -> float:
    """Empirical Choquet integral of ``u(X)`` under the distortion ``w``, for ``X >= 0``."""
    x = np.asarray(sample, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("sample must be nonempty")
    if not np.all(np.isfinite(x)) or np.any(x < 0):
        raise ValueError("sample entries must be finite and nonnegative")
    v = np.sort(u(x))
    return float(np.dot(v, _decision_weights(v.size, w)))


def cpt_components(sample, spec: CPTSpec) -> tuple[float, float]:
    """``(V_plus(X^+), V_minus(X^-))`` for the empirical law of ``sample``."""
    x = np.asarray(sample, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("sample must be nonempty")
    if not np.all(np.isfinite(x)):
        raise ValueError("sample must be finite")
    gains = choquet_positive(np.maximum(x, 0.0), spec.u_plus, spec.w_plus)
    losses = choquet_positive(np.maximum(-x, 0.0), spec.u_minus, spec.w_minus)
    return gains, losses


def cpt_value(sample, spec: CPTSpec) -> float:
    gains, losses = cpt_components(sample, spec)
    return gains - losses


def bootstrap_std_error(sample, spec: CPTSpec, n_boot: int = 200, seed: int = 0) -> float:
    """Bootstrap standard error of ``cpt_value`` over resampled scenarios."""
    x = np.asarray(sample, dtype=float).ravel()
    if x.size < 2 or n_boot < 2:
        return 0.0
    rng = np.random.default_rng(seed)
    vals = np.array([cpt_value(x[rng.integers(0, x.size, x.size)], spec) for _ in range(n_boot)])
    return float(vals.std(ddof=1))


# ---------------------------------------------------------------------------
# well-posedness certificate
# ---------------------------------------------------------------------------

@dataclass
class CertificateReport:
    verdict: str
    checks: list[dict] = field(default_factory=list)

    def rows(self) -> list[dict]:
        return [dict(c) for c in self.checks]


def _utility_grid() -> np.ndarray:
    return np.concatenate([[0.0], np.logspace(-6, 6, 2401)])


def _probability_grid() -> np.ndarray:
    return np.unique(np.concatenate([np.linspace(0.0, 1.0, 10001), np.logspace(-12, 0, 2401)]))


def minorant_checks(spec: CPTSpec) -> list[dict]:
    """Dense-grid checks of the declared lower bounds on ``u_minus`` and ``w_minus``."""
    x = _utility_grid()
    with np.errstate(over="ignore", invalid="ignore"):
        lower = spec.c1 * x ** spec.delta1 - spec.c2
        slack = spec.u_minus(x) - lower
        rel = slack / (1.0 + np.abs(lower))
    u_ok = bool(np.all(np.nan_to_num(rel, nan=-1.0, posinf=1.0) >= -1e-12))
    p = _probability_grid()[1:]
    ratio = spec.w_minus(p) / p ** spec.delta2
    min_ratio = float(ratio.min())
    w_ok = bool(min_ratio >= spec.c3 * (1 - 1e-12))
    return [
        {"check": "delta_ordering", "verdict": "PASS" if spec.well_ordered else "FAIL",
         "value": spec.delta1 - spec.delta2,
         "detail": f"delta1={spec.delta1!r} delta2={spec.delta2!r}"},
        {"check": "u_minus_minorant", "verdict": "PASS" if u_ok else "FAIL",
         "value": float(np.nanmin(rel)), "detail": "min relative slack over x in [0, 1e6]"},
        {"check": "w_minus_minorant", "verdict": "PASS" if w_ok else "FAIL",
         "value": min_ratio, "detail": f"min w_minus(p)/p^delta2 vs c3={spec.c3!r}"},
    ]


def stabilized_value(name: str, values: np.ndarray, statistic, n_boot: int = 100,
                     seed: int = 0, levels: int = 4) -> dict:
    """Evaluate ``statistic`` on prefixes n/8, n/4, n/2, n with bootstrap errors.

    WARN when the estimate grows at every doubling and the last increase is
    larger than three standard errors, or when it is not finite.
    """
    values = np.asarray(values, dtype=float)
    n = values.size
    counts = sorted({max(1, n >> j) for j in range(levels)})
    rng = np.random.default_rng(seed)
    ests, ses = [], []
    for c in counts:
        sub = values[:c]
        ests.append(float(statistic(sub)))
        if c > 1:
            boots = [statistic(sub[rng.integers(0, c, c)]) for _ in range(n_boot)]
            ses.append(float(np.std(boots, ddof=1)))
        else:
            ses.append(0.0)
    verdict = "PASS"
    if not np.isfinite(ests[-1]):
        verdict = "WARN"
    elif len(ests) >= 3 and all(b > a for a, b in zip(ests, ests[1:])):
        if ests[-1] - ests[-2] > 3.0 * math.hypot(ses[-1], ses[-2]):
            verdict = "WARN"
    return {"check": name, "verdict": verdict, "value": ests[-1],
            "detail": "std_error=%r prefixes=%s" % (ses[-1], "/".join(f"{e:.6g}" for e in ests))}


def wellposedness_check(spec: CPTSpec, bound_minus_benchmark=None, benchmark=None,
                        n_boot: int = 100, seed: int = 0) -> CertificateReport:
    """PASS / WARN / FAIL certificate for the optimization problem.

    ``bound_minus_benchmark`` and ``benchmark`` are per-scenario samples of
    ``B - W`` and ``W``; when given, ``V_plus([B-W]^+)`` and ``E W^+`` are
    estimated with stabilization flags.
    """
    checks = minorant_checks(spec)
    concave = spec.is_concave_expected_utility()
    if concave:
        # expected utility with concave u only needs E|u(B - W)| < inf
        for c in checks:
            if c["verdict"] == "FAIL":
                c["verdict"] = "N/A"
                c["detail"] += " (not required: concave expected utility)"
        if bound_minus_benchmark is not None:
            util = spec.utility(np.asarray(bound_minus_benchmark, dtype=float))
            checks.append(stabilized_value("expected_abs_utility_bound", np.abs(util), np.mean,
                                           n_boot=n_boot, seed=seed + 2))
    if bound_minus_benchmark is not None:
        gap = np.maximum(np.asarray(bound_minus_benchmark, dtype=float), 0.0)
        if np.all(np.isfinite(gap)):
            checks.append(stabilized_value(
                "v_plus_bound", gap, lambda g: choquet_positive(g, spec.u_plus, spec.w_plus),
                n_boot=n_boot, seed=seed))
        else:
            checks.append({"check": "v_plus_bound", "verdict": "WARN", "value": math.inf,
                           "detail": "market bound not finite on every scenario"})
    if benchmark is not None:
        wplus = np.maximum(np.asarray(benchmark, dtype=float), 0.0)
        checks.append(stabilized_value("expected_benchmark_plus", wplus, np.mean,
                                       n_boot=n_boot, seed=seed + 1))
    verdicts = {c["verdict"] for c in checks}
    verdict = "FAIL" if "FAIL" in verdicts else "WARN" if "WARN" in verdicts else "PASS"
    return CertificateReport(verdict, checks)
