"""Independent reference computations used as test oracles.

None of these call into the package; they recompute each quantity from its
definition by brute force or by a closed form derived separately.
"""

from __future__ import annotations

from math import comb, exp

import numpy as np


def brute_conjugate(h, y, alpha, lo=-100.0, hi=100.0, n=20001, rounds=4):
    """``sup_x (x*y - h|x|^alpha)`` by grid search on ``[lo, hi]`` with zooming refinement.

    ``h``, ``y`` and ``alpha`` are arrays of equal length; the search is
    vectorized across them.
    """
    h, y, alpha = (np.asarray(v, dtype=float)[:, None] for v in (h, y, alpha))
    left = np.full(h.shape, lo)
    right = np.full(h.shape, hi)
    best = None
    for _ in range(rounds):
        x = left + (right - left) * np.linspace(0.0, 1.0, n)[None, :]
        f = x * y - h * np.abs(x) ** alpha
        i = f.argmax(axis=1)
        best = f[np.arange(f.shape[0]), i]
        step = (right - left) / (n - 1)
        centre = x[np.arange(x.shape[0]), i][:, None]
        left, right = centre - 2 * step, centre + 2 * step
    return best


def survival_oracle(values, w, y_max=None, n_grid=10**6):
    """Midpoint Riemann sum of ``int_0^ymax w(P(V >= y)) dy`` for a sample of ``V >= 0``."""
    v = np.sort(np.asarray(values, dtype=float))
    top = v[-1] if y_max is None else y_max
    if top <= 0:
        return 0.0
    dy = top / n_grid
    y = (np.arange(n_grid) + 0.5) * dy
    surv = 1.0 - np.searchsorted(v, y, side="left") / v.size
    return float(np.sum(w(surv)) * dy)


def lognormal_binomial_moment(mu, sigma, t, power=6):
    """``E (1 + exp(Y_t))^power`` for ``Y_t ~ N(mu t, sigma^2 t)`` via the binomial expansion."""
    return sum(comb(power, j) * exp(j * mu * t + 0.5 * j * j * sigma * sigma * t) for j in range(power + 1))


def hand_choquet(values, w):
    """Sorted-sum Choquet value written out term by term."""
    v = sorted(float(x) for x in values)
    n = len(v)
    total = 0.0
    for i in range(1, n + 1):
        total += v[i - 1] * (w((n - i + 1) / n) - w((n - i) / n))
    return total
