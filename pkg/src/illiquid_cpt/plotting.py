"""Matplotlib figures rendered next to the CSV series."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

golden_mean = (math.sqrt(5) - 1.0) / 2.0
fig_width = 6.0
colors = ["#08589e", "#2b8cbe", "#4eb3d3", "#7bccc4", "#a8ddb5"]

params = {
    "axes.prop_cycle": matplotlib.cycler(color=colors),
    "axes.labelsize": 10,
    "font.family": "sans-serif",
    "font.size": 9,
    "legend.fontsize": 8,
    "legend.frameon": False,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.figsize": [fig_width, fig_width * golden_mean],
    "figure.dpi": 100,
    "lines.linewidth": 1.2,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def _save(fig, path: Path) -> Path:
    # no Software/date metadata so reruns write identical files
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_value_trace(rows: list[dict], path: Path) -> Path:
    with matplotlib.rc_context(params):
        fig, ax = plt.subplots()
        if rows:
            gen = [int(r["generation"]) for r in rows]
            ax.plot(gen, [float(r["best_value"]) for r in rows], label="running best")
            if "generation_best" in rows[0]:
                ax.plot(gen, [float(r["generation_best"]) for r in rows], ls=":", label="generation best")
            ax2 = ax.twinx()
            ax2.plot(gen, [float(r["moment_diagnostic"]) for r in rows], color=colors[3], ls="--",
                     label="moment diagnostic")
            ax2.set_ylabel("strategy moment")
            ax.legend(loc="lower right")
        ax.set_xlabel("generation")
        ax.set_ylabel("CPT value")
        fig.tight_layout()
        return _save(fig, path)


def plot_survival(rows: list[dict], path: Path) -> Path:
    with matplotlib.rc_context(params):
        fig, ax = plt.subplots()
        if rows:
            x = np.array([float(r["x"]) for r in rows])
            ax.step(x, [float(r["survival"]) for r in rows], where="post", label="empirical survival")
            ax.step(x, [float(r["distorted_survival"]) for r in rows], where="post", ls="--",
                    label="distorted survival")
            ax.axvline(0.0, color="0.7", lw=0.8)
            ax.legend()
        ax.set_xlabel("terminal wealth minus benchmark")
        ax.set_ylabel("probability")
        fig.tight_layout()
        return _save(fig, path)


def plot_rates(strategy: dict, path: Path) -> Path:
    """Rate profiles of open-loop strategies (mixture components drawn separately)."""
    with matplotlib.rc_context(params):
        fig, ax = plt.subplots()
        parts = strategy.get("components", [strategy])
        weights = strategy.get("weights", [1.0])
        for i, (part, w) in enumerate(zip(parts, weights)):
            if part.get("kind") != "open_loop":
                continue
            rates = np.asarray(part["rates"])
            t = np.arange(rates.size + 1) / rates.size
            label = f"component {i} (w={w:.3f})" if len(parts) > 1 else "rate"
            ax.step(t, np.append(rates, rates[-1]), where="post", label=label)
        ax.axhline(0.0, color="0.7", lw=0.8)
        ax.set_xlabel("t")
        ax.set_ylabel("trading rate")
        if ax.get_legend_handles_labels()[0]:
            ax.legend()
        fig.tight_layout()
        return _save(fig, path)
