"""SVG chart rendering for the experiment artifacts.

Charts are written next to the CSV data they visualize. Output is
byte-deterministic: a fixed hash salt replaces matplotlib's randomized
element ids and the date metadata is suppressed.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .gridworld import ACTIONS, GridSpec  # noqa: E402

_RC = {
    "svg.hashsalt": "gridbandit",
    "figure.figsize": (7.0, 4.2),
    "axes.grid": True,
    "grid.alpha": 0.3,
}


def _save(fig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def _stamp(fig, digest: str) -> None:
    if digest:
        fig.text(0.99, 0.01, f"config {digest}", ha="right", va="bottom",
                 fontsize=6, color="0.4")


def render_loss(curves: dict[str, tuple], path, digest: str = "") -> Path:
    """Loss-vs-step line chart; ``curves`` maps a series label to (t, mean)."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for label, (t, mean) in curves.items():
            ax.plot(t, mean, label=label, linewidth=1.0)
        ax.set_xlabel("time step")
        ax.set_ylabel("average loss")
        ax.legend()
        _stamp(fig, digest)
        return _save(fig, path)


def render_valid_rate(series: dict[str, tuple], path, digest: str = "",
                      xlabel: str = "time step") -> Path:
    """Valid-selection-rate chart; ``series`` maps a label to (x, rate)."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for label, (x, rate) in series.items():
            ax.plot(x, rate, label=label, linewidth=1.0,
                    marker="o" if len(x) <= 20 else None, markersize=3)
        ax.set_xlabel(xlabel)
        ax.set_ylabel("valid selection rate")
        ax.set_ylim(0.0, 1.05)
        ax.legend()
        _stamp(fig, digest)
        return _save(fig, path)


def render_histogram(pair_counts, spec: GridSpec, path, digest: str = "") -> Path:
    """Bar chart of agent counts per pair, in canonical pair order."""
    counts = pair_counts.ravel()
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        ax.bar(range(counts.size), counts, width=0.9)
        ax.set_xlabel(f"state-action pair (cells row-major, actions {'/'.join(a.name.lower() for a in ACTIONS)})")
        ax.set_ylabel("agents choosing the pair")
        ax.set_xticks(range(0, counts.size + 1, 4 * max(1, spec.width)))
        _stamp(fig, digest)
        return _save(fig, path)
