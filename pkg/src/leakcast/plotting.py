"""SVG figures for the benchmark outputs (matplotlib, headless)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def bar_chart(labels, values, path, *, ylabel="RMSE", title=""):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.bar(range(len(labels)), values, color="0.4")
    ax.set_xticks(range(len(labels)), labels, rotation=30, ha="right")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    _save(fig, path)


def line_chart(x, series, path, *, xlabel="horizon", ylabel="RMSE", title=""):
    """``series`` maps a legend label to y values aligned with ``x``."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for label, ys in series.items():
        ax.plot(x, ys, marker="o", label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    if len(series) > 1:
        ax.legend(frameon=False)
    _save(fig, path)


def box_chart(groups, path, *, ylabel="value", title=""):
    """``groups`` maps a label to a sample of values."""
    labels = list(groups)
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.boxplot([groups[k] for k in labels])
    ax.set_xticks(range(1, len(labels) + 1), labels)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    _save(fig, path)


def scatter_chart(x, y, path, *, xlabel="", ylabel="", title=""):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.scatter(x, y, s=12, color="0.3")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    _save(fig, path)
