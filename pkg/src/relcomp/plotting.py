"""Figures for the analysis commands, written next to their CSV output."""
from __future__ import annotations

from pathlib import Path
from typing import Mapping

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .analysis import SparsityCurve  # noqa: E402

_STYLE = {"pairdiff": "o-", "concat": "s--", "add": "^-.", "mult": "D:"}


def _finish(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_sparsity(curve: SparsityCurve, path, title: str = "Average sparsity of relation vectors"):
    fig, ax = plt.subplots(figsize=(6, 4))
    for op, vals in curve.values.items():
        ax.plot(curve.epsilon_grid, vals, _STYLE.get(op, "o-"), label=op)
    ax.set_xlabel("epsilon")
    ax.set_ylabel("mean sparsity")
    ax.set_ylim(-0.02, 1.02)
    ax.set_title(title)
    ax.legend()
    return _finish(fig, path)


def plot_norms(norms: Mapping[str, Mapping[int, float]], path,
               title: str = "Average l2 norm of relation vectors"):
    """``norms`` maps operator -> {dimensionality: mean norm}."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for op, by_dim in norms.items():
        dims = sorted(by_dim)
        ax.plot(dims, [by_dim[d] for d in dims], _STYLE.get(op, "o-"), label=op)
    ax.set_xlabel("input dimensionality")
    ax.set_ylabel("mean l2 norm")
    ax.set_title(title)
    ax.legend()
    return _finish(fig, path)


def plot_asymmetry(acc: Mapping[str, float], path, symmetric=(), title: str = "Direction classification accuracy"):
    labels = list(acc)
    fig, ax = plt.subplots(figsize=(max(6, 0.45 * len(labels) + 2), 4))
    colors = ["tab:orange" if lab in symmetric else "tab:blue" for lab in labels]
    ax.bar(range(len(labels)), [acc[k] for k in labels], color=colors)
    ax.axhline(0.5, color="grey", lw=0.8, ls="--")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=60, ha="right", fontsize=8)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("5-fold CV accuracy")
    ax.set_title(title)
    return _finish(fig, path)
