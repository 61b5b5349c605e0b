"""Figure rendering for report outputs.

Every report-producing CLI path drops PNG figures next to its delimited
output. Rendering is deterministic for fixed inputs (Agg backend, fixed
sizes, no timestamps) so figure bytes reproduce across runs.
"""
from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg", force=True)

import matplotlib.pyplot as plt  # noqa: E402  (backend must be fixed first)

import numpy as np

__all__ = [
    "plot_roc",
    "plot_trace",
    "plot_metric_bars",
    "render_report_figures",
]

_FIGSIZE = (6.0, 4.0)
_DPI = 110


def _save(fig, path) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def _roc_points(scores: np.ndarray, labels: np.ndarray) -> tuple:
    scores = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels) > 0
    order = np.argsort(-scores, kind="stable")
    y = y[order]
    n_pos = max(int(y.sum()), 1)
    n_neg = max(int((~y).sum()), 1)
    tpr = np.concatenate([[0.0], np.cumsum(y) / n_pos])
    fpr = np.concatenate([[0.0], np.cumsum(~y) / n_neg])
    return fpr, tpr


def plot_roc(scores_by_concept: dict, path) -> None:
    """Overlayed ROC curves, one per concept."""
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    for name, (scores, labels) in scores_by_concept.items():
        fpr, tpr = _roc_points(scores, labels)
        ax.plot(fpr, tpr, lw=1.5, label=str(name))
    ax.plot([0, 1], [0, 1], ls="--", lw=0.8, color="grey")
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.02)
    ax.legend(loc="lower right", fontsize=8)
    ax.set_title("ROC")
    _save(fig, path)


def plot_trace(values, ylabel: str, path, xlabel: str = "iteration") -> None:
    """Line plot of a per-iteration trace (log-likelihood, objective, MI...)."""
    values = np.asarray(values, dtype=np.float64)
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.plot(np.arange(values.size), values, marker="o", ms=3, lw=1.2)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(ylabel)
    _save(fig, path)


def plot_metric_bars(per_concept: dict, metric: str, path) -> None:
    """Bar chart of one metric across concepts."""
    names = list(per_concept)
    values = [per_concept[n][metric] for n in names]
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.bar(np.arange(len(names)), values, width=0.6)
    ax.set_xticks(np.arange(len(names)))
    ax.set_xticklabels(names, rotation=45, ha="right", fontsize=8)
    ax.set_ylabel(metric)
    ax.set_ylim(0, max(1.0, max(values) * 1.05) if values else 1.0)
    ax.set_title(f"per-concept {metric}")
    _save(fig, path)


def render_report_figures(out_dir, scores_by_concept: dict, per_concept: dict, metrics) -> None:
    """Standard report figures: ROC overlay plus a bar chart of the first ranking metric."""
    fig_dir = os.path.join(out_dir, "figures")
    binary = {
        name: (s, y)
        for name, (s, y) in scores_by_concept.items()
        if np.any(np.asarray(y) > 0) and np.any(np.asarray(y) <= 0)
    }
    if binary:
        plot_roc(binary, os.path.join(fig_dir, "roc.png"))
    bar_metric = next((m for m in metrics if m in ("auc", "ap", "accuracy", "f_measure")), None)
    if bar_metric is not None:
        plot_metric_bars(per_concept, bar_metric, os.path.join(fig_dir, "metrics.png"))
