"""Ranking and classification quality measures.

All functions are pure and operate on plain arrays: ``scores`` are real
valued predictions, ``labels`` are binary (1 = positive, 0 = negative).
Larger scores are interpreted as "more positive".
"""
from __future__ import annotations

import numpy as np

__all__ = [
    "confusion_metrics",
    "roc_auc",
    "average_precision",
    "ndcg",
    "mae",
    "rmse",
]


def _as_scores_labels(scores, labels):
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.ndim != 1 or y.shape != s.shape:
        raise ValueError("scores and labels must be 1-d arrays of equal length")
    if s.size == 0:
        raise ValueError("empty input")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    y = (y > 0).astype(np.int64)
    return s, y


def confusion_metrics(scores, labels, threshold: float) -> dict:
    """Accuracy, precision, recall and F-measure at a fixed threshold.

    A sample is classified positive iff ``score > threshold`` (strict).
    Precision, recall and F are defined as 0 when their denominator is 0.
    """
    if not np.isfinite(threshold):
        raise ValueError("threshold must be finite")
    s, y = _as_scores_labels(scores, labels)
    pred = s > threshold
    tp = int(np.sum(pred & (y == 1)))
    fp = int(np.sum(pred & (y == 0)))
    fn = int(np.sum(~pred & (y == 1)))
    tn = int(np.sum(~pred & (y == 0)))
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return {
        "accuracy": (tp + tn) / (tp + tn + fp + fn),
        "precision": precision,
        "recall": recall,
        "f_measure": f,
    }


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned their average rank."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def roc_auc(scores, labels) -> float:
    """Area under the ROC curve.

    Equals the Mann-Whitney statistic: the probability that a uniformly
    chosen positive outranks a uniformly chosen negative, ties counting 0.5.
    """
    s, y = _as_scores_labels(scores, labels)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("roc_auc needs at least one positive and one negative")
    ranks = _average_ranks(s)
    rank_sum = float(ranks[y == 1].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def average_precision(scores, labels) -> float:
    """Average precision over the score-descending ranking.

    Score ties are broken by stable input order.
    """
    s, y = _as_scores_labels(scores, labels)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise ValueError("average_precision needs at least one positive")
    order = np.argsort(-s, kind="stable")
    rel = y[order]
    hits = np.cumsum(rel)
    precision_at = hits / np.arange(1, rel.size + 1)
    return float(np.sum(precision_at * rel) / n_pos)


def ndcg(relevances_in_rank_order) -> float:
    """Normalized discounted cumulative gain of a ranked relevance list.

    DCG = rel(1) + sum_{t>=2} rel(t)/log2(t); the ideal ordering is the
    relevances sorted descending.
    """
    rel = np.asarray(relevances_in_rank_order, dtype=np.float64)
    if rel.ndim != 1 or rel.size == 0:
        raise ValueError("relevances must be a non-empty 1-d array")
    if np.any(rel < 0) or not np.all(np.isfinite(rel)):
        raise ValueError("relevances must be finite and non-negative")
    if not np.any(rel > 0):
        raise ValueError("all-zero relevance: ideal DCG is 0")
    discounts = np.ones(rel.size)
    if rel.size > 1:
        discounts[1:] = np.log2(np.arange(2, rel.size + 1))
    dcg = float(np.sum(rel / discounts))
    ideal = float(np.sum(np.sort(rel)[::-1] / discounts))
    return dcg / ideal


def mae(predictions, targets) -> float:
    """Mean absolute error."""
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if p.shape != t.shape or p.size == 0:
        raise ValueError("predictions and targets must be non-empty and aligned")
    return float(np.mean(np.abs(p - t)))


def rmse(predictions, targets) -> float:
    """Root mean squared error."""
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if p.shape != t.shape or p.size == 0:
        raise ValueError("predictions and targets must be non-empty and aligned")
    return float(np.sqrt(np.mean((p - t) ** 2)))
