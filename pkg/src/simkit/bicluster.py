"""Information-theoretic co-clustering of a contingency matrix.

Rows and columns are alternately reassigned to the cluster whose model
distribution is closest in Jensen-Shannon divergence; the row step can
blend in an external row-to-cluster distance. With no blending the mutual
information between row and column clusters is kept non-decreasing across
full sweeps (a sweep that would lower it is rolled back and the procedure
stops).
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Coclustering",
    "cocluster",
    "cluster_distance_features",
    "mutual_information",
    "save_coclustering",
]


@dataclass(frozen=True)
class Coclustering:
    """Row/column cluster maps plus the compressed joint distribution."""

    row_assign: np.ndarray
    col_assign: np.ndarray
    compressed_joint: np.ndarray  # (k, l), sums to 1
    mi_trace: np.ndarray
    n_sweeps: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        r = np.asarray(self.row_assign, dtype=np.int64)
        c = np.asarray(self.col_assign, dtype=np.int64)
        joint = np.asarray(self.compressed_joint, dtype=np.float64)
        k, l = joint.shape
        if r.size and (r.min() < 0 or r.max() >= k):
            raise ValueError("row cluster id out of range")
        if c.size and (c.min() < 0 or c.max() >= l):
            raise ValueError("column cluster id out of range")
        if abs(float(joint.sum()) - 1.0) > 1e-9:
            raise ValueError("compressed joint must sum to 1")
        for arr in (r, c, joint):
            arr.setflags(write=False)
        object.__setattr__(self, "row_assign", r)
        object.__setattr__(self, "col_assign", c)
        object.__setattr__(self, "compressed_joint", joint)
        object.__setattr__(self, "mi_trace", np.asarray(self.mi_trace, dtype=np.float64))

    @property
    def n_row_clusters(self) -> int:
        return int(self.compressed_joint.shape[0])

    @property
    def n_col_clusters(self) -> int:
        return int(self.compressed_joint.shape[1])

    @property
    def final_mi(self) -> float:
        return float(self.mi_trace[-1])


def _js_to_clusters(rows: np.ndarray, models: np.ndarray) -> np.ndarray:
    """JS divergence of every row distribution against every model row.

    rows: (n, m) distributions; models: (k, m) distributions -> (n, k).
    """
    P = rows[:, None, :]
    Q = models[None, :, :]
    M = 0.5 * (P + Q)
    with np.errstate(divide="ignore", invalid="ignore"):
        tp = np.where(P > 0, P * np.log(P / M), 0.0)
        tq = np.where(Q > 0, Q * np.log(Q / M), 0.0)
    return 0.5 * tp.sum(axis=2) + 0.5 * tq.sum(axis=2)


def mutual_information(joint: np.ndarray) -> float:
    """I(X;Y) in nats of a joint distribution matrix."""
    joint = np.asarray(joint, dtype=np.float64)
    px = joint.sum(axis=1)
    py = joint.sum(axis=0)
    outer = px[:, None] * py[None, :]
    mask = joint > 0
    return float(np.sum(joint[mask] * np.log(joint[mask] / outer[mask])))


def _compressed(P: np.ndarray, rx: np.ndarray, cy: np.ndarray, k: int, l: int) -> np.ndarray:
    R = np.zeros((P.shape[0], k))
    R[np.arange(P.shape[0]), rx] = 1.0
    C = np.zeros((P.shape[1], l))
    C[np.arange(P.shape[1]), cy] = 1.0
    return R.T @ P @ C


def _cluster_models(P_cond: np.ndarray, weights: np.ndarray, co_assign: np.ndarray,
                    phat: np.ndarray, axis: int) -> np.ndarray:
    """Structured cluster distributions q(y | xhat) (axis=0) or q(x | yhat) (axis=1).

    q(y | xhat) = p(y) * phat[xhat, yhat(y)] / (phat_x[xhat] * phat_y[yhat(y)]).
    """
    if axis == 0:
        mass = phat.sum(axis=1)  # p(xhat)
        co_mass = phat.sum(axis=0)  # p(yhat)
        block = phat
    else:
        mass = phat.sum(axis=0)
        co_mass = phat.sum(axis=1)
        block = phat.T
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(
            (mass[:, None] > 0) & (co_mass[None, :] > 0),
            block / (mass[:, None] * co_mass[None, :]),
            0.0,
        )
    # models: (clusters, items) = ratio looked up at each item's co-cluster, scaled by p(item)
    return ratio[:, co_assign] * weights[None, :]


def _minmax(A: np.ndarray) -> np.ndarray:
    lo, hi = float(A.min()), float(A.max())
    if hi - lo <= 0:
        return np.zeros_like(A)
    return (A - lo) / (hi - lo)


def _rescue_empty(assign: np.ndarray, n_clusters: int, js_matrix: np.ndarray) -> np.ndarray:
    """Move the items farthest (largest JS) from their own cluster into empty ones."""
    counts = np.bincount(assign, minlength=n_clusters)
    empties = np.nonzero(counts == 0)[0]
    if empties.size == 0:
        return assign
    assign = assign.copy()
    own_js = js_matrix[np.arange(assign.size), assign]
    order = np.argsort(-own_js, kind="stable")
    pos = 0
    for cluster in empties:
        while pos < order.size and counts[assign[order[pos]]] < 2:
            pos += 1
        if pos >= order.size:
            break
        item = order[pos]
        counts[assign[item]] -= 1
        assign[item] = cluster
        counts[cluster] += 1
        pos += 1
    return assign


def _canonicalize(assign: np.ndarray, n_clusters: int) -> tuple:
    """Relabel clusters by first occurrence; returns (new_assign, old_to_new)."""
    mapping = -np.ones(n_clusters, dtype=np.int64)
    nxt = 0
    for a in assign:
        if mapping[a] < 0:
            mapping[a] = nxt
            nxt += 1
    for c in range(n_clusters):  # clusters never seen go last, in id order
        if mapping[c] < 0:
            mapping[c] = nxt
            nxt += 1
    return mapping[assign], mapping


def cocluster(
    M,
    k: int,
    l: int,
    seed: int = 0,
    max_iter: int = 50,
    external_dist=None,
    w: float = 0.0,
) -> Coclustering:
    """Co-cluster a non-negative contingency matrix into k row and l column clusters.

    Rows move to the cluster minimizing the JS divergence between the row's
    conditional column distribution and the cluster's structured model
    distribution, optionally blended with ``w`` times the mean external
    distance to the cluster members (both terms min-max normalized per
    sweep); columns move symmetrically. Initial assignments are balanced
    and random per ``seed``; empty clusters are refilled with the worst
    matched items. Zero-count columns are dropped with a warning and end up
    in cluster 0. Cluster ids are canonicalized by first occurrence.
    """
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    if np.any(M < 0) or not np.all(np.isfinite(M)):
        raise ValueError("contingency matrix must be non-negative and finite")
    total = float(M.sum())
    if total <= 0:
        raise ValueError("contingency matrix must have positive total mass")
    n_rows, n_cols_all = M.shape
    if np.any(M.sum(axis=1) == 0):
        raise ValueError("zero-mass row: every instance needs at least one count")
    keep = np.nonzero(M.sum(axis=0) > 0)[0]
    if keep.size < n_cols_all:
        warnings.warn(
            f"dropping {n_cols_all - keep.size} zero-count column(s) before normalization",
            stacklevel=2,
        )
    if not 1 <= k <= n_rows:
        raise ValueError("k out of range")
    if not 1 <= l <= keep.size:
        raise ValueError("l out of range")
    if (w > 0) != (external_dist is not None):
        raise ValueError("external_dist must be provided exactly when w > 0")
    if external_dist is not None:
        external_dist = np.asarray(external_dist, dtype=np.float64)
        if external_dist.shape != (n_rows, n_rows):
            raise ValueError("external_dist must be a row-by-row matrix")

    Mk = M[:, keep]
    P = Mk / total
    p_row = P.sum(axis=1)
    p_col = P.sum(axis=0)
    rows_cond = P / p_row[:, None]
    cols_cond = (P / p_col[None, :]).T  # (m, n)
    n, m = P.shape

    rng = np.random.default_rng(seed)
    rx = np.arange(n) % k
    rng.shuffle(rx)
    cy = np.arange(m) % l
    rng.shuffle(cy)

    phat = _compressed(P, rx, cy, k, l)
    mi_trace = [mutual_information(phat)]
    loss_trace = []
    sweeps = 0
    for _ in range(max_iter):
        prev_rx, prev_cy, prev_phat = rx.copy(), cy.copy(), phat

        # row phase against frozen statistics
        models = _cluster_models(rows_cond, p_col, cy, phat, axis=0)
        js = _js_to_clusters(rows_cond, models)
        if w > 0:
            counts = np.bincount(rx, minlength=k).astype(np.float64)
            member = np.zeros((n, k))
            member[np.arange(n), rx] = 1.0
            with np.errstate(invalid="ignore", divide="ignore"):
                dmat = np.where(counts[None, :] > 0, (external_dist @ member) / counts[None, :], 0.0)
            objective = _minmax(js) + w * _minmax(dmat)
        else:
            objective = js
        rx = np.argmin(objective, axis=1)
        rx = _rescue_empty(rx, k, js)
        phat = _compressed(P, rx, cy, k, l)

        # column phase
        models = _cluster_models(cols_cond, p_row, rx, phat, axis=1)
        js_c = _js_to_clusters(cols_cond, models)
        cy = np.argmin(js_c, axis=1)
        cy = _rescue_empty(cy, l, js_c)
        phat = _compressed(P, rx, cy, k, l)

        mi = mutual_information(phat)
        if w == 0 and mi < mi_trace[-1] - 1e-12:
            rx, cy, phat = prev_rx, prev_cy, prev_phat
            break
        sweeps += 1
        mi_trace.append(mi)
        if w > 0:
            loss_trace.append(float(objective[np.arange(n), rx].sum()))
        if np.array_equal(rx, prev_rx) and np.array_equal(cy, prev_cy):
            break

    rx, row_map = _canonicalize(rx, k)
    cy, col_map = _canonicalize(cy, l)
    phat_canon = np.zeros_like(phat)
    phat_canon[row_map[:, None], col_map[None, :]] = phat

    # reinstate dropped columns deterministically in cluster 0
    full_cy = np.zeros(n_cols_all, dtype=np.int64)
    full_cy[keep] = cy
    return Coclustering(
        rx,
        full_cy,
        phat_canon,
        np.array(mi_trace),
        sweeps,
        meta={
            "k": k,
            "l": l,
            "w": w,
            "seed": seed,
            "dropped_columns": [int(c) for c in np.setdiff1d(np.arange(n_cols_all), keep)],
            "loss_trace": loss_trace,
        },
    )


def cluster_distance_features(M, clustering: Coclustering, x) -> np.ndarray:
    """JS divergences from a row's column distribution to every row-cluster centroid.

    The centroid of cluster j is the cluster-conditional column distribution
    of the training matrix. Output length equals the row-cluster count; all
    coordinates are bounded by ln 2.
    """
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (M.shape[1],):
        raise ValueError("x must have the matrix's column arity")
    if np.any(x < 0):
        raise ValueError("x must be non-negative")
    mass = float(x.sum())
    if mass <= 0:
        raise ValueError("zero-mass row")
    if clustering.row_assign.size != M.shape[0]:
        raise ValueError("clustering does not match the matrix rows")
    k = clustering.n_row_clusters
    centroids = np.zeros((k, M.shape[1]))
    for j in range(k):
        rows = clustering.row_assign == j
        if not np.any(rows):
            raise ValueError(f"row cluster {j} is empty")
        block = M[rows].sum(axis=0)
        centroids[j] = block / block.sum()
    return _js_to_clusters((x / mass)[None, :], centroids)[0]


def save_coclustering(clustering: Coclustering, rows_csv, cols_csv, meta_json) -> None:
    """Persist assignments as (id, cluster_id) CSVs plus a JSON meta file."""
    with open(rows_csv, "w") as fh:
        fh.write("row_id,cluster_id\n")
        for i, c in enumerate(clustering.row_assign):
            fh.write(f"{i},{int(c)}\n")
    with open(cols_csv, "w") as fh:
        fh.write("col_id,cluster_id\n")
        for i, c in enumerate(clustering.col_assign):
            fh.write(f"{i},{int(c)}\n")
    meta = {
        "k": clustering.n_row_clusters,
        "l": clustering.n_col_clusters,
        "w": clustering.meta.get("w", 0.0),
        "iterations": clustering.n_sweeps,
        "final_mi": clustering.final_mi,
    }
    with open(meta_json, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
