"""Similarity-kernel feature construction over per-modality distances.

An instance is described by its distances to a reference sample set under
one or more modality distance functions; the kernel feature for a column is
that distance standardized by the column's training mean and deviation
(closer than average to a sample gives a positive feature). The linear Gram
matrix of these features is the similarity kernel.
"""
from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DistanceSpec",
    "SampleSet",
    "StandardizationStats",
    "SimilarityFeatures",
    "energy_pairwise",
    "energy_class",
    "energy_multiagent",
    "gibbs_logdensity",
    "compute_distance_columns",
    "combine_class_columns",
    "fit_standardization",
    "standardize_columns",
    "similarity_features",
    "similarity_kernel_matrix",
    "uniform_representation",
    "fit_uniform_normalizer",
    "save_features",
    "load_features",
]


@dataclass(frozen=True)
class DistanceSpec:
    """A named modality with its distance function and optional scaling.

    ``fn`` receives the two instances' payloads for this modality (looked up
    by name when instances are mappings, else the instances themselves).
    """

    name: str
    fn: object
    scale: float = 1.0

    def __post_init__(self):
        if not self.name:
            raise ValueError("modality name must be non-empty")
        if not callable(self.fn):
            raise ValueError("distance fn must be callable")
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    def payload(self, instance):
        if isinstance(instance, dict):
            return instance[self.name]
        return instance

    def __call__(self, a, b) -> float:
        d = float(self.fn(self.payload(a), self.payload(b)))
        if not np.isfinite(d) or d < 0:
            raise ValueError(f"distance for modality {self.name!r} must be finite and non-negative")
        return self.scale * d


@dataclass(frozen=True)
class SampleSet:
    """Reference instances S plus optional labelled class representatives R."""

    samples: tuple
    representatives: tuple = ()
    representative_labels: tuple = ()

    def __post_init__(self):
        samples = tuple(self.samples)
        reps = tuple(self.representatives)
        labels = tuple(self.representative_labels)
        if not samples:
            raise ValueError("sample set S must be non-empty")
        if reps and len(labels) != len(reps):
            raise ValueError("each representative needs a class label")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "representatives", reps)
        object.__setattr__(self, "representative_labels", labels)

    @property
    def n_samples(self) -> int:
        return len(self.samples)

    @property
    def n_representatives(self) -> int:
        return len(self.representatives)


def _alpha_grid(alpha, shape, what: str) -> np.ndarray:
    a = np.asarray(alpha, dtype=np.float64)
    if a.size != shape[0] * shape[1]:
        raise ValueError(f"{what} hyperparameters must have {shape[0]}x{shape[1]} entries")
    return a.reshape(shape)


def energy_pairwise(x, samples, alpha, specs) -> float:
    """Energy of the pairwise similarity graph: sum_ik alpha_ik dist_k(x, s_i).

    ``alpha`` is (K, |S|) modality-major (flat input is reshaped that way).
    """
    samples = list(samples)
    specs = list(specs)
    if not samples or not specs:
        raise ValueError("samples and specs must be non-empty")
    a = _alpha_grid(alpha, (len(specs), len(samples)), "pairwise")
    total = 0.0
    for k, spec in enumerate(specs):
        for i, s in enumerate(samples):
            total += a[k, i] * spec(x, s)
    return total


def energy_class(x, samples, representatives, alpha, dist) -> float:
    """Energy of the class similarity graph.

    sum over representatives r_j and samples s_i of
    alpha_ij (dist(x, s_i) + dist(x, r_j) + dist(s_i, r_j));
    ``alpha`` is (|S|, |R|).
    """
    samples = list(samples)
    representatives = list(representatives)
    if not samples or not representatives:
        raise ValueError("samples and representatives must be non-empty")
    a = _alpha_grid(alpha, (len(samples), len(representatives)), "class")
    d_xs = [dist(x, s) for s in samples]
    d_xr = [dist(x, r) for r in representatives]
    total = 0.0
    for i, s in enumerate(samples):
        for j, r in enumerate(representatives):
            total += a[i, j] * (d_xs[i] + d_xr[j] + dist(s, r))
    return total


def energy_multiagent(x_tuple, cliques, alpha, tuple_dist, pair_dist) -> float:
    """Energy of the multi-agent similarity graph.

    Each clique c with weight alpha_c contributes the distances from the
    joint observation tuple to every clique member plus all intra-clique
    pairwise distances.
    """
    cliques = list(cliques)
    if not cliques:
        raise ValueError("no cliques configured")
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.shape != (len(cliques),):
        raise ValueError("one hyperparameter per clique required")
    total = 0.0
    for a_c, clique in zip(alpha, cliques):
        members = list(clique)
        if not members:
            raise ValueError("malformed clique: empty member list")
        u = sum(tuple_dist(x_tuple, m) for m in members)
        for j in range(len(members)):
            for l in range(j + 1, len(members)):
                u += pair_dist(members[j], members[l])
        total += a_c * u
    return total


def gibbs_logdensity(U: float, logZ: float) -> float:
    """Log density of the Gibbs distribution: -U - logZ."""
    if not (np.isfinite(U) and np.isfinite(logZ)):
        raise ValueError("U and logZ must be finite")
    return -float(U) - float(logZ)


# --------------------------------------------------------------------------
# distance columns and standardization
# --------------------------------------------------------------------------


def _pairwise_ids(specs, n_samples: int) -> tuple:
    return tuple(f"{spec.name}|s{i}" for spec in specs for i in range(n_samples))


def _class_ids(specs, n_samples: int, n_reps: int) -> tuple:
    return tuple(
        f"{spec.name}|s{i}|r{j}"
        for spec in specs
        for i in range(n_samples)
        for j in range(n_reps)
    )


def compute_distance_columns(instances, sample_set: SampleSet, specs, graph: str = "pairwise"):
    """Distance column matrix for the requested graph type.

    Pairwise columns hold dist_k(x, s_i), modality-major; class columns hold
    dist_k(x, s_i) + dist_k(x, r_j). (The constant dist(s_i, r_j) term of the
    class energy would shift each column mean only and vanish after
    standardization, so it is not materialized.) Returns (matrix, column_ids).
    """
    instances = list(instances)
    specs = list(specs)
    if not instances or not specs:
        raise ValueError("instances and specs must be non-empty")
    if graph not in ("pairwise", "class"):
        raise ValueError("graph must be 'pairwise' or 'class'")
    d_s = np.empty((len(instances), len(specs), sample_set.n_samples))
    for k, spec in enumerate(specs):
        for col, s in enumerate(sample_set.samples):
            for row, x in enumerate(instances):
                d_s[row, k, col] = spec(x, s)
    if graph == "pairwise":
        return d_s.reshape(len(instances), -1), _pairwise_ids(specs, sample_set.n_samples)
    if sample_set.n_representatives == 0:
        raise ValueError("class graph requires representatives")
    d_r = np.empty((len(instances), len(specs), sample_set.n_representatives))
    for k, spec in enumerate(specs):
        for col, r in enumerate(sample_set.representatives):
            for row, x in enumerate(instances):
                d_r[row, k, col] = spec(x, r)
    matrix = combine_class_columns(d_s, d_r)
    return matrix, _class_ids(specs, sample_set.n_samples, sample_set.n_representatives)


def combine_class_columns(dist_to_samples: np.ndarray, dist_to_reps: np.ndarray) -> np.ndarray:
    """Combine (n, K, |S|) and (n, K, |R|) distances into (n, K*|S|*|R|) class columns."""
    ds = np.asarray(dist_to_samples, dtype=np.float64)
    dr = np.asarray(dist_to_reps, dtype=np.float64)
    if ds.ndim != 3 or dr.ndim != 3 or ds.shape[:2] != dr.shape[:2]:
        raise ValueError("distance blocks must be (n, K, |S|) and (n, K, |R|)")
    combined = ds[:, :, :, None] + dr[:, :, None, :]
    return combined.reshape(ds.shape[0], -1)


@dataclass(frozen=True)
class StandardizationStats:
    """Per-column training mean and (floored) population deviation."""

    means: np.ndarray
    stdevs: np.ndarray
    constant: np.ndarray
    column_ids: tuple = ()

    def __post_init__(self):
        m = np.asarray(self.means, dtype=np.float64)
        s = np.asarray(self.stdevs, dtype=np.float64)
        c = np.asarray(self.constant, dtype=bool)
        if m.ndim != 1 or s.shape != m.shape or c.shape != m.shape:
            raise ValueError("inconsistent stats shapes")
        if np.any(s <= 0):
            raise ValueError("stdevs must be positive (floored)")
        for arr in (m, s, c):
            arr.setflags(write=False)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "stdevs", s)
        object.__setattr__(self, "constant", c)
        object.__setattr__(self, "column_ids", tuple(self.column_ids))

    @property
    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(self.means.tobytes())
        h.update(self.stdevs.tobytes())
        h.update(self.constant.tobytes())
        return h.hexdigest()[:16]


def fit_standardization(train_distances, column_ids=()) -> StandardizationStats:
    """Per-column empirical mean and population stdev from training rows only.

    Constant columns get a floored deviation and are flagged; they later
    produce all-zero features. Requires at least two training rows.
    """
    D = np.atleast_2d(np.asarray(train_distances, dtype=np.float64))
    if D.shape[0] < 2:
        raise ValueError("standardization needs at least 2 training rows")
    means = D.mean(axis=0)
    stdevs = D.std(axis=0)  # population variant
    floor = 1e-9 * (1.0 + np.abs(means))
    constant = stdevs < floor
    if np.any(constant):
        warnings.warn(
            f"{int(constant.sum())} constant distance column(s); their features are zeroed",
            stacklevel=2,
        )
    return StandardizationStats(means, np.maximum(stdevs, floor), constant, column_ids)


def standardize_columns(distances, stats: StandardizationStats) -> np.ndarray:
    """(mean - dist) / stdev per column; constant columns map to exactly 0."""
    D = np.atleast_2d(np.asarray(distances, dtype=np.float64))
    if D.shape[1] != stats.means.size:
        raise ValueError("column count does not match fitted stats")
    F = (stats.means[None, :] - D) / stats.stdevs[None, :]
    if np.any(stats.constant):
        F[:, stats.constant] = 0.0
    return F


@dataclass(frozen=True)
class SimilarityFeatures:
    """Standardized distance features; rows are instances."""

    matrix: np.ndarray
    column_ids: tuple
    graph: str = "pairwise"

    def __post_init__(self):
        m = np.atleast_2d(np.asarray(self.matrix, dtype=np.float64))
        ids = tuple(self.column_ids)
        if m.shape[1] != len(ids):
            raise ValueError("column ids must match the matrix width")
        if not np.all(np.isfinite(m)):
            raise ValueError("features must be finite")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "column_ids", ids)


def similarity_features(
    instances,
    sample_set: SampleSet,
    specs,
    stats: StandardizationStats,
    graph: str = "pairwise",
) -> SimilarityFeatures:
    """Standardized similarity features of ``instances`` under frozen stats."""
    matrix, ids = compute_distance_columns(instances, sample_set, specs, graph)
    if stats.column_ids and tuple(stats.column_ids) != ids:
        raise ValueError("stats were fitted on a different column set")
    if stats.means.size != len(ids):
        raise ValueError("stats were fitted on a different column count")
    return SimilarityFeatures(standardize_columns(matrix, stats), ids, graph)


def similarity_kernel_matrix(features, features2=None) -> np.ndarray:
    """Linear Gram matrix of similarity features: F @ F2.T (F @ F.T if absent)."""
    if isinstance(features, SimilarityFeatures):
        ids = features.column_ids
        F = features.matrix
    else:
        ids = None
        F = np.atleast_2d(np.asarray(features, dtype=np.float64))
    if features2 is None:
        F2, ids2 = F, ids
    elif isinstance(features2, SimilarityFeatures):
        F2, ids2 = features2.matrix, features2.column_ids
    else:
        F2, ids2 = np.atleast_2d(np.asarray(features2, dtype=np.float64)), None
    if ids is not None and ids2 is not None and ids != ids2:
        raise ValueError("feature column sets do not match")
    if F.shape[1] != F2.shape[1]:
        raise ValueError("feature dimension mismatch")
    return F @ F2.T


# --------------------------------------------------------------------------
# uniform representation
# --------------------------------------------------------------------------


def _check_beta(beta, n_modalities: int) -> np.ndarray:
    b = np.asarray(beta, dtype=np.float64)
    if b.shape != (n_modalities,):
        raise ValueError("one weight per modality required")
    if np.any(b < 0) or abs(float(b.sum()) - 1.0) > 1e-9:
        raise ValueError("modality weights must be non-negative and sum to 1")
    return b


def _combined_sims(x, samples, specs, beta) -> np.ndarray:
    return np.array(
        [sum(b * spec(x, s) for b, spec in zip(beta, specs)) for s in samples]
    )


def fit_uniform_normalizer(train_instances, samples, specs, beta) -> np.ndarray:
    """Per-sample training expectation of exp(-sum_r beta_r sim_r), for the
    normalized uniform representation."""
    specs = list(specs)
    beta = _check_beta(beta, len(specs))
    train_instances = list(train_instances)
    if not train_instances:
        raise ValueError("normalizer needs training instances")
    rows = np.vstack(
        [np.exp(-_combined_sims(t, samples, specs, beta)) for t in train_instances]
    )
    return rows.mean(axis=0)


def uniform_representation(
    x,
    samples,
    specs,
    beta,
    normalized: bool = False,
    normalizer: np.ndarray | None = None,
) -> np.ndarray:
    """Per-reference-sample weighted modality similarities, dimension |S|.

    Coordinate j is sum_r beta_r sim_r(x, s_j). The normalized variant maps
    each coordinate through exp(-.) and divides by the training expectation
    supplied via :func:`fit_uniform_normalizer`.
    """
    samples = list(samples)
    specs = list(specs)
    if not samples or not specs:
        raise ValueError("samples and specs must be non-empty")
    beta = _check_beta(beta, len(specs))
    combined = _combined_sims(x, samples, specs, beta)
    if not normalized:
        return combined
    if normalizer is None:
        raise ValueError("normalized representation requires a fitted normalizer")
    normalizer = np.asarray(normalizer, dtype=np.float64)
    if normalizer.shape != combined.shape:
        raise ValueError("normalizer length must equal |S|")
    return np.exp(-combined) / normalizer


# --------------------------------------------------------------------------
# persistence
# --------------------------------------------------------------------------


def save_features(path_csv, features: SimilarityFeatures, stats: StandardizationStats | None = None,
                  sidecar_path=None, extra_meta: dict | None = None) -> None:
    """Write features as CSV (header = column ids) plus a JSON sidecar."""
    header = ",".join(features.column_ids)
    np.savetxt(path_csv, features.matrix, delimiter=",", fmt="%.17g",
               header=header, comments="")
    sidecar = {
        "graph_type": features.graph,
        "columns": len(features.column_ids),
        "rows": int(features.matrix.shape[0]),
        "modalities": None,
        "n_samples": None,
        "n_representatives": None,
        "stats_digest": stats.digest if stats is not None else None,
    }
    if extra_meta:
        sidecar.update(extra_meta)
    sidecar_path = sidecar_path or f"{path_csv}.json"
    with open(sidecar_path, "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_features(path_csv, sidecar_path=None) -> SimilarityFeatures:
    sidecar_path = sidecar_path or f"{path_csv}.json"
    with open(sidecar_path) as fh:
        sidecar = json.load(fh)
    with open(path_csv) as fh:
        header = fh.readline().strip()
    ids = tuple(header.split(","))
    matrix = np.loadtxt(path_csv, delimiter=",", skiprows=1, ndmin=2)
    return SimilarityFeatures(matrix, ids, sidecar.get("graph_type", "pairwise"))
