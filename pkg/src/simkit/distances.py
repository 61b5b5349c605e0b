"""Per-modality distance and similarity functions.

Vector norms, probability-distribution divergences, Fisher distances,
dynamic time warping, asymmetric set matching and text term weighting.
All functions are pure and reentrant.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "minkowski",
    "kl_divergence",
    "js_divergence",
    "fisher_distance_discrete",
    "fisher_distance_gaussian1d",
    "dtw",
    "dtw_batch",
    "asym_set_distance",
    "SparseTermVector",
    "CorpusStats",
    "weight_terms",
    "sparse_minkowski",
    "sparse_js_divergence",
]

# floating-point guard for arccos/arccosh arguments at domain boundaries
_DOMAIN_EPS = 1e-12


def _validate_distribution(p: np.ndarray, name: str) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-d array")
    if np.any(p < 0):
        raise ValueError(f"{name} has negative entries")
    if abs(float(p.sum()) - 1.0) > 1e-9:
        raise ValueError(f"{name} does not sum to 1")
    return p


def minkowski(a, b, p: int = 2) -> float:
    """L1 or L2 distance between two equal-length dense vectors."""
    if p not in (1, 2):
        raise ValueError("p must be 1 or 2")
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("dimension mismatch")
    d = a - b
    if p == 1:
        return float(np.sum(np.abs(d)))
    return float(np.sqrt(np.sum(d * d)))


def kl_divergence(p, q) -> float:
    """Kullback-Leibler divergence (natural log), with 0*ln(0) = 0.

    Requires absolute continuity: q_i = 0 implies p_i = 0.
    """
    p = _validate_distribution(p, "p")
    q = _validate_distribution(q, "q")
    if p.shape != q.shape:
        raise ValueError("support size mismatch")
    mask = p > 0
    if np.any(q[mask] == 0):
        raise ValueError("kl_divergence undefined: q_i = 0 where p_i > 0")
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def js_divergence(p, q) -> float:
    """Jensen-Shannon divergence (natural log); symmetric, bounded by ln 2."""
    p = _validate_distribution(p, "p")
    q = _validate_distribution(q, "q")
    if p.shape != q.shape:
        raise ValueError("support size mismatch")
    m = 0.5 * (p + q)
    # m_i = 0 implies p_i = q_i = 0, so both KL terms are well defined
    total = 0.0
    for dist in (p, q):
        mask = dist > 0
        total += 0.5 * float(np.sum(dist[mask] * np.log(dist[mask] / m[mask])))
    return total


def fisher_distance_discrete(p, q) -> float:
    """Geodesic Fisher distance between finite distributions.

    Distributions map isometrically onto the positive quadrant of a sphere;
    the distance along the great circle is 2*arccos(sum_i sqrt(p_i q_i)).
    """
    p = _validate_distribution(p, "p")
    q = _validate_distribution(q, "q")
    if p.shape != q.shape:
        raise ValueError("support size mismatch")
    arg = float(np.sum(np.sqrt(p * q)))
    arg = min(1.0, max(-1.0, arg))
    return 2.0 * math.acos(arg)


def fisher_distance_gaussian1d(p: tuple, q: tuple) -> float:
    """Fisher distance between two univariate Gaussians (mu, sigma).

    Computed as sqrt(2) times the Poincare half-plane distance of the
    mapped points (mu/sqrt(2), sigma).
    """
    mu1, s1 = float(p[0]), float(p[1])
    mu2, s2 = float(q[0]), float(q[1])
    if s1 <= 0 or s2 <= 0:
        raise ValueError("sigma must be positive")
    du = mu1 / math.sqrt(2.0) - mu2 / math.sqrt(2.0)
    dv = s1 - s2
    arg = 1.0 + (du * du + dv * dv) / (2.0 * s1 * s2)
    return math.sqrt(2.0) * math.acosh(max(arg, 1.0))


def dtw(x, y) -> float:
    """Dynamic time warping distance between two series.

    Returns the square root of the DP value that accumulates squared
    pointwise differences over the optimal monotone alignment; the base
    case for two single-point series is their absolute difference.
    No warping-window constraint is applied.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or y.ndim != 1 or x.size == 0 or y.size == 0:
        raise ValueError("series must be non-empty 1-d arrays")
    n, m = x.size, y.size
    prev = np.empty(m)
    cur = np.empty(m)
    prev[0] = (x[0] - y[0]) ** 2
    for j in range(1, m):
        prev[j] = prev[j - 1] + (x[0] - y[j]) ** 2
    for i in range(1, n):
        cur[0] = prev[0] + (x[i] - y[0]) ** 2
        for j in range(1, m):
            cur[j] = min(prev[j], cur[j - 1], prev[j - 1]) + (x[i] - y[j]) ** 2
        prev, cur = cur, prev
    return float(math.sqrt(prev[m - 1]))


def dtw_batch(queries: list, references: list) -> np.ndarray:
    """DTW distances between every query and every reference series.

    Vectorizes the DP over all (query, reference) pairs at once; series may
    have different lengths. Returns a (len(queries), len(references)) array
    identical to calling :func:`dtw` pairwise.
    """
    qs = [np.asarray(q, dtype=np.float64) for q in queries]
    rs = [np.asarray(r, dtype=np.float64) for r in references]
    if not qs or not rs:
        raise ValueError("queries and references must be non-empty")
    for s in qs + rs:
        if s.ndim != 1 or s.size == 0:
            raise ValueError("series must be non-empty 1-d arrays")
    nq = np.array([s.size for s in qs])
    nr = np.array([s.size for s in rs])
    n_max, m_max = int(nq.max()), int(nr.max())
    Q = np.zeros((len(qs), n_max))
    R = np.zeros((len(rs), m_max))
    for i, s in enumerate(qs):
        Q[i, : s.size] = s
    for i, s in enumerate(rs):
        R[i, : s.size] = s

    out = np.empty((len(qs), len(rs)))
    prev = np.empty((len(qs), len(rs), m_max))
    cur = np.empty_like(prev)
    end_col = nr - 1
    for i in range(n_max):
        xi = Q[:, i][:, None]  # (Q, 1)
        c0 = (xi - R[:, 0][None, :]) ** 2
        if i == 0:
            cur[:, :, 0] = c0
        else:
            cur[:, :, 0] = prev[:, :, 0] + c0
        for j in range(1, m_max):
            c = (xi - R[:, j][None, :]) ** 2
            if i == 0:
                cur[:, :, j] = cur[:, :, j - 1] + c
            else:
                cur[:, :, j] = c + np.minimum(
                    np.minimum(prev[:, :, j], cur[:, :, j - 1]), prev[:, :, j - 1]
                )
        done = np.nonzero(nq == i + 1)[0]
        if done.size:
            out[done, :] = cur[done][:, np.arange(len(rs)), end_col]
        prev, cur = cur, prev
    return np.sqrt(out)


def asym_set_distance(Q, X, base=None, weights=None) -> float:
    """Asymmetric matching distance from a vector set Q to a vector set X.

    Averages, over the elements of Q, the distance to the closest element
    of X. Not symmetric. Optional per-dimension weights scale coordinates
    before the base distance is applied.
    """
    if base is None:
        base = minkowski
    Q = [np.asarray(q, dtype=np.float64) for q in Q]
    X = [np.asarray(x, dtype=np.float64) for x in X]
    if not Q or not X:
        raise ValueError("Q and X must be non-empty")
    dim = Q[0].shape
    if any(v.shape != dim for v in Q + X):
        raise ValueError("dimension mismatch inside Q/X")
    if weights is not None:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != dim:
            raise ValueError("weights dimension mismatch")
        if np.any(w < 0):
            raise ValueError("weights must be non-negative")
        Q = [q * w for q in Q]
        X = [x * w for x in X]
    total = 0.0
    for q in Q:
        total += min(base(q, x) for x in X)
    return total / len(Q)


@dataclass(frozen=True)
class SparseTermVector:
    """Sparse bag-of-terms document: unique sorted term ids with values.

    Values are raw frequencies (positive) for fresh documents; reweighted
    vectors reuse the type and may carry negative weights (negative idf).
    """

    term_ids: tuple
    frequencies: tuple
    length: float

    def __post_init__(self):
        ids = tuple(int(t) for t in self.term_ids)
        freqs = tuple(float(f) for f in self.frequencies)
        if len(ids) != len(freqs):
            raise ValueError("term_ids and frequencies must align")
        if list(ids) != sorted(set(ids)):
            raise ValueError("term_ids must be unique and sorted")
        if self.length <= 0:
            raise ValueError("document length must be positive")
        object.__setattr__(self, "term_ids", ids)
        object.__setattr__(self, "frequencies", freqs)


@dataclass(frozen=True)
class CorpusStats:
    """Corpus-level term statistics: document count, per-term document frequency, mean length."""

    n_documents: int
    doc_frequency: dict = field(default_factory=dict)
    mean_length: float = 1.0

    def __post_init__(self):
        if self.n_documents <= 0:
            raise ValueError("n_documents must be positive")
        if self.mean_length <= 0:
            raise ValueError("mean_length must be positive")
        for t, h in self.doc_frequency.items():
            if not 0 < h <= self.n_documents:
                raise ValueError(f"document frequency out of range for term {t}")


def sparse_minkowski(a: SparseTermVector, b: SparseTermVector, p: int = 2) -> float:
    """L1 or L2 distance between two sparse term vectors (union support)."""
    if p not in (1, 2):
        raise ValueError("p must be 1 or 2")
    bd = dict(zip(b.term_ids, b.frequencies))
    total = 0.0
    for t, f in zip(a.term_ids, a.frequencies):
        d = f - bd.pop(t, 0.0)
        total += abs(d) if p == 1 else d * d
    for f in bd.values():
        total += abs(f) if p == 1 else f * f
    return total if p == 1 else math.sqrt(total)


def sparse_js_divergence(a: SparseTermVector, b: SparseTermVector) -> float:
    """Jensen-Shannon divergence of two documents as term distributions.

    Raw (positive) frequencies are normalized to sum 1 over each document.
    """
    for doc in (a, b):
        if any(f <= 0 for f in doc.frequencies):
            raise ValueError("term distributions need positive raw frequencies")
    za = sum(a.frequencies)
    zb = sum(b.frequencies)
    pa = {t: f / za for t, f in zip(a.term_ids, a.frequencies)}
    pb = {t: f / zb for t, f in zip(b.term_ids, b.frequencies)}
    total = 0.0
    for p, q in ((pa, pb), (pb, pa)):
        for t, v in p.items():
            m = 0.5 * (v + q.get(t, 0.0))
            total += 0.5 * v * math.log(v / m)
    return total


def weight_terms(
    doc: SparseTermVector,
    stats: CorpusStats,
    scheme: str = "bm25",
    k: float = 1.2,
    b: float = 0.75,
) -> SparseTermVector:
    """Reweight a sparse term vector with tf, tf.idf or BM25.

    idf = ln((H - h + 0.5)/(h + 0.5)) may be negative when a term occurs in
    more than half the corpus; it is passed through unchanged.
    """
    if scheme not in ("tf", "tfidf", "bm25"):
        raise ValueError(f"unknown weighting scheme: {scheme}")
    if k <= 0:
        raise ValueError("k must be positive")
    if not 0 <= b <= 1:
        raise ValueError("b must be in [0, 1]")
    if any(f <= 0 for f in doc.frequencies):
        raise ValueError("raw frequencies must be positive")
    H = stats.n_documents
    weights = []
    for t, f in zip(doc.term_ids, doc.frequencies):
        if t not in stats.doc_frequency:
            raise KeyError(f"term {t} missing from corpus stats")
        h = stats.doc_frequency[t]
        if scheme == "tf":
            w = f
        else:
            idf = math.log((H - h + 0.5) / (h + 0.5))
            if scheme == "tfidf":
                w = idf * f
            else:
                denom = f + k * (1.0 - b + b * doc.length / stats.mean_length)
                w = idf * f * (k + 1.0) / denom
        weights.append(w)
    return SparseTermVector(doc.term_ids, tuple(weights), doc.length)
