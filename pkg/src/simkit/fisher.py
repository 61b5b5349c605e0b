"""Fisher scores, Fisher vectors and Fisher kernels over Gaussian mixtures.

The diagonal Fisher-information approximation divides each raw gradient
coordinate by the square root of its diagonal term; power and L2 post
normalizations follow. An optional spatial block of clique co-assignment
scores over a 2-d lattice can be appended to the mixture blocks.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .gmm import GaussianMixture, loglik_gradient, memberships

__all__ = [
    "FisherVector",
    "LatticeSampleSet",
    "fisher_score",
    "fisher_information_diagonal",
    "fisher_vector",
    "fisher_kernel",
    "spatial_clique_scores",
    "save_fisher_vectors",
    "load_fisher_vectors",
]

_NORMALIZE_CHOICES = ("none", "power", "l2", "both")


@dataclass(frozen=True)
class FisherVector:
    """Normalized gradient representation of a sample set under a fixed mixture."""

    values: np.ndarray
    model_id: str
    normalize: str = "none"
    alpha: float = 0.5

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1:
            raise ValueError("values must be 1-d")
        if not np.all(np.isfinite(v)):
            raise ValueError("values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class LatticeSampleSet:
    """Samples plus the index tuples of the maximal cliques connecting them.

    Cliques default to pairs (edges of the lattice); any uniform clique size
    is accepted. Member order inside a clique is significant.
    """

    samples: np.ndarray
    cliques: tuple

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.samples, dtype=np.float64))
        cliques = tuple(tuple(int(i) for i in c) for c in self.cliques)
        if cliques:
            size = len(cliques[0])
            if size < 2 or any(len(c) != size for c in cliques):
                raise ValueError("cliques must share a uniform size >= 2")
            for c in cliques:
                if len(set(c)) != len(c):
                    raise ValueError("self-loops are not allowed in a clique")
                if min(c) < 0 or max(c) >= X.shape[0]:
                    raise ValueError("clique index out of range")
            if len(set(cliques)) != len(cliques):
                raise ValueError("cliques must be listed once")
        X.setflags(write=False)
        object.__setattr__(self, "samples", X)
        object.__setattr__(self, "cliques", cliques)

    @property
    def clique_size(self) -> int:
        return len(self.cliques[0]) if self.cliques else 2


def fisher_score(model: GaussianMixture, X) -> np.ndarray:
    """Raw Fisher score U_X = sum_t grad log p(x_t | theta).

    Flat layout: [weight block | mean block row-major | stdev block row-major],
    length N(1 + 2d).
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[0] == 0:
        raise ValueError("empty sample set")
    grad_w, grad_mu, grad_sd = loglik_gradient(model, X)
    return np.concatenate([grad_w, grad_mu.ravel(), grad_sd.ravel()])


def fisher_information_diagonal(model: GaussianMixture, n_samples: int) -> np.ndarray:
    """Diagonal Fisher-information terms in the fisher_score layout.

    f_w_i = T (1/w_i + 1/w_1); f_mu_id = T w_i / sigma_id^2;
    f_sig_id = 2 T w_i / sigma_id^2. The asymmetric reference to the first
    component in f_w is kept as published (constrained-simplex artifact).
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    T = float(n_samples)
    w = model.weights
    f_w = T * (1.0 / w + 1.0 / w[0])
    ratio = w[:, None] / (model.stdevs ** 2)
    f_mu = T * ratio
    f_sd = 2.0 * T * ratio
    return np.concatenate([f_w, f_mu.ravel(), f_sd.ravel()])


def _apply_normalizations(v: np.ndarray, normalize: str, alpha: float) -> np.ndarray:
    if normalize in ("power", "both"):
        v = np.sign(v) * np.abs(v) ** alpha
    if normalize in ("l2", "both"):
        norm = float(np.linalg.norm(v))
        # a zero-norm vector stays zero rather than dividing by zero
        if norm > 0:
            v = v / norm
    return v


def fisher_vector(
    model: GaussianMixture,
    X,
    normalize: str = "none",
    alpha: float = 0.5,
    lattice: LatticeSampleSet | None = None,
) -> FisherVector:
    """Fisher vector G_X = F^(-1/2) U_X with optional post-normalizations.

    ``normalize`` is one of none/power/l2/both; power applies
    sign(v)|v|^alpha elementwise, and l2 of an all-zero vector returns the
    zero vector unchanged. When a lattice is given, the clique co-assignment
    score block is appended (unweighted) before the post normalizations,
    giving length 2Nd + N + N^c.
    """
    if normalize not in _NORMALIZE_CHOICES:
        raise ValueError(f"normalize must be one of {_NORMALIZE_CHOICES}")
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    u = fisher_score(model, X)
    f = fisher_information_diagonal(model, X.shape[0])
    v = u / np.sqrt(f)
    if lattice is not None:
        v = np.concatenate([v, spatial_clique_scores(model, lattice)])
    v = _apply_normalizations(v, normalize, alpha)
    return FisherVector(v, model.provenance, normalize=normalize, alpha=alpha)


def fisher_kernel(a: FisherVector, b: FisherVector) -> float:
    """Inner product of two Fisher vectors from the same model."""
    if a.model_id != b.model_id:
        raise ValueError("Fisher vectors come from different models")
    if a.values.size != b.values.size:
        raise ValueError("Fisher vector length mismatch")
    return float(np.dot(a.values, b.values))


def spatial_clique_scores(model: GaussianMixture, lattice: LatticeSampleSet) -> np.ndarray:
    """Clique co-assignment frequencies over component-label tuples.

    Samples are hard-assigned to their argmax-membership component (ties to
    the lowest index); coordinate (k_1, .., k_c) counts the cliques whose
    members carry exactly those labels, divided by the number of cliques.
    Output has length N^c and sums to 1.
    """
    if not lattice.cliques:
        raise ValueError("empty clique set")
    gamma = memberships(model, lattice.samples)
    assign = np.argmax(gamma, axis=1)  # argmax takes the lowest index on ties
    n = model.n_components
    c = lattice.clique_size
    scores = np.zeros(n ** c)
    for clique in lattice.cliques:
        flat = 0
        for member in clique:
            flat = flat * n + int(assign[member])
        scores[flat] += 1.0
    return scores / len(lattice.cliques)


def save_fisher_vectors(path_csv, vectors: list, sidecar_path=None) -> None:
    """Persist Fisher vectors as CSV rows plus a JSON sidecar.

    All vectors must share model provenance and normalization; the sidecar
    records them. Default sidecar path is ``<path_csv>.json``.
    """
    if not vectors:
        raise ValueError("no vectors to save")
    first = vectors[0]
    for v in vectors:
        if v.model_id != first.model_id or v.normalize != first.normalize:
            raise ValueError("vectors must share model and normalization")
        if v.values.size != first.values.size:
            raise ValueError("vectors must share length")
    rows = np.vstack([v.values for v in vectors])
    np.savetxt(path_csv, rows, delimiter=",", fmt="%.17g")
    sidecar = {
        "model_id": first.model_id,
        "normalize": first.normalize,
        "alpha": first.alpha,
        "length": int(first.values.size),
        "count": len(vectors),
    }
    sidecar_path = sidecar_path or f"{path_csv}.json"
    with open(sidecar_path, "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_fisher_vectors(path_csv, sidecar_path=None) -> list:
    sidecar_path = sidecar_path or f"{path_csv}.json"
    with open(sidecar_path) as fh:
        sidecar = json.load(fh)
    rows = np.loadtxt(path_csv, delimiter=",", ndmin=2)
    return [
        FisherVector(row, sidecar["model_id"], sidecar["normalize"], sidecar["alpha"])
        for row in rows
    ]
