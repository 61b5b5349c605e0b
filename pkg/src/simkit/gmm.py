"""Diagonal-covariance Gaussian mixture models trained by EM.

Membership probabilities and log densities are computed with max-shifted
log-sum-exp so far-away points never underflow to -inf. Trained models are
immutable and safe to share across threads.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GaussianMixture",
    "log_pdf",
    "log_pdf_batch",
    "memberships",
    "em_fit",
    "loglik_gradient",
    "save_model",
    "load_model",
]

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class GaussianMixture:
    """Mixture of N diagonal Gaussians in d dimensions."""

    weights: np.ndarray  # (N,)
    means: np.ndarray  # (N, d)
    stdevs: np.ndarray  # (N, d)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        mu = np.asarray(self.means, dtype=np.float64)
        sd = np.asarray(self.stdevs, dtype=np.float64)
        if w.ndim != 1 or mu.ndim != 2 or sd.shape != mu.shape or w.size != mu.shape[0]:
            raise ValueError("inconsistent parameter shapes")
        if np.any(w <= 0) or abs(float(w.sum()) - 1.0) > 1e-9:
            raise ValueError("weights must be positive and sum to 1")
        if np.any(sd <= 0):
            raise ValueError("stdevs must be positive")
        w.setflags(write=False)
        mu.setflags(write=False)
        sd.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "stdevs", sd)

    @property
    def n_components(self) -> int:
        return int(self.weights.size)

    @property
    def dim(self) -> int:
        return int(self.means.shape[1])

    @property
    def param_count(self) -> int:
        """card(theta) = N(1 + 2d)."""
        return self.n_components * (1 + 2 * self.dim)

    @property
    def provenance(self) -> str:
        """Stable digest of the parameters, used to pair Fisher vectors with their model."""
        h = hashlib.sha256()
        for arr in (self.weights, self.means, self.stdevs):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()[:16]


def _check_data(model: GaussianMixture, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.dim:
        raise ValueError(f"dimension mismatch: data is {X.shape[1]}-d, model is {model.dim}-d")
    return X


def _weighted_log_densities(model: GaussianMixture, X: np.ndarray) -> np.ndarray:
    """m_i(x) = ln w_i + ln g_i(x) for every sample/component pair, shape (T, N)."""
    # (T, N, d) standardized residuals via broadcasting
    z = (X[:, None, :] - model.means[None, :, :]) / model.stdevs[None, :, :]
    log_g = -0.5 * np.sum(z * z, axis=2)
    log_g -= 0.5 * model.dim * _LOG_2PI + np.sum(np.log(model.stdevs), axis=1)[None, :]
    return log_g + np.log(model.weights)[None, :]


def log_pdf_batch(model: GaussianMixture, X) -> np.ndarray:
    """ln p(x | theta) for each row of X, via max-shifted log-sum-exp."""
    X = _check_data(model, X)
    m = _weighted_log_densities(model, X)
    shift = np.max(m, axis=1, keepdims=True)
    return (shift + np.log(np.sum(np.exp(m - shift), axis=1, keepdims=True)))[:, 0]


def log_pdf(model: GaussianMixture, x) -> float:
    """ln p(x | theta) of a single sample."""
    return float(log_pdf_batch(model, np.atleast_2d(np.asarray(x, dtype=np.float64)))[0])


def memberships(model: GaussianMixture, X) -> np.ndarray:
    """Posterior component probabilities gamma_i(x), shape (T, N); rows sum to 1.

    Max-shifting guarantees the argmax component keeps a nonzero membership
    for every sample, however far from the means.
    """
    X = _check_data(model, X)
    if X.shape[0] == 0:
        raise ValueError("empty sample set")
    m = _weighted_log_densities(model, X)
    shift = np.max(m, axis=1, keepdims=True)
    e = np.exp(m - shift)
    return e / np.sum(e, axis=1, keepdims=True)


def loglik_gradient(model: GaussianMixture, X) -> tuple:
    """Gradient of sum_t ln p(x_t | theta) over (weights, means, stdevs).

    Returns arrays of shapes (N,), (N, d) and (N, d):
      d/dw_i     = sum_t gamma_i(x_t) / w_i
      d/dmu_id   = sum_t gamma_i(x_t) (x_td - mu_id) / sigma_id^2
      d/dsig_id  = sum_t gamma_i(x_t) ((x_td - mu_id)^2 / sigma_id^3 - 1 / sigma_id)
    Weights are treated as free parameters (no simplex projection), so each
    block matches finite differences of the summed log density.
    """
    X = _check_data(model, X)
    g = memberships(model, X)  # (T, N)
    grad_w = np.sum(g, axis=0) / model.weights
    diff = X[:, None, :] - model.means[None, :, :]  # (T, N, d)
    sd = model.stdevs[None, :, :]
    grad_mu = np.einsum("tn,tnd->nd", g, diff / (sd * sd))
    grad_sd = np.einsum("tn,tnd->nd", g, diff * diff / (sd ** 3) - 1.0 / sd)
    return grad_w, grad_mu, grad_sd


def _kmeanspp_seeds(X: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ style seeding: spread initial means across the data."""
    idx = [int(rng.integers(X.shape[0]))]
    d2 = np.sum((X - X[idx[0]]) ** 2, axis=1)
    for _ in range(1, n):
        total = float(d2.sum())
        if total <= 0:
            idx.append(int(rng.integers(X.shape[0])))
        else:
            probs = d2 / total
            idx.append(int(rng.choice(X.shape[0], p=probs)))
        d2 = np.minimum(d2, np.sum((X - X[idx[-1]]) ** 2, axis=1))
    return X[np.array(idx)].copy()


def em_fit(
    X,
    n_components: int,
    seed: int = 0,
    max_iter: int = 200,
    tol: float = 1e-6,
) -> tuple:
    """Fit a diagonal GMM by EM; returns (model, log-likelihood trace).

    The trace holds the total log-likelihood evaluated at the start of each
    iteration plus a final entry for the returned parameters; it is monotone
    non-decreasing up to floating-point slack. Deterministic per seed.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    T, d = X.shape
    if n_components < 1:
        raise ValueError("n_components must be >= 1")
    if T < n_components:
        raise ValueError(f"need at least {n_components} samples, got {T}")
    rng = np.random.default_rng(seed)

    global_var = np.var(X, axis=0)
    floor_sd = np.sqrt(np.maximum(1e-4 * global_var, 1e-8))
    init_sd = np.maximum(np.sqrt(global_var), floor_sd)

    means = _kmeanspp_seeds(X, n_components, rng)
    stdevs = np.tile(init_sd, (n_components, 1))
    weights = np.full(n_components, 1.0 / n_components)

    trace = []
    iterations = 0
    converged = False
    for iteration in range(max_iter):
        model = GaussianMixture(weights, means, stdevs)
        m = _weighted_log_densities(model, X)
        shift = np.max(m, axis=1, keepdims=True)
        e = np.exp(m - shift)
        denom = np.sum(e, axis=1, keepdims=True)
        ll = float(np.sum(shift[:, 0] + np.log(denom[:, 0])))
        gamma = e / denom

        trace.append(ll)
        iterations = iteration + 1
        if iteration > 0 and trace[-1] - trace[-2] < tol * max(1.0, abs(trace[-2])):
            converged = True
            break

        mass = gamma.sum(axis=0)  # (N,)
        starved = mass < 1e-8 * T
        if np.any(starved):
            # re-seed dead components at the worst-modelled samples
            dens = shift[:, 0] + np.log(denom[:, 0])
            order = np.argsort(dens, kind="stable")
            for rank, comp in enumerate(np.nonzero(starved)[0]):
                means[comp] = X[order[rank % T]]
                stdevs[comp] = init_sd
                mass[comp] = 1.0
            weights = mass / mass.sum()
            continue

        weights = mass / T
        means = (gamma.T @ X) / mass[:, None]
        var = np.empty_like(means)
        for i in range(n_components):
            diff = X - means[i]
            var[i] = (gamma[:, i] @ (diff * diff)) / mass[i]
        stdevs = np.maximum(np.sqrt(var), floor_sd)

    if not converged:
        # loop exhausted after an M-step: record the returned parameters' value
        model = GaussianMixture(weights, means, stdevs)
        trace.append(float(np.sum(log_pdf_batch(model, X))))

    model = GaussianMixture(
        weights,
        means,
        stdevs,
        meta={"seed": seed, "iterations": iterations, "final_loglik": trace[-1]},
    )
    return model, np.array(trace)


def save_model(model: GaussianMixture, path) -> None:
    """Persist a mixture as a JSON document."""
    doc = {
        "n": model.n_components,
        "d": model.dim,
        "weights": model.weights.tolist(),
        "means": model.means.tolist(),
        "stdevs": model.stdevs.tolist(),
        "meta": model.meta,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path) -> GaussianMixture:
    with open(path) as fh:
        doc = json.load(fh)
    model = GaussianMixture(
        np.array(doc["weights"]),
        np.array(doc["means"]),
        np.array(doc["stdevs"]),
        meta=doc.get("meta", {}),
    )
    if model.n_components != doc["n"] or model.dim != doc["d"]:
        raise ValueError("model file is inconsistent")
    return model
