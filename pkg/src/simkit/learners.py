"""Discriminative models over kernels and features.

The soft-margin SVM is trained by projected coordinate ascent on the dual:
sweep the multipliers in index order, step each along its partial gradient
and clip to [0, C]. No explicit bias is trained; callers wanting one can
add a constant to the kernel. Logistic regression is plain gradient ascent
on the log-likelihood with the bias folded in as a constant feature column.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SvmModel",
    "LogRegModel",
    "svm_train",
    "svm_decision",
    "logreg_train",
    "logreg_decision",
    "save_svm",
    "load_svm",
]

_SUPPORT_EPS = 1e-12


@dataclass(frozen=True)
class SvmModel:
    """Box-constrained dual solution of the 1-norm soft margin problem."""

    alphas: np.ndarray
    labels: np.ndarray  # -1 / +1
    C: float
    bias: float = 0.0
    objective_trace: np.ndarray = field(default_factory=lambda: np.zeros(0))
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        a = np.asarray(self.alphas, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.float64)
        if a.ndim != 1 or y.shape != a.shape:
            raise ValueError("alphas and labels must be aligned 1-d arrays")
        if np.any(a < -1e-12) or np.any(a > self.C + 1e-12):
            raise ValueError("alphas must lie in [0, C]")
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise ValueError("labels must be -1/+1")
        a.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "alphas", a)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "objective_trace", np.asarray(self.objective_trace, dtype=np.float64))

    @property
    def support_indices(self) -> np.ndarray:
        return np.nonzero(self.alphas > _SUPPORT_EPS)[0]

    @property
    def n_train(self) -> int:
        return int(self.alphas.size)


def _check_kernel(K) -> np.ndarray:
    K = np.asarray(K, dtype=np.float64)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValueError("kernel matrix must be square")
    if not np.allclose(K, K.T, atol=1e-8):
        raise ValueError("kernel matrix must be symmetric")
    return K


def svm_train(
    K,
    y,
    C: float = 1.0,
    eta: float | None = None,
    max_epochs: int = 1000,
    tol: float = 1e-6,
    positive_weight: float = 1.0,
) -> SvmModel:
    """Train the 1-norm soft margin SVM on a precomputed kernel.

    Repeats, for i = 1..T in order,
        alpha_i <- clip(alpha_i + eta (1 - y_i sum_t alpha_t y_t K[t, i]), 0, C_i)
    until the largest per-epoch multiplier change drops below ``tol`` or
    ``max_epochs`` is hit. The default eta = 1/max_i K_ii keeps the dual
    objective non-decreasing. ``positive_weight`` scales the box of the
    positive class (C_i = C * positive_weight when y_i = +1) for imbalanced
    data; it defaults to symmetric boxes. Returns the model with a per-epoch
    objective trace.
    """
    K = _check_kernel(K)
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (K.shape[0],):
        raise ValueError("labels must match the kernel size")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("labels must be -1/+1")
    if np.all(y == y[0]):
        raise ValueError("both classes must be present")
    if C <= 0:
        raise ValueError("C must be positive")
    if positive_weight <= 0:
        raise ValueError("positive_weight must be positive")
    diag_max = float(np.max(np.diag(K)))
    if eta is None:
        if diag_max <= 0:
            raise ValueError("kernel diagonal must have a positive entry for the default eta")
        eta = 1.0 / diag_max
    if eta <= 0:
        raise ValueError("eta must be positive")

    T = K.shape[0]
    box = np.where(y > 0, C * positive_weight, C)
    alpha = np.zeros(T)
    s = np.zeros(T)  # s = K @ (alpha * y), maintained incrementally
    trace = []
    epochs = 0
    for epoch in range(max_epochs):
        max_delta = 0.0
        for i in range(T):
            g = 1.0 - y[i] * s[i]
            new = min(max(alpha[i] + eta * g, 0.0), box[i])
            delta = new - alpha[i]
            if delta != 0.0:
                alpha[i] = new
                s += delta * y[i] * K[:, i]
                max_delta = max(max_delta, abs(delta))
        trace.append(float(alpha.sum() - 0.5 * np.dot(alpha * y, s)))
        epochs = epoch + 1
        if max_delta < tol:
            break
    return SvmModel(
        alpha,
        y,
        float(max(C, C * positive_weight)),
        bias=0.0,
        objective_trace=np.array(trace),
        meta={"eta": eta, "epochs": epochs, "tol": tol, "C": C,
              "positive_weight": positive_weight},
    )


def dual_objective(K, y, alpha) -> float:
    """W(alpha) = sum alpha - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij."""
    K = np.asarray(K, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    a = np.asarray(alpha, dtype=np.float64)
    ay = a * y
    return float(a.sum() - 0.5 * ay @ K @ ay)


def svm_decision(model: SvmModel, K_test) -> np.ndarray:
    """Decision scores sum_i alpha_i y_i K(x_i, x) + bias per test row.

    ``K_test`` has one row per test instance and one column per training
    instance.
    """
    K_test = np.atleast_2d(np.asarray(K_test, dtype=np.float64))
    if K_test.shape[1] != model.n_train:
        raise ValueError("test kernel columns must match the training size")
    return K_test @ (model.alphas * model.labels) + model.bias


def save_svm(model: SvmModel, path) -> None:
    doc = {
        "alphas": model.alphas.tolist(),
        "labels": model.labels.tolist(),
        "support_indices": model.support_indices.tolist(),
        "C": model.C,
        "bias": model.bias,
        "meta": model.meta,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_svm(path) -> SvmModel:
    with open(path) as fh:
        doc = json.load(fh)
    return SvmModel(
        np.array(doc["alphas"]),
        np.array(doc["labels"]),
        float(doc["C"]),
        bias=float(doc.get("bias", 0.0)),
        meta=doc.get("meta", {}),
    )


@dataclass(frozen=True)
class LogRegModel:
    """Logistic regression weights; the bias is the weight of a constant-1 column."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1 or not np.all(np.isfinite(w)):
            raise ValueError("weights must be a finite 1-d array")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    e = np.exp(z[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def loglik_logreg(X, y, weights, l2: float = 0.0) -> float:
    """Bernoulli log-likelihood minus the optional L2 penalty."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    z = X @ np.asarray(weights, dtype=np.float64)
    # log p for y=1 is -log(1+e^-z); for y=0 it is -z - log(1+e^-z)
    ll = float(np.sum((y - 1.0) * z - np.log1p(np.exp(-np.abs(z))) - np.maximum(-z, 0.0)))
    return ll - 0.5 * l2 * float(np.dot(weights, weights))


def logreg_gradient(X, y, weights, l2: float = 0.0) -> np.ndarray:
    """Gradient of the log-likelihood: sum_t (y_t - p(x_t)) x_t - l2 * w."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    p = _sigmoid(X @ np.asarray(weights, dtype=np.float64))
    return X.T @ (y - p) - l2 * np.asarray(weights, dtype=np.float64)


def logreg_train(
    X,
    y,
    eta: float = 0.01,
    epochs: int = 1000,
    l2: float = 0.0,
) -> LogRegModel:
    """Full-batch gradient ascent on the logistic log-likelihood.

    ``X`` must already contain the constant bias column; ``y`` is 0/1.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (X.shape[0],):
        raise ValueError("labels must align with the feature rows")
    if not np.all(np.isin(y, (0.0, 1.0))):
        raise ValueError("labels must be 0/1")
    if np.all(y == y[0]):
        raise ValueError("both classes must be present")
    if not np.all(np.isfinite(X)):
        raise ValueError("features must be finite")
    w = np.zeros(X.shape[1])
    for _ in range(epochs):
        w = w + eta * logreg_gradient(X, y, w, l2)
    return LogRegModel(w)


def logreg_decision(model: LogRegModel, X) -> np.ndarray:
    """Predicted positive-class probabilities."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.weights.size:
        raise ValueError("feature dimension mismatch")
    return _sigmoid(X @ model.weights)
