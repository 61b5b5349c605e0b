"""CSV and sparse-text readers/writers shared by the CLI and pipelines."""
from __future__ import annotations

import numpy as np

from .distances import SparseTermVector

__all__ = [
    "read_dense_csv",
    "write_dense_csv",
    "read_labels_csv",
    "read_distributions_csv",
    "read_matrix_csv",
    "read_series",
    "read_term_vectors",
    "write_matrix_csv",
]


def read_dense_csv(path) -> tuple:
    """Numeric CSV with a header row -> (matrix, column names)."""
    with open(path) as fh:
        header = fh.readline().strip()
    if not header:
        raise ValueError(f"{path}: missing header row")
    names = tuple(h.strip() for h in header.split(","))
    matrix = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if matrix.shape[1] != len(names):
        raise ValueError(f"{path}: header and rows disagree on the column count")
    if not np.all(np.isfinite(matrix)):
        raise ValueError(f"{path}: non-finite values")
    return matrix, names


def write_dense_csv(path, matrix, header) -> None:
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    np.savetxt(path, matrix, delimiter=",", fmt="%.17g",
               header=",".join(header), comments="")


def write_matrix_csv(path, matrix) -> None:
    """Headerless numeric CSV (kernel/distance matrices)."""
    np.savetxt(path, np.atleast_2d(np.asarray(matrix, dtype=np.float64)),
               delimiter=",", fmt="%.17g")


def read_matrix_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)


def read_labels_csv(path) -> tuple:
    """Binary (or graded) label matrix with concept names in the header."""
    matrix, names = read_dense_csv(path)
    return matrix, names


def read_distributions_csv(path) -> np.ndarray:
    """CSV rows that each sum to 1 within tolerance."""
    matrix, _ = read_dense_csv(path)
    if np.any(matrix < 0):
        raise ValueError(f"{path}: distributions cannot be negative")
    if np.any(np.abs(matrix.sum(axis=1) - 1.0) > 1e-9):
        raise ValueError(f"{path}: rows must sum to 1")
    return matrix


def read_series(path) -> np.ndarray:
    """A single numeric series: all values in the file, flattened in order."""
    values = np.loadtxt(path, delimiter=",", ndmin=1)
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise ValueError(f"{path}: empty series")
    return values


def read_term_vectors(path) -> list:
    """Sparse documents, one per line, as space-separated ``term:count`` pairs.

    The document length is the sum of its raw counts.
    """
    docs = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            pairs = []
            for token in line.split():
                if ":" not in token:
                    raise ValueError(f"{path}:{lineno}: expected term:count, got {token!r}")
                term, count = token.split(":", 1)
                pairs.append((int(term), float(count)))
            pairs.sort()
            if len({t for t, _ in pairs}) != len(pairs):
                raise ValueError(f"{path}:{lineno}: duplicate term id")
            ids = tuple(t for t, _ in pairs)
            freqs = tuple(c for _, c in pairs)
            docs.append(SparseTermVector(ids, freqs, sum(freqs)))
    if not docs:
        raise ValueError(f"{path}: no documents")
    return docs
