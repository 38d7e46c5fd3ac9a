from __future__ import annotations

import numpy as np
import scipy.sparse as sp

METRICS = ("hellinger", "euclidean")


def hellinger(P, Q) -> float:
    """(1/sqrt 2) * ||sqrt(P) - sqrt(Q)||_2 on nonnegative vectors (not renormalized)."""
    p = np.asarray(P, dtype=float).ravel()
    q = np.asarray(Q, dtype=float).ravel()
    if p.shape != q.shape:
        raise ValueError(f"length mismatch: {p.size} vs {q.size}")
    if (p < 0).any() or (q < 0).any():
        raise ValueError("hellinger requires nonnegative entries")
    return float(np.linalg.norm(np.sqrt(p) - np.sqrt(q)) / np.sqrt(2.0))


def to_euclidean_space(rows, metric: str = "hellinger"):
    """Map rows so that plain Euclidean distance equals ``metric``.

    Hellinger becomes Euclidean on ``sqrt(x) / sqrt(2)``. Sparse input stays
    sparse (CSR), dense input stays a float64 array.
    """
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")
    if sp.issparse(rows):
        m = sp.csr_matrix(rows, dtype=np.float64, copy=True)
        m.sum_duplicates()
        m.sort_indices()
        if metric == "hellinger":
            if (m.data < 0).any():
                raise ValueError("hellinger requires nonnegative entries")
            m.data = np.sqrt(m.data) / np.sqrt(2.0)
        return m
    x = np.array(rows, dtype=np.float64, copy=True)
    if x.ndim != 2:
        raise ValueError("rows must be 2-D")
    if metric == "hellinger":
        if (x < 0).any():
            raise ValueError("hellinger requires nonnegative entries")
        x = np.sqrt(x) / np.sqrt(2.0)
    return x
