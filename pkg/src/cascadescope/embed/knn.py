"""Exact and NN-descent k-nearest-neighbor graphs."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from numba import njit

from .distances import to_euclidean_space

log = logging.getLogger(__name__)

EXACT_THRESHOLD = 20_000
RECALL_TARGET = 0.95


@dataclass
class NeighborGraph:
    k: int
    indices: np.ndarray
    distances: np.ndarray
    method: str
    recall_estimate: float | None = None
    weights: sp.csr_matrix | None = None

    @property
    def n(self) -> int:
        return self.indices.shape[0]


def _sq_norms(y) -> np.ndarray:
    if sp.issparse(y):
        return np.asarray(y.multiply(y).sum(axis=1)).ravel()
    return np.einsum("ij,ij->i", y, y)


def _exact_rows(y, rows: np.ndarray, cand: np.ndarray) -> np.ndarray:
    """Direct distances from each of ``rows`` to its candidate list."""
    out = np.empty(cand.shape)
    for r, (i, cs) in enumerate(zip(rows, cand)):
        if sp.issparse(y):
            diff = y[cs] - y[np.full(len(cs), i)]
            out[r] = np.sqrt(np.asarray(diff.multiply(diff).sum(axis=1)).ravel())
        else:
            out[r] = np.sqrt(((y[cs] - y[i]) ** 2).sum(axis=1))
    return out


def exact_knn(y, k: int, chunk: int = 512, margin: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Brute force k-NN on Euclidean rows, self excluded, ties by index.

    Candidates come from the expanded-norm formula and are re-ranked with
    directly computed distances so cancellation error cannot reorder them.
    """
    n = y.shape[0]
    norms = _sq_norms(y)
    m = min(n - 1, k + margin)
    idx_out = np.empty((n, k), dtype=np.int64)
    dist_out = np.empty((n, k))
    for s in range(0, n, chunk):
        e = min(n, s + chunk)
        g = y[s:e] @ y.T
        g = g.toarray() if sp.issparse(g) else np.asarray(g)
        d2 = norms[s:e, None] + norms[None, :] - 2.0 * g
        d2[np.arange(e - s), np.arange(s, e)] = np.inf
        cand = np.argpartition(d2, m - 1, axis=1)[:, :m] if m < n - 1 else np.argsort(d2, axis=1)[:, :m]
        exact = _exact_rows(y, np.arange(s, e), cand)
        for r in range(e - s):
            order = np.lexsort((cand[r], exact[r]))[:k]
            idx_out[s + r] = cand[r][order]
            dist_out[s + r] = exact[r][order]
    return idx_out, dist_out


@njit(cache=True)
def _splitmix(state):
    state[0] += np.uint64(0x9E3779B97F4A7C15)
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def _randint(state, n):
    return np.int64(_splitmix(state) % np.uint64(n))


@njit(cache=True)
def _sq_dist(indptr, indices, data, i, j):
    a, a_end = indptr[i], indptr[i + 1]
    b, b_end = indptr[j], indptr[j + 1]
    s = 0.0
    while a < a_end and b < b_end:
        ia, ib = indices[a], indices[b]
        if ia == ib:
            d = data[a] - data[b]
            s += d * d
            a += 1
            b += 1
        elif ia < ib:
            s += data[a] * data[a]
            a += 1
        else:
            s += data[b] * data[b]
            b += 1
    while a < a_end:
        s += data[a] * data[a]
        a += 1
    while b < b_end:
        s += data[b] * data[b]
        b += 1
    return s


@njit(cache=True)
def _insert(idx, dist, flag, i, j, d):
    """Insert j into row i of the sorted neighbor arrays; 1 if it changed."""
    k = idx.shape[1]
    if d >= dist[i, k - 1]:
        return 0
    for t in range(k):
        if idx[i, t] == j:
            return 0
    pos = k - 1
    while pos > 0 and (dist[i, pos - 1] > d or (dist[i, pos - 1] == d and idx[i, pos - 1] > j)):
        idx[i, pos] = idx[i, pos - 1]
        dist[i, pos] = dist[i, pos - 1]
        flag[i, pos] = flag[i, pos - 1]
        pos -= 1
    idx[i, pos] = j
    dist[i, pos] = d
    flag[i, pos] = True
    return 1


@njit(cache=True)
def _sample_add(cand, prio, i, j, p):
    m = cand.shape[1]
    if p >= prio[i, m - 1]:
        return
    for t in range(m):
        if cand[i, t] == j:
            return
    pos = m - 1
    while pos > 0 and prio[i, pos - 1] > p:
        cand[i, pos] = cand[i, pos - 1]
        prio[i, pos] = prio[i, pos - 1]
        pos -= 1
    cand[i, pos] = j
    prio[i, pos] = p


@njit(cache=True)
def _nn_descent(indptr, indices, data, n, k, seed, max_iter, max_cand, delta):
    state = np.array([np.uint64(seed)], dtype=np.uint64)
    idx = np.full((n, k), -1, dtype=np.int64)
    dist = np.full((n, k), np.inf)
    flag = np.zeros((n, k), dtype=np.bool_)
    for i in range(n):
        tries = 0
        while idx[i, k - 1] < 0 and tries < 20 * k:
            j = _randint(state, n)
            tries += 1
            if j != i:
                _insert(idx, dist, flag, i, j, _sq_dist(indptr, indices, data, i, j))
    for _ in range(max_iter):
        new_c = np.full((n, max_cand), -1, dtype=np.int64)
        new_p = np.full((n, max_cand), np.inf)
        old_c = np.full((n, max_cand), -1, dtype=np.int64)
        old_p = np.full((n, max_cand), np.inf)
        for i in range(n):
            for t in range(k):
                j = idx[i, t]
                if j < 0:
                    continue
                p = (_splitmix(state) >> np.uint64(11)) * (1.0 / 9007199254740992.0)
                if flag[i, t]:
                    _sample_add(new_c, new_p, i, j, p)
                    _sample_add(new_c, new_p, j, i, p)
                else:
                    _sample_add(old_c, old_p, i, j, p)
                    _sample_add(old_c, old_p, j, i, p)
        for i in range(n):
            for t in range(k):
                j = idx[i, t]
                if j < 0 or not flag[i, t]:
                    continue
                for u in range(max_cand):
                    if new_c[i, u] == j:
                        flag[i, t] = False
                        break
        changes = 0
        for i in range(n):
            for a in range(max_cand):
                p = new_c[i, a]
                if p < 0:
                    continue
                for b in range(a + 1, max_cand):
                    q = new_c[i, b]
                    if q < 0 or q == p:
                        continue
                    d = _sq_dist(indptr, indices, data, p, q)
                    changes += _insert(idx, dist, flag, p, q, d)
                    changes += _insert(idx, dist, flag, q, p, d)
                for b in range(max_cand):
                    q = old_c[i, b]
                    if q < 0 or q == p:
                        continue
                    d = _sq_dist(indptr, indices, data, p, q)
                    changes += _insert(idx, dist, flag, p, q, d)
                    changes += _insert(idx, dist, flag, q, p, d)
        if changes <= delta * n * k:
            break
    return idx, np.sqrt(dist)


def nn_descent(y, k: int, seed: int = 0, max_iter: int = 20, max_candidates: int | None = None, delta: float = 0.001):
    csr = sp.csr_matrix(y, dtype=np.float64)
    csr.sort_indices()
    n = csr.shape[0]
    max_cand = max_candidates or min(60, max(k, 2 * k))
    return _nn_descent(
        csr.indptr.astype(np.int64), csr.indices.astype(np.int64), csr.data, n, k, np.uint64(seed), max_iter, max_cand, delta
    )


def estimate_recall(y, idx: np.ndarray, sample: int = 200, seed: int = 0) -> float:
    n, k = idx.shape
    rng = np.random.default_rng(seed)
    rows = rng.choice(n, size=min(sample, n), replace=False)
    norms = _sq_norms(y)
    g = y[rows] @ y.T
    g = g.toarray() if sp.issparse(g) else np.asarray(g)
    d2 = norms[rows, None] + norms[None, :] - 2.0 * g
    d2[np.arange(len(rows)), rows] = np.inf
    truth = np.argsort(d2, axis=1, kind="stable")[:, :k]
    hits = sum(len(set(truth[r]) & set(idx[row])) for r, row in enumerate(rows))
    return hits / (len(rows) * k)


def knn_graph(
    rows,
    k: int,
    metric: str = "hellinger",
    method: str = "auto",
    exact_threshold: int = EXACT_THRESHOLD,
    seed: int = 0,
) -> NeighborGraph:
    """k-NN graph (self excluded); exact up to ``exact_threshold`` rows."""
    n = rows.shape[0]
    if k >= n:
        raise ValueError(f"k={k} must be smaller than the number of rows ({n})")
    if k < 1:
        raise ValueError("k must be >= 1")
    y = to_euclidean_space(rows, metric)
    if method == "auto":
        method = "exact" if n <= exact_threshold else "nndescent"
    if method == "exact":
        idx, dist = exact_knn(y, k)
        return NeighborGraph(k, idx, dist, "exact")
    if method != "nndescent":
        raise ValueError(f"unknown knn method {method!r}")
    idx, dist = nn_descent(y, k, seed=seed)
    recall = estimate_recall(y, idx, seed=seed)
    if recall < RECALL_TARGET:
        warnings.warn(f"NN-descent recall estimate {recall:.3f} below {RECALL_TARGET}", stacklevel=2)
    log.info("nn-descent recall estimate %.3f", recall)
    return NeighborGraph(k, idx, dist, "nndescent", recall)
