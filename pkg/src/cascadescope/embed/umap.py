"""Fuzzy neighbor graphs and 2-D embedding by negative-sampling SGD."""
from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from numba import njit
from scipy.optimize import curve_fit

from .. import svg
from .knn import NeighborGraph, _splitmix, knn_graph

SMOOTH_K_TOLERANCE = 1e-5
MIN_K_DIST_SCALE = 1e-3
SMALL_N = 10_000


def t_conorm(a, b):
    """Probabilistic sum ``a + b - a*b`` (fuzzy set union)."""
    return a + b - a * b


def smooth_knn_dist(distances: np.ndarray, n_iter: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Per-point ``(rho, sigma)`` so that membership strengths sum to log2(k).

    ``rho`` is the distance to the nearest neighbor at positive distance.
    """
    n, k = distances.shape
    target = np.log2(k) if k > 1 else 0.0
    rho = np.zeros(n)
    sigma = np.ones(n)
    mean_all = distances.mean()
    for i in range(n):
        d = distances[i]
        pos = d[d > 0.0]
        rho[i] = pos[0] if pos.size else 0.0
        lo, hi, mid = 0.0, np.inf, 1.0
        for _ in range(n_iter):
            psum = np.exp(-np.maximum(d - rho[i], 0.0) / mid).sum()
            if abs(psum - target) < SMOOTH_K_TOLERANCE:
                break
            if psum > target:
                hi = mid
                mid = (lo + hi) / 2.0
            else:
                lo = mid
                mid = mid * 2.0 if hi == np.inf else (lo + hi) / 2.0
        floor = MIN_K_DIST_SCALE * (d.mean() if rho[i] > 0.0 else mean_all)
        sigma[i] = max(mid, floor)
    return rho, sigma


def membership_strengths(graph: NeighborGraph, rho: np.ndarray, sigma: np.ndarray) -> sp.csr_matrix:
    n, k = graph.indices.shape
    vals = np.exp(-np.maximum(graph.distances - rho[:, None], 0.0) / sigma[:, None])
    rows = np.repeat(np.arange(n), k)
    return sp.csr_matrix((vals.ravel(), (rows, graph.indices.ravel())), shape=(n, n))


def fuzzy_union(graph: NeighborGraph) -> NeighborGraph:
    """Calibrate directed strengths and symmetrize with the probabilistic sum."""
    rho, sigma = smooth_knn_dist(graph.distances)
    p = membership_strengths(graph, rho, sigma)
    pt = p.T.tocsr()
    w = (p + pt - p.multiply(pt)).tocsr()
    w.eliminate_zeros()
    w.sort_indices()
    return NeighborGraph(graph.k, graph.indices, graph.distances, graph.method, graph.recall_estimate, w)


def find_ab_params(min_dist: float = 0.1, spread: float = 1.0) -> tuple[float, float]:
    """Least-squares fit of ``1 / (1 + a d^(2b))`` to the min_dist target curve."""

    def curve(x, a, b):
        return 1.0 / (1.0 + a * x ** (2 * b))

    xv = np.linspace(0, spread * 3, 300)
    yv = np.where(xv < min_dist, 1.0, np.exp(-(xv - min_dist) / spread))
    (a, b), _ = curve_fit(curve, xv, yv)
    return float(a), float(b)


@njit(cache=True)
def _clip(v):
    if v > 4.0:
        return 4.0
    if v < -4.0:
        return -4.0
    return v


@njit(cache=True)
def _sgd_epochs(
    emb, head, tail, eps, next_s, eps_neg, next_neg, a, b, gamma, lr0, start, stop, n_epochs, state
):
    n_vertices, dim = emb.shape
    for ep in range(start, stop):
        alpha = lr0 * (1.0 - ep / n_epochs)
        for e in range(head.shape[0]):
            if next_s[e] > ep:
                continue
            j = head[e]
            kk = tail[e]
            d2 = 0.0
            for t in range(dim):
                diff = emb[j, t] - emb[kk, t]
                d2 += diff * diff
            if d2 > 0.0:
                coeff = -2.0 * a * b * d2 ** (b - 1.0) / (a * d2**b + 1.0)
            else:
                coeff = 0.0
            for t in range(dim):
                g = _clip(coeff * (emb[j, t] - emb[kk, t]))
                emb[j, t] += g * alpha
                emb[kk, t] -= g * alpha
            next_s[e] += eps[e]
            n_neg = int((ep - next_neg[e]) / eps_neg[e])
            for _ in range(n_neg):
                kk = np.int64(_splitmix(state) % np.uint64(n_vertices))
                if kk == j:
                    continue
                d2 = 0.0
                for t in range(dim):
                    diff = emb[j, t] - emb[kk, t]
                    d2 += diff * diff
                if d2 > 0.0:
                    coeff = 2.0 * gamma * b / ((0.001 + d2) * (a * d2**b + 1.0))
                    for t in range(dim):
                        emb[j, t] += _clip(coeff * (emb[j, t] - emb[kk, t])) * alpha
                else:
                    for t in range(dim):
                        emb[j, t] += 4.0 * alpha
            next_neg[e] += n_neg * eps_neg[e]


def cross_entropy(weights: sp.csr_matrix, emb: np.ndarray, a: float, b: float, negative_sample_rate: int = 5) -> float:
    """Cross entropy with the repulsive term weighted as negative sampling draws it.

    Attraction is ``-sum w_ij log q_ij``; each unit of edge weight leaving
    ``i`` pulls ``negative_sample_rate`` uniform negatives, giving repulsion
    ``-sum_i rate * deg_i / n * sum_k log(1 - q_ik)``. This is the quantity
    the SGD in :func:`fit_umap` descends. O(n^2); meant for monitoring.
    """
    n = emb.shape[0]
    w = weights.toarray()
    d2 = ((emb[:, None, :] - emb[None, :, :]) ** 2).sum(-1)
    q = np.clip(1.0 / (1.0 + a * d2**b), 1e-12, 1 - 1e-12)
    np.fill_diagonal(q, 0.5)
    attract = -(w * np.log(q)).sum()
    deg = w.sum(axis=1)
    log1mq = np.log(1.0 - q)
    np.fill_diagonal(log1mq, 0.0)
    repel = -(negative_sample_rate * deg[:, None] / n * log1mq).sum()
    return float(attract + repel)


@dataclass
class Embedding:
    coords: np.ndarray
    params: dict
    objective: list[tuple[int, float]] = field(default_factory=list)
    graph: NeighborGraph | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.coords.shape[0]


def fit_umap(
    rows,
    n_neighbors: int = 15,
    min_dist: float = 0.1,
    n_epochs: int | None = None,
    metric: str = "hellinger",
    seed: int = 0,
    knn_method: str = "auto",
    negative_sample_rate: int = 5,
    learning_rate: float = 1.0,
    track_objective: bool = False,
    checkpoint_every: int = 10,
) -> Embedding:
    """Embed rows in 2-D: fuzzy k-NN graph, then SGD with negative sampling."""
    n = rows.shape[0]
    if n < 10:
        raise ValueError("need at least 10 rows")
    if n_epochs is None:
        n_epochs = 200 if n <= SMALL_N else 500
    k = n_neighbors
    if k >= n:
        warnings.warn(f"n_neighbors={k} clamped to {n - 1}", stacklevel=2)
        k = n - 1
    params = {
        "n_neighbors": n_neighbors,
        "min_dist": min_dist,
        "epochs": n_epochs,
        "seed": seed,
        "metric": metric,
        "negative_sample_rate": negative_sample_rate,
    }

    graph = fuzzy_union(knn_graph(rows, k, metric=metric, method=knn_method, seed=seed))
    params["knn_method"] = graph.method
    if graph.distances.max() == 0.0:
        warnings.warn("all rows identical; embedding collapses to the origin", stacklevel=2)
        return Embedding(np.zeros((n, 2)), params, graph=graph)

    a, b = find_ab_params(min_dist)
    params["a"], params["b"] = a, b
    w = graph.weights.tocoo()
    keep = w.data >= w.data.max() / n_epochs
    head, tail, wt = w.row[keep].astype(np.int64), w.col[keep].astype(np.int64), w.data[keep]
    eps = wt.max() / wt
    eps_neg = eps / negative_sample_rate
    next_s, next_neg = eps.copy(), eps_neg.copy()

    rng = np.random.default_rng(seed)
    emb = rng.uniform(-10.0, 10.0, size=(n, 2))
    state = np.array([rng.integers(0, 2**63, dtype=np.uint64)], dtype=np.uint64)
    history = []
    step = checkpoint_every if track_objective else n_epochs
    for start in range(0, n_epochs, step):
        if track_objective:
            history.append((start, cross_entropy(graph.weights, emb, a, b, negative_sample_rate)))
        stop = min(n_epochs, start + step)
        _sgd_epochs(emb, head, tail, eps, next_s, eps_neg, next_neg, a, b, 1.0, learning_rate, start, stop, n_epochs, state)
    if track_objective:
        history.append((n_epochs, cross_entropy(graph.weights, emb, a, b, negative_sample_rate)))
    if not np.isfinite(emb).all():
        raise FloatingPointError("embedding diverged")
    return Embedding(emb, params, history, graph)


def export_scatter(
    embedding: Embedding, labels: Sequence, csv_path: str | Path, svg_path: str | Path | None = None, title: str = ""
) -> int:
    """Write ``x,y,label`` CSV, a params sidecar and an optional SVG; returns colors used."""
    if len(labels) != embedding.n:
        raise ValueError("one label per embedded row required")
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["x", "y", "label"])
        for (x, y), lab in zip(embedding.coords, labels):
            wr.writerow([f"{x:.6f}", f"{y:.6f}", lab])
    Path(str(csv_path) + ".params.json").write_text(json.dumps(embedding.params, sort_keys=True, indent=1), encoding="utf-8")
    if svg_path is None:
        return len(set(labels))
    return svg.scatter(embedding.coords, list(labels), svg_path, title)
