"""Kamada–Kawai stress layout by per-node Newton coordinate descent."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from numba import njit
from scipy.sparse.csgraph import connected_components, shortest_path

COMPONENT_GAP = 0.25
GRAD_TOL = 1e-10
MAX_BACKTRACK = 40


@dataclass
class Layout:
    positions: dict[Hashable, tuple[float, float]]
    stress: float
    initial_stress: float
    history: list[float] = field(default_factory=list)
    components: list[list[Hashable]] = field(default_factory=list)

    def array(self, nodes: Sequence[Hashable]) -> np.ndarray:
        return np.array([self.positions[v] for v in nodes], dtype=float)


def _index(nodes: Sequence[Hashable], edges: Iterable[tuple[Hashable, Hashable]]):
    idx = {v: i for i, v in enumerate(nodes)}
    rows, cols = [], []
    for u, v in edges:
        if u == v:
            continue
        rows.append(idx[u])
        cols.append(idx[v])
    n = len(nodes)
    adj = sp.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n)).tocsr()
    adj = ((adj + adj.T) > 0).astype(np.float64)
    return idx, adj


def hop_distances(nodes: Sequence[Hashable], edges: Iterable[tuple[Hashable, Hashable]]) -> np.ndarray:
    """Undirected BFS hop distances (inf between components)."""
    _, adj = _index(nodes, edges)
    return shortest_path(adj, method="D", directed=False, unweighted=True)


def _targets(d: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Desired lengths ``L d_ij`` and spring constants ``1/d_ij^2`` for one component."""
    finite = np.isfinite(d)
    diam = d[finite].max() if d.size else 0.0
    length = 1.0 / diam if diam > 0 else 1.0
    with np.errstate(divide="ignore"):
        k = np.where(finite & (d > 0), 1.0 / d**2, 0.0)
    target = np.where(finite, length * d, 0.0)
    return target, k


def stress_matrix(x: np.ndarray, d: np.ndarray) -> float:
    """Stress of positions ``x`` against hop distances ``d``; pairs at inf distance are skipped.

    ``L`` is taken per connected block, so pass one component or a
    block-diagonal distance matrix.
    """
    n = x.shape[0]
    total = 0.0
    seen = np.zeros(n, dtype=bool)
    for s in range(n):
        if seen[s]:
            continue
        comp = np.flatnonzero(np.isfinite(d[s]))
        seen[comp] = True
        if comp.size < 2:
            continue
        dc = d[np.ix_(comp, comp)]
        target, k = _targets(dc)
        xc = x[comp]
        dist = np.sqrt(((xc[:, None, :] - xc[None, :, :]) ** 2).sum(-1))
        iu = np.triu_indices(comp.size, 1)
        total += float((k[iu] * (dist[iu] - target[iu]) ** 2).sum())
    return total


def stress(positions: dict[Hashable, Sequence[float]], nodes: Sequence[Hashable], edges: Iterable[tuple[Hashable, Hashable]]) -> float:
    edges = list(edges)
    d = hop_distances(nodes, edges)
    x = np.array([positions[v] for v in nodes], dtype=float)
    return stress_matrix(x, d)


@njit(cache=True)
def _node_energy(x, target, k, m, px, py):
    e = 0.0
    for i in range(x.shape[0]):
        if i == m:
            continue
        dist = math.sqrt((px - x[i, 0]) ** 2 + (py - x[i, 1]) ** 2)
        e += k[m, i] * (dist - target[m, i]) ** 2
    return e


@njit(cache=True)
def _pair_coef(k, t, dist):
    return 2.0 * k * (1.0 - t / max(dist, 1e-300))


@njit(cache=True)
def _descent(x, target, k, max_steps, tol, gains):
    """Per-node Newton moves, gradient backtracking as fallback.

    A move is accepted only if it lowers the node's (hence the total)
    stress. ``gains`` receives the decrease of each accepted move; the
    number of accepted moves is returned.
    """
    n = x.shape[0]
    grad = np.zeros((n, 2))
    for m in range(n):
        for i in range(n):
            if i != m:
                dx, dy = x[m, 0] - x[i, 0], x[m, 1] - x[i, 1]
                c = _pair_coef(k[m, i], target[m, i], math.sqrt(dx * dx + dy * dy))
                grad[m, 0] += c * dx
                grad[m, 1] += c * dy
    stuck = np.zeros(n, dtype=np.bool_)
    accepted = 0
    for _ in range(max_steps):
        m, best = -1, -1.0
        for i in range(n):
            if not stuck[i]:
                g = math.hypot(grad[i, 0], grad[i, 1])
                if g > best:
                    m, best = i, g
        if m < 0 or best < tol:
            break
        p0x, p0y = x[m, 0], x[m, 1]
        e0 = _node_energy(x, target, k, m, p0x, p0y)
        hxx = hyy = hxy = ksum = 0.0
        for i in range(n):
            if i == m:
                continue
            dx, dy = p0x - x[i, 0], p0y - x[i, 1]
            d = max(math.sqrt(dx * dx + dy * dy), 1e-300)
            d3 = d * d * d
            kk, t = k[m, i], target[m, i]
            hxx += 2.0 * kk * (1.0 - t * dy * dy / d3)
            hyy += 2.0 * kk * (1.0 - t * dx * dx / d3)
            hxy += 2.0 * kk * t * dx * dy / d3
            ksum += kk
        gx, gy = grad[m, 0], grad[m, 1]
        ok = False
        nx, ny, e1 = p0x, p0y, e0
        det = hxx * hyy - hxy * hxy
        if det > 0.0 and hxx > 0.0:
            cx = p0x - (hyy * gx - hxy * gy) / det
            cy = p0y - (hxx * gy - hxy * gx) / det
            if math.isfinite(cx) and math.isfinite(cy):
                ec = _node_energy(x, target, k, m, cx, cy)
                if ec < e0:
                    ok, nx, ny, e1 = True, cx, cy, ec
        if not ok:
            eta = 1.0 / max(1e-12, 2.0 * ksum)
            for _b in range(MAX_BACKTRACK):
                cx, cy = p0x - eta * gx, p0y - eta * gy
                ec = _node_energy(x, target, k, m, cx, cy)
                if ec < e0:
                    ok, nx, ny, e1 = True, cx, cy, ec
                    break
                eta *= 0.5
        if not ok:
            stuck[m] = True
            continue
        # update every gradient for the pairs involving m
        grad[m, 0] = 0.0
        grad[m, 1] = 0.0
        for i in range(n):
            if i == m:
                continue
            kk, t = k[m, i], target[m, i]
            odx, ody = p0x - x[i, 0], p0y - x[i, 1]
            ndx, ndy = nx - x[i, 0], ny - x[i, 1]
            oc = _pair_coef(kk, t, math.sqrt(odx * odx + ody * ody))
            nc = _pair_coef(kk, t, math.sqrt(ndx * ndx + ndy * ndy))
            grad[i, 0] += oc * odx - nc * ndx
            grad[i, 1] += oc * ody - nc * ndy
            grad[m, 0] += nc * ndx
            grad[m, 1] += nc * ndy
        x[m, 0], x[m, 1] = nx, ny
        gains[accepted] = e0 - e1
        accepted += 1
        stuck[:] = False
    return accepted


def _pack(blocks: list[np.ndarray], gap: float = COMPONENT_GAP) -> list[np.ndarray]:
    """Shelf-pack component layouts left to right; bounding boxes never overlap."""
    shifted = [b - b.min(axis=0) for b in blocks]
    sizes = [b.max(axis=0) for b in shifted]
    area = sum((w + gap) * (h + gap) for w, h in sizes)
    width = max(max((w for w, _ in sizes), default=0.0), math.sqrt(area))
    out = []
    cx = cy = row_h = 0.0
    for b, (w, h) in zip(shifted, sizes):
        if cx > 0 and cx + w > width:
            cx, cy = 0.0, cy + row_h + gap
            row_h = 0.0
        out.append(b + np.array([cx, cy]))
        cx += w + gap
        row_h = max(row_h, h)
    return out


def kamada_kawai_layout(
    nodes: Sequence[Hashable],
    edges: Iterable[tuple[Hashable, Hashable]],
    iterations: int = 200,
    seed: int = 0,
    tol: float = GRAD_TOL,
) -> Layout:
    """Lay out an undirected view of the graph by stress minimization.

    Each component gets ``L = 1 / diameter`` and at most ``iterations * n``
    single-node updates; every accepted update lowers the stress, and the
    running total is recorded in ``history``. Components are then packed.
    """
    nodes = list(nodes)
    edges = list(edges)
    _, adj = _index(nodes, edges)
    n_comp, labels = connected_components(adj, directed=False)
    comps = [np.flatnonzero(labels == c) for c in range(n_comp)]
    comps.sort(key=lambda c: (-c.size, c[0]))
    rng = np.random.default_rng(seed)

    states = []
    for c in comps:
        d = shortest_path(adj[c][:, c], method="D", directed=False, unweighted=True)
        x = rng.uniform(0.0, 1.0, size=(c.size, 2))
        states.append((c, d, x))
    initial = sum(stress_matrix(x, d) for _, d, x in states)

    history = [initial]
    current = initial
    blocks = []
    for c, d, x in states:
        if c.size > 1:
            target, k = _targets(d)
            steps = iterations * c.size
            gains = np.empty(steps)
            done = _descent(x, target, k, steps, tol, gains)
            history.extend((current - np.cumsum(gains[:done])).tolist())
            current = history[-1] if done else current
        blocks.append(x)
    packed = _pack(blocks)
    positions = {}
    for c, b in zip(comps, packed):
        for i, p in zip(c, b):
            positions[nodes[i]] = (float(p[0]), float(p[1]))
    final = sum(stress_matrix(b, d) for b, (_, d, _) in zip(packed, states))
    return Layout(positions, final, initial, history, [[nodes[i] for i in c] for c in comps])
