"""EWMA smoothing and greedy binary segmentation with an L2 cost."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path
from typing import Iterable, Literal, Sequence

import numpy as np

from .ingest import floor_minute, iso_utc


def ewma(series: Sequence[float], span: float) -> np.ndarray:
    """Unadjusted exponentially weighted mean, alpha = 2 / (span + 1)."""
    if span < 1:
        raise ValueError("span must be >= 1")
    x = np.asarray(series, dtype=float)
    if x.size == 0:
        raise ValueError("empty series")
    alpha = 2.0 / (span + 1.0)
    out = np.empty_like(x)
    out[0] = x[0]
    for t in range(1, len(x)):
        out[t] = alpha * x[t] + (1.0 - alpha) * out[t - 1]
    return out


def l2_cost(segment: Sequence[float]) -> float:
    y = np.asarray(segment, dtype=float)
    if y.size == 0:
        raise ValueError("empty segment")
    return float(np.sum((y - y.mean()) ** 2))


@dataclass
class SegmentationResult:
    breakpoints: list[int]
    segment_costs: list[float]
    total_cost: float
    stop_rule: Literal["fixed_K", "penalty"]
    penalty: float | None = None
    n: int = 0
    segment_means: list[float] = field(default_factory=list)

    def segments(self) -> list[tuple[int, int]]:
        """Half-open ``[start, end)`` index ranges tiling the series."""
        edges = [0, *self.breakpoints, self.n]
        return list(zip(edges[:-1], edges[1:]))


class _Prefix:
    def __init__(self, y: np.ndarray):
        self.s1 = np.concatenate([[0.0], np.cumsum(y)])
        self.s2 = np.concatenate([[0.0], np.cumsum(y * y)])

    def best_split(self, a: int, b: int) -> tuple[float, int]:
        """Largest cost reduction over splits of [a, b); (-inf, -1) if unsplittable."""
        if b - a < 2:
            return -np.inf, -1
        taus = np.arange(a + 1, b)
        nl = (taus - a).astype(float)
        nr = (b - taus).astype(float)
        ml = (self.s1[taus] - self.s1[a]) / nl
        mr = (self.s1[b] - self.s1[taus]) / nr
        gain = nl * nr / (b - a) * (ml - mr) ** 2
        i = int(np.argmax(gain))
        return float(gain[i]), int(taus[i])


def binseg(series: Sequence[float], n_bkps: int | None = None, penalty: float | None = None) -> SegmentationResult:
    """Greedy binary segmentation.

    Exactly one of ``n_bkps`` (stop after that many splits) or ``penalty``
    (split only while the best cost reduction exceeds it) must be given.
    Each step splits the segment offering the largest reduction.
    """
    if (n_bkps is None) == (penalty is None):
        raise ValueError("give exactly one of n_bkps or penalty")
    y = np.asarray(series, dtype=float)
    n = len(y)
    if n < 2:
        raise ValueError("series needs at least 2 points")
    if n_bkps is not None and not 0 <= n_bkps <= n - 1:
        raise ValueError(f"n_bkps must be in [0, {n - 1}]")
    if penalty is not None and penalty < 0:
        raise ValueError("penalty must be >= 0")

    prefix = _Prefix(y - y.mean())
    segments = {(0, n): prefix.best_split(0, n)}
    bkps: list[int] = []
    while True:
        if n_bkps is not None and len(bkps) >= n_bkps:
            break
        (a, b), (gain, tau) = max(segments.items(), key=lambda kv: (kv[1][0], -kv[0][0]))
        if tau < 0:
            break
        if penalty is not None and not gain > penalty:
            break
        del segments[(a, b)]
        segments[(a, tau)] = prefix.best_split(a, tau)
        segments[(tau, b)] = prefix.best_split(tau, b)
        bkps.append(tau)

    bkps.sort()
    edges = [0, *bkps, n]
    costs = [l2_cost(y[s:e]) for s, e in zip(edges[:-1], edges[1:])]
    means = [float(y[s:e].mean()) for s, e in zip(edges[:-1], edges[1:])]
    total = sum(costs) + (penalty * len(bkps) if penalty is not None else 0.0)
    return SegmentationResult(
        bkps, costs, total, "fixed_K" if n_bkps is not None else "penalty", penalty, n, means
    )


def event_alignment(result: SegmentationResult, event_time: datetime, t0: datetime) -> int | None:
    """Signed minutes from the event to the nearest breakpoint (earlier wins ties).

    A breakpoint ``tau`` is the first minute of the new segment, i.e.
    ``t0 + tau`` minutes. Returns None when there are no breakpoints.
    """
    if not result.breakpoints:
        return None
    event_idx = int((floor_minute(event_time) - floor_minute(t0)).total_seconds() // 60)
    nearest = min(result.breakpoints, key=lambda b: (abs(b - event_idx), b))
    return nearest - event_idx


def write_breakpoints_csv(rows: Iterable[tuple[str, datetime, SegmentationResult]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["series", "breakpoint_minute_utc", "segment_mean_before", "segment_mean_after"])
        for name, t0, res in rows:
            for i, b in enumerate(res.breakpoints):
                w.writerow(
                    [
                        name,
                        iso_utc(t0 + timedelta(minutes=b)),
                        f"{res.segment_means[i]:.6f}",
                        f"{res.segment_means[i + 1]:.6f}",
                    ]
                )
