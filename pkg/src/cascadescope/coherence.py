"""C_v topic coherence over boolean sliding windows.

Word probabilities come from boolean document windows; each topic word gets a
context vector of NPMI values against the topic's word set, and the topic
score is the mean cosine between each context vector and their sum.
"""
from __future__ import annotations

import csv
import math
import warnings
from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

DEFAULT_WINDOW = 110
DEFAULT_EPSILON = 1e-12


@dataclass
class WindowStats:
    window_width: int
    n_windows: int
    occurrence: Counter = field(default_factory=Counter)
    co_occurrence: Counter = field(default_factory=Counter)
    epsilon: float = DEFAULT_EPSILON

    def occ(self, w: str) -> int:
        return self.occurrence.get(w, 0)

    def co(self, w1: str, w2: str) -> int:
        if w1 == w2:
            return self.occ(w1)
        key = (w1, w2) if w1 < w2 else (w2, w1)
        return self.co_occurrence.get(key, 0)

    def p(self, w: str) -> float:
        return self.occ(w) / self.n_windows

    def merge(self, other: "WindowStats") -> "WindowStats":
        if other.window_width != self.window_width:
            raise ValueError("cannot merge stats with different window widths")
        return WindowStats(
            self.window_width,
            self.n_windows + other.n_windows,
            self.occurrence + other.occurrence,
            self.co_occurrence + other.co_occurrence,
            self.epsilon,
        )


def sliding_windows(
    documents: Iterable[Sequence[str]],
    width: int = DEFAULT_WINDOW,
    terms: Iterable[str] | None = None,
    epsilon: float = DEFAULT_EPSILON,
) -> WindowStats:
    """Count boolean window occurrences, never crossing document boundaries.

    A document of length L contributes ``max(1, L - width + 1)`` windows;
    documents without tokens contribute none. ``terms`` restricts counting
    to a word subset (window totals are unaffected).
    """
    if width < 1:
        raise ValueError("width must be >= 1")
    keep = None if terms is None else set(terms)
    occ: Counter = Counter()
    co: Counter = Counter()
    n_windows = 0
    for tokens in documents:
        L = len(tokens)
        if L == 0:
            continue
        for start in range(max(1, L - width + 1)):
            words = set(tokens[start : start + width])
            if keep is not None:
                words &= keep
            n_windows += 1
            ordered = sorted(words)
            occ.update(ordered)
            co.update(combinations(ordered, 2))
    if n_windows == 0:
        raise ValueError("corpus has no windows")
    return WindowStats(width, n_windows, occ, co, epsilon)


def npmi(w1: str, w2: str, stats: WindowStats) -> float:
    o1, o2 = stats.occ(w1), stats.occ(w2)
    if o1 == 0 or o2 == 0:
        warnings.warn(f"unseen word in npmi({w1!r}, {w2!r}); contributing 0", stacklevel=2)
        return 0.0
    n = stats.n_windows
    p1, p2 = o1 / n, o2 / n
    p12 = stats.co(w1, w2) / n + stats.epsilon
    return math.log(p12 / (p1 * p2)) / -math.log(p12)


def _cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.clip(u @ v / (nu * nv), -1.0, 1.0))


def topic_cv(words: Iterable[str], stats: WindowStats) -> float | None:
    """C_v for one word set; None when no word occurs in the corpus."""
    ws = sorted(set(words))
    if not any(stats.occ(w) for w in ws):
        return None
    m = len(ws)
    vec = np.zeros((m, m))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for i in range(m):
            for j in range(i, m):
                vec[i, j] = vec[j, i] = npmi(ws[i], ws[j], stats)
    total = vec.sum(axis=0)
    return float(np.mean([_cosine(vec[i], total) for i in range(m)]))


@dataclass
class CoherenceResult:
    per_topic: list[float | None]

    @property
    def mean(self) -> float:
        vals = [s for s in self.per_topic if s is not None]
        return float(np.mean(vals)) if vals else float("nan")

    @property
    def undefined(self) -> list[int]:
        return [k for k, s in enumerate(self.per_topic) if s is None]


def c_v(top_terms: Sequence[Sequence[str]], stats: WindowStats) -> CoherenceResult:
    result = CoherenceResult([topic_cv(ws, stats) for ws in top_terms])
    if result.undefined:
        warnings.warn(f"topics without in-corpus terms excluded from mean: {result.undefined}", stacklevel=2)
    return result


def write_coherence_csv(rows: Iterable[tuple[int, CoherenceResult]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["K", "topic", "score"])
        summaries = []
        for k, res in rows:
            for t, s in enumerate(res.per_topic):
                w.writerow([k, t, "" if s is None else f"{s:.6f}"])
            summaries.append((k, res.mean))
        for k, mean in summaries:
            w.writerow([k, "mean", f"{mean:.6f}"])
