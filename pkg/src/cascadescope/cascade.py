"""Retweet timing statistics and retweet-cascade digraphs."""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Iterable, Literal, Sequence

import numpy as np

from .ingest import TweetRecord, iso_utc, parse_iso_utc

# benchmark time-to-retweet points of the nine published graphs, seconds
TIME_POINTS: list[tuple[str, float]] = [
    ("G1", 19.0),
    ("G2", 328.0),
    ("G3", 591.0),
    ("G4", 885.6),
    ("G5", 3600.0),
    ("G6", 10000.0),
    ("G7", 13320.0),
    ("G8", 86400.0),
    ("G9", 604800.0),
]
LOG_BIN_WIDTH = 0.1
Rule = Literal["nearest", "at_most"]


class MalformedEventError(ValueError):
    pass


class QuarantinedEventError(ValueError):
    """Retweet timestamp precedes the original tweet."""


@dataclass(frozen=True)
class RetweetEvent:
    tweet_id: str
    retweeter_id: str
    original_author_id: str
    original_created_at: datetime
    retweet_created_at: datetime
    delta_seconds: float


def time_to_retweet(record: TweetRecord) -> RetweetEvent:
    src = record.retweet_source
    if src is None or src.source_created_at is None:
        raise MalformedEventError(f"tweet {record.tweet_id}: no retweet source timestamp")
    delta = (record.created_at - src.source_created_at).total_seconds()
    if delta < 0:
        raise QuarantinedEventError(f"tweet {record.tweet_id}: retweet precedes original by {-delta:.0f} s")
    return RetweetEvent(
        record.tweet_id, record.author_id, src.source_author_id, src.source_created_at, record.created_at, delta
    )


def retweet_events(records: Iterable[TweetRecord]) -> tuple[list[RetweetEvent], int, int]:
    """Events for all retweets plus the counts of quarantined and malformed ones."""
    events, quarantined, malformed = [], 0, 0
    for r in records:
        if r.retweet_source is None:
            continue
        try:
            events.append(time_to_retweet(r))
        except QuarantinedEventError:
            quarantined += 1
        except MalformedEventError:
            malformed += 1
    return events, quarantined, malformed


def log_bin(delta: float) -> int:
    """Index ``b`` with ``10**(b/10) <= max(delta, 1) < 10**((b+1)/10)``."""
    x = max(float(delta), 1.0)
    b = math.floor(10.0 * math.log10(x))
    while 10.0 ** ((b + 1) / 10.0) <= x:
        b += 1
    while b > 0 and 10.0 ** (b / 10.0) > x:
        b -= 1
    return b


@dataclass
class RetweetStats:
    n: int
    median_s: float
    mean_s: float
    linear_bin_s: float
    linear_hist: dict[int, int]
    log_hist: dict[int, int]

    def log_hist_rows(self) -> list[tuple[float, float, int]]:
        return [(b * LOG_BIN_WIDTH, (b + 1) * LOG_BIN_WIDTH, c) for b, c in sorted(self.log_hist.items())]

    def linear_hist_rows(self) -> list[tuple[float, float, int]]:
        w = self.linear_bin_s
        return [(b * w, (b + 1) * w, c) for b, c in sorted(self.linear_hist.items())]


def retweet_stats(deltas: Iterable[float] | Iterable[RetweetEvent], linear_bin_s: float = 3600.0) -> RetweetStats:
    """Median (lower middle for even counts), mean and two histograms.

    The log histogram bins ``log10(max(delta, 1))`` in 0.1-decade steps; the
    linear one uses ``linear_bin_s``-wide bins. Both are sparse dicts keyed by
    bin index.
    """
    vals = sorted(e.delta_seconds if isinstance(e, RetweetEvent) else float(e) for e in deltas)
    if not vals:
        raise ValueError("no retweet events")
    lin: dict[int, int] = {}
    logh: dict[int, int] = {}
    for v in vals:
        lb = int(v // linear_bin_s)
        lin[lb] = lin.get(lb, 0) + 1
        b = log_bin(v)
        logh[b] = logh.get(b, 0) + 1
    return RetweetStats(
        n=len(vals),
        median_s=vals[(len(vals) - 1) // 2],
        mean_s=math.fsum(vals) / len(vals),
        linear_bin_s=linear_bin_s,
        linear_hist=lin,
        log_hist=logh,
    )


@dataclass
class Edge:
    multiplicity: int = 0
    deltas: list[float] = field(default_factory=list)

    @property
    def mean_delta(self) -> float:
        return math.fsum(self.deltas) / len(self.deltas)


@dataclass
class CascadeGraph:
    label: str
    time_point_s: float | None
    edges: dict[tuple[str, str], Edge]

    @property
    def nodes(self) -> list[str]:
        return sorted({u for e in self.edges for u in e})

    @property
    def self_loops(self) -> list[str]:
        return sorted(u for u, v in self.edges if u == v)

    @property
    def n_events(self) -> int:
        return sum(e.multiplicity for e in self.edges.values())

    def degree(self) -> dict[str, int]:
        """Total (in + out) degree on the collapsed graph; a self-loop counts twice."""
        deg: dict[str, int] = {}
        for u, v in self.edges:
            deg[u] = deg.get(u, 0) + 1
            deg[v] = deg.get(v, 0) + 1
        return deg

    @classmethod
    def from_events(cls, events: Iterable[RetweetEvent], label: str = "", time_point_s: float | None = None) -> "CascadeGraph":
        edges: dict[tuple[str, str], Edge] = {}
        for ev in events:
            e = edges.setdefault((ev.original_author_id, ev.retweeter_id), Edge())
            e.multiplicity += 1
            e.deltas.append(ev.delta_seconds)
        return cls(label, time_point_s, edges)


def select_events(events: Sequence[RetweetEvent], time_point_s: float, max_edges: int = 700, rule: Rule = "nearest") -> list[RetweetEvent]:
    if not events:
        raise ValueError("no events")
    if rule == "nearest":
        ranked = sorted(events, key=lambda e: (abs(e.delta_seconds - time_point_s), e.delta_seconds, e.retweeter_id))
    elif rule == "at_most":
        pool = [e for e in events if e.delta_seconds <= time_point_s]
        ranked = sorted(pool, key=lambda e: (-e.retweet_created_at.timestamp(), e.delta_seconds, e.retweeter_id))
    else:
        raise ValueError(f"unknown rule {rule!r}")
    if len(ranked) < max_edges:
        warnings.warn(f"only {len(ranked)} events available for {max_edges} edges", stacklevel=3)
    return ranked[:max_edges]


def build_cascade(
    events: Sequence[RetweetEvent],
    time_point_s: float,
    max_edges: int = 700,
    rule: Rule = "nearest",
    label: str = "",
) -> CascadeGraph:
    """Cascade digraph (original author -> retweeter) from ``max_edges`` events.

    ``nearest`` takes the events whose delay is closest to the time point;
    ``at_most`` the most recent events with delay not above it. Repeated
    author/retweeter pairs collapse into one edge with a multiplicity.
    """
    chosen = select_events(events, time_point_s, max_edges, rule)
    return CascadeGraph.from_events(chosen, label, time_point_s)


@dataclass
class GraphStats:
    label: str
    time_point_s: float | None
    n_nodes: int
    n_edges: int
    n_events: int
    density: float
    top: list[tuple[str, int]]
    self_loops: int


def graph_stats(g: CascadeGraph, top_n: int = 3) -> GraphStats:
    nodes = g.nodes
    n = len(nodes)
    if n == 0:
        raise ValueError("graph is empty")
    m = len(g.edges)
    density = 0.0 if n < 2 else m / (n * (n - 1))
    deg = g.degree()
    top = sorted(deg.items(), key=lambda kv: (-kv[1], kv[0]))[:top_n]
    return GraphStats(g.label, g.time_point_s, n, m, g.n_events, density, top, len(g.self_loops))


def write_edges_csv(g: CascadeGraph, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["source", "target", "delta_s", "multiplicity"])
        for (u, v), e in sorted(g.edges.items()):
            w.writerow([u, v, f"{e.mean_delta:.3f}", e.multiplicity])


def write_stats_csv(stats: Sequence[GraphStats], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["graph", "ranking_speed", "time_point_s", "density", "nodes", "edges", "events",
             "1st", "2nd", "3rd", "1st_user", "2nd_user", "3rd_user"]
        )
        for rank, s in enumerate(stats, start=1):
            degs = [d for _, d in s.top] + [""] * (3 - len(s.top))
            users = [u for u, _ in s.top] + [""] * (3 - len(s.top))
            tp = "" if s.time_point_s is None else f"{s.time_point_s:g}"
            w.writerow([s.label, rank, tp, f"{s.density:.6f}", s.n_nodes, s.n_edges, s.n_events, *degs, *users])


def write_events_csv(events: Sequence[RetweetEvent], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tweet_id", "retweeter_id", "original_author_id", "original_created_at", "retweet_created_at", "delta_s"])
        for e in events:
            w.writerow(
                [e.tweet_id, e.retweeter_id, e.original_author_id, iso_utc(e.original_created_at),
                 iso_utc(e.retweet_created_at), f"{e.delta_seconds:.0f}"]
            )


def read_events_csv(path: str | Path) -> list[RetweetEvent]:
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            t_src = parse_iso_utc(row["original_created_at"])
            t_rt = parse_iso_utc(row["retweet_created_at"])
            out.append(
                RetweetEvent(row["tweet_id"], row["retweeter_id"], row["original_author_id"], t_src, t_rt,
                             (t_rt - t_src).total_seconds())
            )
    return out


def histogram_arrays(rows: Sequence[tuple[float, float, int]]) -> tuple[np.ndarray, np.ndarray]:
    """Dense edges/counts from sparse histogram rows (gaps filled with zero)."""
    if not rows:
        return np.array([0.0, 1.0]), np.array([0])
    width = rows[0][1] - rows[0][0]
    first, last = rows[0][0], rows[-1][0]
    nb = int(round((last - first) / width)) + 1
    counts = np.zeros(nb, dtype=np.int64)
    for lo, _, c in rows:
        counts[int(round((lo - first) / width))] = c
    return first + width * np.arange(nb + 1), counts
