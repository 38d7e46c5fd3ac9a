"""Deterministic synthetic tweet archives and cascade event sets."""
from __future__ import annotations

import math
from datetime import datetime, timedelta, timezone

import numpy as np

from .cascade import RetweetEvent
from .ingest import RetweetSource, TweetRecord

START = datetime(2020, 3, 24, 21, 0, 0, tzinfo=timezone.utc)

# median 10,332 s and log-sd 1.7 put the mean near 12 h
DELAY_MEDIAN_S = 10_332.0
DELAY_LOG_SD = 1.7

THEMES: dict[str, list[str]] = {
    "care": ["hospital", "nurse", "doctors", "icu", "bed", "ventilator", "shift", "ward", "staff", "patients",
             "masks", "gloves", "shortage", "supplies", "protective"],
    "symptoms": ["fever", "cough", "tested positive", "symptoms", "breathing", "quarantine", "isolation",
                 "exposure", "serious condition", "recovered", "family", "sick", "home", "days"],
    "economy": ["market", "stocks", "jobs", "unemployment", "business", "stimulus", "economy", "workers",
                "rent", "closed", "restaurants", "payments", "bailout", "layoffs"],
    "policy": ["lockdown", "governor", "president", "shelter", "order", "schools", "briefing", "federal",
               "state", "response", "press", "announced", "guidelines", "distancing"],
    "community": ["help", "neighbors", "donate", "volunteers", "food", "delivery", "thank", "heroes",
                  "support", "stay", "safe", "together", "kindness", "grocery"],
}
FILLER = ["the", "and", "is", "to", "of", "we", "this", "are", "in", "for", "it", "now", "all", "our", "so"]
# theme mix before and after the injected regime change
MIX_BEFORE = np.array([0.15, 0.15, 0.30, 0.30, 0.10])
MIX_AFTER = np.array([0.35, 0.35, 0.05, 0.10, 0.15])


def _text(rng: np.random.Generator, mix: np.ndarray) -> str:
    names = list(THEMES)
    theme = names[rng.choice(len(names), p=mix)]
    words = THEMES[theme]
    n = int(rng.integers(6, 14))
    out = []
    for _ in range(n):
        if rng.random() < 0.3:
            out.append(FILLER[int(rng.integers(len(FILLER)))])
        else:
            out.append(words[int(rng.integers(len(words)))])
    if rng.random() < 0.2:
        out.append(f"@user{int(rng.integers(1000))}")
    if rng.random() < 0.25:
        out.append(f"https://t.co/{int(rng.integers(1 << 30)):x}")
    if rng.random() < 0.1:
        out.append(str(int(rng.integers(1, 500))))
    if rng.random() < 0.3:
        out.insert(0, "Covid19")
    return " ".join(out)


def synthetic_archive(
    n: int = 10_000,
    seed: int = 0,
    start: datetime = START,
    span_hours: float = 12.0,
    original_frac: float = 0.23,
    prefix_frac: float = 0.02,
    n_inverted: int = 5,
    n_users: int = 3000,
    shift_at: float = 0.4,
) -> list[TweetRecord]:
    """Tweets spread over ``span_hours`` with a topic-mix change at ``shift_at``.

    About ``original_frac`` are originals, ``prefix_frac`` carry an "RT @"
    prefix without retweet metadata, the rest are retweets whose source is
    an earlier original when one exists. ``n_inverted`` retweets get a
    source timestamp after their own.
    """
    rng = np.random.default_rng(seed)
    span_s = span_hours * 3600.0
    offsets = np.sort(rng.uniform(0.0, span_s, size=n))
    kinds = rng.choice(3, size=n, p=[original_frac, prefix_frac, 1.0 - original_frac - prefix_frac])
    kinds[0] = 0
    # heavy-tailed author popularity gives hub nodes in cascades
    pop = 1.0 / np.arange(1, n_users + 1) ** 1.1
    pop /= pop.sum()
    inverted = set(rng.choice(np.flatnonzero(kinds == 2), size=min(n_inverted, int((kinds == 2).sum())), replace=False).tolist())

    records: list[TweetRecord] = []
    originals: list[TweetRecord] = []
    for i in range(n):
        t = start + timedelta(seconds=int(offsets[i]))
        mix = MIX_BEFORE if offsets[i] < shift_at * span_s else MIX_AFTER
        tid = f"{1240000000000000000 + i}"
        author = f"u{int(rng.integers(n_users))}"
        lang = "en" if rng.random() < 0.95 else "und"
        if kinds[i] == 0:
            rec = TweetRecord(tid, t, _text(rng, mix), f"u{int(rng.choice(n_users, p=pop))}", "", lang)
            originals.append(rec)
        elif kinds[i] == 1:
            rec = TweetRecord(tid, t, f"RT @user{int(rng.integers(1000))}: {_text(rng, mix)}", author, "", lang)
        else:
            delay = float(np.exp(math.log(DELAY_MEDIAN_S) + DELAY_LOG_SD * rng.standard_normal()))
            src_t = t - timedelta(seconds=round(delay))
            if i in inverted:
                src_t = t + timedelta(seconds=int(rng.integers(60, 3600)))
            if originals and rng.random() < 0.5:
                src = originals[int(rng.integers(len(originals)))]
                src_author, src_text = src.author_id, src.text
                if i not in inverted:
                    src_t = min(src.created_at, t)
            else:
                src_author, src_text = f"u{int(rng.choice(n_users, p=pop))}", _text(rng, mix)
            body = f"RT @{src_author}: {src_text}"
            rec = TweetRecord(tid, t, body, author, "", lang, RetweetSource(src_author, src_t, src_text))
        records.append(rec)
    return records


def implied_edges(density: float, n_nodes: int) -> int:
    """Collapsed directed edge count implied by a printed density."""
    return int(round(density * n_nodes * (n_nodes - 1)))


def table_events(
    density: float,
    n_nodes: int,
    time_point_s: float,
    n_events: int = 700,
    seed: int = 0,
    label: str = "G",
) -> list[RetweetEvent]:
    """``n_events`` retweet events spanning exactly ``n_nodes`` users.

    The events collapse onto ``implied_edges(density, n_nodes)`` distinct
    author-to-retweeter edges; the surplus events repeat existing pairs.
    Every author roots a star, so nodes = authors + edges.
    """
    n_edges = implied_edges(density, n_nodes)
    n_authors = n_nodes - n_edges
    if not (1 <= n_authors <= n_edges <= n_events):
        raise ValueError(f"cannot place {n_edges} edges on {n_nodes} nodes with {n_events} events")
    rng = np.random.default_rng(seed)
    owner = np.concatenate([np.arange(n_authors), rng.integers(0, n_authors, size=n_edges - n_authors)])
    pairs = [(f"{label}a{int(a)}", f"{label}r{j}") for j, a in enumerate(owner)]
    extra = rng.integers(0, n_edges, size=n_events - n_edges)
    chosen = pairs + [pairs[int(j)] for j in extra]
    t0 = START
    events = []
    for j, (author, retweeter) in enumerate(chosen):
        delta = max(0.0, time_point_s + float(rng.uniform(-0.5, 0.5)))
        events.append(
            RetweetEvent(f"{label}t{j}", retweeter, author, t0, t0 + timedelta(seconds=delta), delta)
        )
    return events


def cluster_fixture(n_per: int = 100, dim: int = 10, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Three well-separated nonnegative Gaussian clusters (rows, labels)."""
    rng = np.random.default_rng(seed)
    centers = rng.uniform(0.0, 1.0, size=(3, dim)) * 4.0
    x = np.vstack([np.abs(c + 0.15 * rng.standard_normal((n_per, dim))) for c in centers])
    y = np.repeat(np.arange(3), n_per)
    return x, y
