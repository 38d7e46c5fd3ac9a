"""Keyword pattern matching and per-minute trend series."""
from __future__ import annotations

import csv
import re
import warnings
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .ingest import floor_minute, iso_utc

DEFAULT_PATTERNS: dict[str, str] = {
    "bed": r"bed",
    "hospital": r"hospital",
    "mask": r"mask",
    "icu": r"icu",
    "help": r"help",
    "nurse": r"nurse",
    "doctors": r"doctors",
    "vent": r"vent",
    "test_pos": r"test(ed)?\s+positive",
    "serious_cond": r"serious\s+condition",
    "exposure": r"exposure",
    "cough": r"cough",
    "fever": r"fever",
}


class PatternConfigError(ValueError):
    pass


class EmptySeriesError(ValueError):
    pass


class PatternSet:
    """Named regular expressions, compiled once at construction."""

    def __init__(self, patterns: Mapping[str, str] | None = None):
        patterns = dict(DEFAULT_PATTERNS if patterns is None else patterns)
        self.sources = patterns
        self.compiled: dict[str, re.Pattern] = {}
        for label, source in patterns.items():
            try:
                self.compiled[label] = re.compile(source)
            except re.error as exc:
                raise PatternConfigError(f"pattern {label!r} does not compile: {exc}") from None

    @property
    def labels(self) -> list[str]:
        return list(self.compiled)

    @classmethod
    def from_file(cls, path: str | Path) -> "PatternSet":
        """Read ``label = "regex"`` lines; the regex is taken verbatim (no escapes)."""
        patterns: dict[str, str] = {}
        for n, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#") or line.startswith("["):
                continue
            m = re.fullmatch(r"([A-Za-z0-9_\-]+)\s*=\s*(['\"])(.*)\2", line)
            if not m:
                raise PatternConfigError(f"{path}:{n}: expected label = \"regex\"")
            label = m.group(1)
            if label in patterns:
                raise PatternConfigError(f"{path}:{n}: duplicate label {label!r}")
            patterns[label] = m.group(3)
        return cls(patterns)


def match_patterns(text: str, patterns: PatternSet) -> set[str]:
    return {label for label, rx in patterns.compiled.items() if rx.search(text)}


@dataclass
class TimeSeries:
    name: str
    t0: datetime
    values: np.ndarray

    def __len__(self) -> int:
        return len(self.values)

    def minutes(self) -> list[datetime]:
        return [self.t0 + timedelta(minutes=i) for i in range(len(self.values))]


def bucket_counts(
    items: Iterable[tuple[datetime, Iterable[str]]],
    labels: Sequence[str],
    t0: datetime | None = None,
    t_end: datetime | None = None,
) -> dict[str, TimeSeries]:
    """Count items per label per UTC minute.

    ``items`` yields ``(timestamp, labels_of_item)``. The window runs from
    ``t0`` (default: first item) to ``t_end`` (default: last item), both
    floored to the minute; minutes without matches are explicit zeros.
    """
    pairs = [(floor_minute(ts), set(labs)) for ts, labs in items]
    if not pairs and (t0 is None or t_end is None):
        raise EmptySeriesError("no items to bucket and no explicit window")
    start = floor_minute(t0) if t0 is not None else min(m for m, _ in pairs)
    end = floor_minute(t_end) if t_end is not None else max(m for m, _ in pairs)
    n = int((end - start).total_seconds() // 60) + 1
    if n <= 0:
        raise EmptySeriesError("empty time window")
    counts = {label: np.zeros(n, dtype=np.int64) for label in labels}
    for minute, labs in pairs:
        idx = int((minute - start).total_seconds() // 60)
        if not 0 <= idx < n:
            continue
        for label in labs:
            if label in counts:
                counts[label][idx] += 1
    return {label: TimeSeries(label, start, arr) for label, arr in counts.items()}


def keyword_series(
    texts: Iterable[tuple[datetime, str]],
    patterns: PatternSet,
    t0: datetime | None = None,
    t_end: datetime | None = None,
) -> dict[str, TimeSeries]:
    """Match every normalized text and bucket the hits per label and minute."""
    items = [(ts, match_patterns(text, patterns)) for ts, text in texts]
    return bucket_counts(items, patterns.labels, t0, t_end)


def per_minute_rate(total: int, minutes: int) -> float:
    if minutes <= 0:
        raise ZeroDivisionError("minutes must be positive")
    return round(total / minutes, 3)


def lwma(values: Sequence[float], window: int) -> np.ndarray:
    """Linearly weighted moving average, newest sample weighted ``window``.

    Near the start the window shrinks to the samples available and the
    weights are rebuilt for that shorter window.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    x = np.asarray(values, dtype=float)
    n = len(x)
    if n == 0:
        return x.copy()
    if window > n:
        warnings.warn(f"window {window} longer than series ({n}); clamped", stacklevel=2)
        window = n
    out = np.empty(n)
    for t in range(min(window - 1, n)):
        m = t + 1
        w = np.arange(1, m + 1, dtype=float)  # oldest .. newest
        out[t] = w @ x[: t + 1] / w.sum()
    if n >= window:
        w = np.arange(window, 0, -1, dtype=float)  # newest first
        full = np.convolve(x, w, mode="valid") / w.sum()
        out[window - 1 :] = full
    return out


def weighted_moving_average(series: TimeSeries, window: int) -> TimeSeries:
    return TimeSeries(series.name, series.t0, lwma(series.values, window))


def write_series_csv(series: Iterable[TimeSeries], path: str | Path, value_column: str = "count") -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["minute_utc", "label", value_column])
        for ts in series:
            for minute, v in zip(ts.minutes(), ts.values):
                w.writerow([iso_utc(minute), ts.name, _fmt(v)])


def read_series_csv(path: str | Path) -> dict[str, TimeSeries]:
    """Inverse of :func:`write_series_csv`; minutes are assumed contiguous."""
    from .ingest import parse_iso_utc

    rows: dict[str, list[tuple[datetime, float]]] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for minute, label, value in reader:
            rows.setdefault(label, []).append((parse_iso_utc(minute), float(value)))
    out = {}
    for label, pts in rows.items():
        pts.sort()
        out[label] = TimeSeries(label, pts[0][0], np.array([v for _, v in pts]))
    return out


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.6f}"
