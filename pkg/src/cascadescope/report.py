"""Markdown summary assembled from the files listed in a run manifest."""
from __future__ import annotations

import csv
import json
import os
from pathlib import Path
from typing import Callable

from .manifest import RunManifest, atomic_write_text


class NothingToReport(ValueError):
    pass


def _table(header: list[str], rows: list[list[str]]) -> str:
    out = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    out += ["| " + " | ".join(str(c) for c in r) + " |" for r in rows]
    return "\n".join(out)


def _csv(path: Path, limit: int | None = None) -> tuple[list[str], list[list[str]]]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1 : None if limit is None else limit + 1]


class _Ctx:
    def __init__(self, manifest: RunManifest, report_path: Path):
        self.m = manifest
        self.base = report_path.parent

    def find(self, stage: str, suffix: str) -> Path | None:
        entry = self.m.stage(stage)
        if entry is None:
            return None
        for rel in entry["outputs"]:
            if rel.endswith(suffix):
                p = self.m.resolve(rel)
                return p if p.exists() else None
        return None

    def link(self, p: Path) -> str:
        return Path(os.path.relpath(p.resolve(), self.base.resolve())).as_posix()

    def image(self, p: Path | None, alt: str) -> str:
        return "" if p is None else f"![{alt}]({self.link(p)})"


def _keywords(c: _Ctx) -> str | None:
    p = c.find("keywords", "_rates.csv")
    if p is None:
        return None
    head, rows = _csv(p)
    parts = ["Mentions per minute for each keyword pattern (original tweets only).", _table(head, rows)]
    img = c.image(c.find("keywords", ".svg"), "keyword trends")
    return "\n\n".join(parts + ([img] if img else []))


def _topics(c: _Ctx) -> str | None:
    p = c.find("lda", "topics.csv")
    if p is None:
        return None
    head, rows = _csv(p)
    entry = c.m.stage("lda")
    parts = [f"Seed {entry['seed']}.", _table(head, rows)]
    sw = c.find("sweep", "sweep_coherence.csv")
    if sw is not None:
        _, srows = _csv(sw)
        means = [[r[0], r[2]] for r in srows if r[1] == "mean"]
        parts += ["Mean C_v coherence per topic count:", _table(["K", "mean C_v"], means)]
    co = c.find("coherence", "coherence.csv")
    if co is not None:
        _, crows = _csv(co)
        parts += ["Per-topic C_v of the final model:", _table(["K", "topic", "C_v"], crows)]
    return "\n\n".join(parts)


def _series(c: _Ctx) -> str | None:
    p = c.find("changepoint", "topic_series.csv")
    if p is None:
        return None
    totals: dict[str, float] = {}
    peaks: dict[str, float] = {}
    with open(p, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            v = float(row["value"])
            totals[row["label"]] = totals.get(row["label"], 0.0) + v
            peaks[row["label"]] = max(peaks.get(row["label"], 0.0), v)
    rows = [[k, f"{totals[k]:.1f}", f"{peaks[k]:.3f}"] for k in sorted(totals, key=lambda k: -totals[k])]
    return "\n\n".join(
        [f"EWMA-smoothed documents per minute ([data]({c.link(p)})).", _table(["series", "sum", "peak"], rows)]
    )


def _changepoints(c: _Ctx) -> str | None:
    p = c.find("changepoint", "breakpoints.csv")
    if p is None:
        return None
    head, rows = _csv(p, limit=40)
    parts = [_table(head, rows)]
    img = c.image(c.find("changepoint", "changepoint.svg"), "changepoints")
    return "\n\n".join(parts + ([img] if img else []))


def _umap(c: _Ctx) -> str | None:
    p = c.find("umap", "umap.svg")
    if p is None:
        return None
    params = c.find("umap", ".params.json")
    text = ""
    if params is not None:
        prm = json.loads(params.read_text(encoding="utf-8"))
        text = ", ".join(f"{k}={prm[k]}" for k in ("n_neighbors", "min_dist", "epochs", "metric", "seed") if k in prm)
    return "\n\n".join(x for x in (text, c.image(p, "topic map")) if x)


def _retweets(c: _Ctx) -> str | None:
    p = c.find("retweets", "retweet_stats.json")
    if p is None:
        return None
    st = json.loads(p.read_text(encoding="utf-8"))
    rows = [[k, st[k]] for k in ("events", "quarantined", "malformed", "median_h", "mean_h")]
    parts = [_table(["statistic", "value"], rows)]
    for suffix, alt in (("retweet_hist_log.svg", "log histogram"), ("retweet_hist_linear.svg", "linear histogram")):
        img = c.image(c.find("retweets", suffix), alt)
        if img:
            parts.append(img)
    return "\n\n".join(parts)


def _cascade(c: _Ctx) -> str | None:
    p = c.find("cascade", "cascade_stats.csv")
    if p is None:
        return None
    head, rows = _csv(p)
    keep = ["graph", "time_point_s", "density", "nodes", "edges", "1st", "2nd", "3rd"]
    idx = [head.index(k) for k in keep]
    parts = [_table(keep, [[r[i] for i in idx] for r in rows])]
    entry = c.m.stage("cascade")
    layouts = [c.m.resolve(r) for r in entry["outputs"] if r.endswith(".svg")]
    parts += [c.image(q, q.stem) for q in layouts if q.exists()]
    return "\n\n".join(parts)


SECTIONS: list[tuple[str, Callable[[_Ctx], str | None]]] = [
    ("Keyword rates", _keywords),
    ("Topics", _topics),
    ("Topic time series", _series),
    ("Changepoints", _changepoints),
    ("Topic map", _umap),
    ("Time to retweet", _retweets),
    ("Retweet cascades", _cascade),
]


def build_report(manifest: RunManifest, out: str | Path) -> list[str]:
    """Write the Markdown report; returns the titles of the sections included."""
    if not manifest.stages:
        raise NothingToReport("nothing to report")
    out = Path(out)
    c = _Ctx(manifest, out)
    lines = ["# cascadescope run report", ""]
    lines.append(f"Tool version {manifest.data['version']}, root seed {manifest.data.get('root_seed', 'n/a')}.")
    ing = c.find("ingest", "ingest.json")
    if ing is not None:
        cs = json.loads(ing.read_text(encoding="utf-8"))["corpus_stats"]
        lines += [
            "",
            _table(
                ["total tweets", "non-retweets", "retweets", "% non-retweets", "start", "end", "minutes"],
                [[cs["total_tweets"], cs["non_retweets"], cs["retweets"], f"{100 * cs['pct_non_retweets']:.2f}",
                  cs["time_start"], cs["time_end"], cs["total_minutes"]]],
            ),
        ]
    included = []
    for title, fn in SECTIONS:
        body = fn(c)
        if body is None:
            continue
        included.append(title)
        lines += ["", f"## {title}", "", body]
    atomic_write_text(out, "\n".join(lines) + "\n")
    return included
