"""Pipeline stages. Each reads and writes files only, never shared memory.

Every stage function returns ``(inputs, outputs)`` path lists for the
run manifest.
"""
from __future__ import annotations

import csv
import json
import logging
import warnings
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime
from pathlib import Path

import numpy as np

from . import cascade as cas
from . import svg
from .changepoint import binseg, ewma, event_alignment, write_breakpoints_csv
from .coherence import c_v, sliding_windows, write_coherence_csv
from .config import (
    CascadeConfig,
    ChangepointConfig,
    CoherenceConfig,
    IngestConfig,
    KeywordsConfig,
    LdaConfig,
    PreprocessConfig,
    RetweetsConfig,
    SweepConfig,
    UmapConfig,
    VectorizeConfig,
)
from .embed import export_scatter, fit_umap
from .ingest import corpus_stats, filter_records, parse_archive, parse_iso_utc, write_archive
from .layout import kamada_kawai_layout
from .textprep import StopwordList, load_stopwords, normalize, preprocess_corpus, read_documents, write_documents
from .topics import (
    PRESETS,
    UNDEFINED_TOPIC,
    LdaHyperparams,
    TopicModel,
    assign_topic,
    read_assignments,
    sweep_topic_counts,
    train_lda,
)
from .trends import PatternSet, TimeSeries, keyword_series, per_minute_rate, weighted_moving_average, write_series_csv
from .vectorize import SparseMatrix, Vocabulary, build_vocab, count_matrix, tfidf, top_features

log = logging.getLogger(__name__)

Paths = tuple[list[Path], list[Path]]

# file names used by the pipeline command inside its output directory
LAYOUT = {
    "records": "records.jsonl",
    "ingest": "ingest.json",
    "docs": "docs.jsonl",
    "keyword_counts": "keywords_counts.csv",
    "keyword_rates": "keywords_rates.csv",
    "keyword_smoothed": "keywords_lwma.csv",
    "keyword_svg": "keywords.svg",
    "counts": "counts.mtx",
    "tfidf": "tfidf.mtx",
    "vocab": "vocab.tsv",
    "features": "top_features.csv",
    "sweep": "sweep_coherence.csv",
    "model": "lda_model.json",
    "assignments": "assignments.csv",
    "topics": "topics.csv",
    "coherence": "coherence.csv",
    "umap": "umap.csv",
    "umap_svg": "umap.svg",
    "series": "topic_series.csv",
    "breakpoints": "breakpoints.csv",
    "changepoint_svg": "changepoint.svg",
    "events": "retweet_events.csv",
    "retweet_stats": "retweet_stats.json",
    "hist_log": "retweet_hist_log.csv",
    "hist_linear": "retweet_hist_linear.csv",
    "hist_log_svg": "retweet_hist_log.svg",
    "hist_linear_svg": "retweet_hist_linear.svg",
    "cascade_dir": "cascade",
    "report": "report.md",
}


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _stopwords(cfg: PreprocessConfig) -> StopwordList:
    return load_stopwords(cfg.stopwords, cfg.extra_stopwords)


def ingest(inp: Path, records_out: Path, summary_out: Path, cfg: IngestConfig) -> Paths:
    records, report = parse_archive(inp, cfg.strictness)
    stats = corpus_stats(records)
    write_archive(records, records_out)
    _dump_json({"parse_report": report.to_json(), "corpus_stats": stats.to_json()}, summary_out)
    if report.skipped:
        log.warning("%d malformed lines skipped", report.skipped)
    return [inp], [records_out, summary_out]


def preprocess(records_in: Path, docs_out: Path, cfg: PreprocessConfig) -> Paths:
    records, _ = parse_archive(records_in)
    kept = filter_records(records, cfg.filter)
    write_documents(preprocess_corpus(kept, _stopwords(cfg)), docs_out)
    inputs = [records_in] + ([Path(cfg.stopwords)] if cfg.stopwords else [])
    return inputs, [docs_out]


def keywords(records_in: Path, counts_out: Path, rates_out: Path, smoothed_out: Path, svg_out: Path | None, cfg: KeywordsConfig) -> Paths:
    patterns = PatternSet.from_file(cfg.patterns) if cfg.patterns else PatternSet()
    records, _ = parse_archive(records_in)
    minutes = max(1, corpus_stats(records).total_minutes)
    kept = filter_records(records, cfg.filter)
    series = keyword_series(((r.created_at, normalize(r.text)) for r in kept), patterns)
    ordered = [series[label] for label in patterns.labels]
    write_series_csv(ordered, counts_out, "count")
    smoothed = [weighted_moving_average(ts, min(cfg.window, len(ts))) for ts in ordered]
    write_series_csv(smoothed, smoothed_out, "value")
    with open(rates_out, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["label", "total", "minutes", "rate_per_minute"])
        for ts in ordered:
            total = int(ts.values.sum())
            w.writerow([ts.name, total, minutes, f"{per_minute_rate(total, minutes):.3f}"])
    outputs = [counts_out, rates_out, smoothed_out]
    if svg_out is not None:
        svg.lines({ts.name: ts.values for ts in smoothed}, svg_out, "Keyword mentions per minute (LWMA)", ylabel="count")
        outputs.append(svg_out)
    inputs = [records_in] + ([Path(cfg.patterns)] if cfg.patterns else [])
    return inputs, outputs


def vectorize(docs_in: Path, counts_out: Path, tfidf_out: Path, vocab_out: Path, features_out: Path, cfg: VectorizeConfig) -> Paths:
    docs = read_documents(docs_in)
    tokens = [d.tokens for d in docs]
    vocab = build_vocab(tokens, cfg.max_features, (cfg.ngram_min, cfg.ngram_max))
    counts = count_matrix(tokens, vocab)
    weights = tfidf(counts, vocab)
    vocab.write(vocab_out)
    counts.write(counts_out)
    weights.write(tfidf_out)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        feats = top_features(weights, vocab, cfg.top_k)
    with open(features_out, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rank", "term", "score"])
        for i, (term, score) in enumerate(feats, start=1):
            w.writerow([i, term, f"{score:.6f}"])
    return [docs_in], [counts_out, tfidf_out, vocab_out, features_out]


def _lda_params(cfg, K: int, seed: int, preset: str) -> LdaHyperparams:
    return LdaHyperparams(
        K=K,
        alpha=cfg.alpha,
        eta=cfg.eta,
        iterations=cfg.iterations,
        passes=cfg.passes,
        seed=seed,
        top_n=cfg.top_n,
        **PRESETS[preset],
    )


def sweep(counts_in: Path, vocab_in: Path, docs_in: Path, sweep_out: Path, cfg: SweepConfig, seed: int, workers: int = 1) -> Paths:
    counts = SparseMatrix.read(counts_in)
    vocab = Vocabulary.read(vocab_in)
    stats = sliding_windows((d.tokens for d in read_documents(docs_in)), cfg.window)
    grid = [K for K in cfg.grid if K <= max(1, len(vocab))]
    if len(grid) < len(cfg.grid):
        warnings.warn(f"grid trimmed to K <= vocabulary size ({len(vocab)})", stacklevel=2)
    result = sweep_topic_counts(counts, grid, _lda_params(cfg, grid[0], seed, "sweep"), vocab, stats, workers)
    if result.selected_K is None:
        raise RuntimeError(f"no K produced a defined coherence; failures: {result.failures}")
    write_coherence_csv([(K, result.models[K].coherence) for K, _ in result.scores], sweep_out)
    return [counts_in, vocab_in, docs_in], [sweep_out]


def selected_k(sweep_csv: Path) -> int:
    """K with the highest mean coherence in a sweep CSV (first K on ties)."""
    best = None
    with open(sweep_csv, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            if row["topic"] != "mean" or row["score"] in ("", "nan"):
                continue
            score = float(row["score"])
            if best is None or score > best[1]:
                best = (int(row["K"]), score)
    if best is None:
        raise ValueError(f"{sweep_csv}: no mean coherence rows")
    return best[0]


def lda(
    counts_in: Path,
    vocab_in: Path,
    docs_in: Path,
    model_out: Path,
    assignments_out: Path,
    topics_out: Path,
    cfg: LdaConfig,
    seed: int,
    sweep_in: Path | None = None,
) -> Paths:
    inputs = [counts_in, vocab_in, docs_in]
    if cfg.k is not None:
        K = cfg.k
    elif sweep_in is not None:
        K = selected_k(sweep_in)
        inputs.append(sweep_in)
    else:
        raise ValueError("lda needs k or a sweep result")
    counts = SparseMatrix.read(counts_in)
    vocab = Vocabulary.read(vocab_in)
    docs = read_documents(docs_in)
    model = train_lda(counts, _lda_params(cfg, K, seed, cfg.preset), vocab)
    model.save(model_out, vocab.digest())
    with open(assignments_out, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tweet_id", "topic", "theta_max"])
        for d, row in zip(docs, model.theta):
            label = assign_topic(row)
            w.writerow([d.tweet_id, label, f"{row.max():.6f}"])
    sizes = np.bincount([int(np.argmax(r)) for d, r in zip(docs, model.theta) if not d.empty], minlength=K)
    with open(topics_out, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["topic", "documents", "top_terms"])
        for k, terms in enumerate(model.top_terms(10)):
            w.writerow([k, int(sizes[k]), " ".join(terms)])
    return inputs, [model_out, assignments_out, topics_out]


def coherence(model_in: Path, vocab_in: Path, docs_in: Path, out: Path, cfg: CoherenceConfig) -> Paths:
    vocab = Vocabulary.read(vocab_in)
    model = TopicModel.load(model_in, vocab)
    stats = sliding_windows((d.tokens for d in read_documents(docs_in)), cfg.window)
    write_coherence_csv([(model.K, c_v(model.top_terms(cfg.top_n), stats))], out)
    return [model_in, vocab_in, docs_in], [out]


def umap(tfidf_in: Path, assignments_in: Path, csv_out: Path, svg_out: Path, cfg: UmapConfig, seed: int) -> Paths:
    rows = SparseMatrix.read(tfidf_in).matrix
    labels = list(read_assignments(assignments_in).values())
    if len(labels) != rows.shape[0]:
        raise ValueError(f"{assignments_in}: {len(labels)} labels for {rows.shape[0]} rows")
    if cfg.sample is not None and cfg.sample < rows.shape[0]:
        pick = np.sort(np.random.default_rng(seed).choice(rows.shape[0], cfg.sample, replace=False))
        rows = rows[pick]
        labels = [labels[i] for i in pick]
    emb = fit_umap(rows, cfg.n_neighbors, cfg.min_dist, cfg.epochs, cfg.metric, seed)
    export_scatter(emb, labels, csv_out, svg_out, "Documents by topic (TF-IDF, Hellinger)")
    sidecar = Path(str(csv_out) + ".params.json")
    return [tfidf_in, assignments_in], [csv_out, sidecar, svg_out]


def topic_series(docs_in: Path, assignments_in: Path) -> tuple[dict[str, np.ndarray], datetime]:
    """Documents per minute for every assigned topic (N/A excluded)."""
    docs = read_documents(docs_in)
    labels = read_assignments(assignments_in)
    t0 = min(d.minute for d in docs)
    t_end = max(d.minute for d in docs)
    n = int((t_end - t0).total_seconds() // 60) + 1
    topics = sorted({v for v in labels.values() if v != UNDEFINED_TOPIC})
    series = {f"topic_{k}": np.zeros(n) for k in topics}
    for d in docs:
        k = labels.get(d.tweet_id)
        if k is None or k == UNDEFINED_TOPIC:
            continue
        series[f"topic_{k}"][int((d.minute - t0).total_seconds() // 60)] += 1
    return series, t0


def changepoint(
    docs_in: Path,
    assignments_in: Path,
    series_out: Path,
    breakpoints_out: Path,
    svg_out: Path | None,
    alignment_out: Path | None,
    cfg: ChangepointConfig,
) -> Paths:
    raw, t0 = topic_series(docs_in, assignments_in)
    if not raw:
        raise ValueError("no assigned topics to segment")
    smoothed = {name: ewma(v, cfg.span) for name, v in raw.items()}
    results = {}
    for name, y in smoothed.items():
        if len(y) < 2:
            raise ValueError("topic series shorter than 2 minutes")
        K = None if cfg.n_bkps is None else min(cfg.n_bkps, len(y) - 1)
        results[name] = binseg(y, n_bkps=K, penalty=cfg.penalty)
    write_series_csv([TimeSeries(name, t0, y) for name, y in smoothed.items()], series_out, "value")
    write_breakpoints_csv([(name, t0, res) for name, res in results.items()], breakpoints_out)
    outputs = [series_out, breakpoints_out]
    main = max(raw, key=lambda k: (raw[k].sum(), k))
    if svg_out is not None:
        res = results[main]
        svg.lines({main: smoothed[main]}, svg_out, f"{main}: EWMA(span={cfg.span:g}) with segments",
                  ylabel="tweets per minute", spans=res.segments(), markers=res.breakpoints)
        outputs.append(svg_out)
    if alignment_out is not None and cfg.event_time:
        event = parse_iso_utc(cfg.event_time)
        _dump_json({name: event_alignment(res, event, t0) for name, res in results.items()}, alignment_out)
        outputs.append(alignment_out)
    return [docs_in, assignments_in], outputs


def retweets(
    records_in: Path,
    events_out: Path,
    stats_out: Path,
    hist_log_out: Path,
    hist_linear_out: Path,
    svg_log_out: Path | None,
    svg_linear_out: Path | None,
    cfg: RetweetsConfig,
) -> Paths:
    records, _ = parse_archive(records_in)
    events, quarantined, malformed = cas.retweet_events(records)
    events.sort(key=lambda e: (e.retweet_created_at, e.tweet_id))
    st = cas.retweet_stats(events, cfg.linear_bin_s)
    cas.write_events_csv(events, events_out)
    _dump_json(
        {
            "events": st.n,
            "quarantined": quarantined,
            "malformed": malformed,
            "median_s": st.median_s,
            "mean_s": st.mean_s,
            "median_h": round(st.median_s / 3600.0, 4),
            "mean_h": round(st.mean_s / 3600.0, 4),
        },
        stats_out,
    )
    for rows, path, xlabel in (
        (st.log_hist_rows(), hist_log_out, "log10(seconds)"),
        (st.linear_hist_rows(), hist_linear_out, "seconds"),
    ):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["bin_lo", "bin_hi", "count"])
            for lo, hi, c in rows:
                w.writerow([f"{lo:g}", f"{hi:g}", c])
    outputs = [events_out, stats_out, hist_log_out, hist_linear_out]
    if svg_log_out is not None:
        svg.bars(*cas.histogram_arrays(st.log_hist_rows()), svg_log_out, "Time to retweet", "log10(seconds)")
        outputs.append(svg_log_out)
    if svg_linear_out is not None:
        edges, counts = cas.histogram_arrays(st.linear_hist_rows())
        svg.bars(edges / 3600.0, counts, svg_linear_out, "Time to retweet", "hours")
        outputs.append(svg_linear_out)
    return [records_in], outputs


def _one_graph(events, label, tp, cfg: CascadeConfig, seed: int, out_dir: Path) -> tuple[cas.GraphStats, list[Path]]:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        g = cas.build_cascade(events, tp, cfg.max_edges, cfg.rule, label)
    for w in caught:
        log.warning("%s: %s", label, w.message)
    st = cas.graph_stats(g)
    edges_csv = out_dir / f"edges_{label}.csv"
    cas.write_edges_csv(g, edges_csv)
    lay = kamada_kawai_layout(g.nodes, list(g.edges), cfg.iterations, seed)
    layout_svg = out_dir / f"layout_{label}.svg"
    svg.graph(lay.positions, list(g.edges), g.degree(), layout_svg, f"{label}: time point {tp:g} s")
    return st, [edges_csv, layout_svg]


def cascade(events_in: Path, out_dir: Path, cfg: CascadeConfig, seed: int, workers: int = 1) -> Paths:
    events = cas.read_events_csv(events_in)
    if not events:
        raise ValueError(f"{events_in}: no retweet events")
    out_dir.mkdir(parents=True, exist_ok=True)
    labels = [f"G{i}" for i in range(1, len(cfg.time_points) + 1)]
    jobs = list(zip(labels, cfg.time_points))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            done = [pool.submit(_one_graph, events, lab, tp, cfg, seed, out_dir) for lab, tp in jobs]
            results = [f.result() for f in done]
    else:
        results = [_one_graph(events, lab, tp, cfg, seed, out_dir) for lab, tp in jobs]
    stats_csv = out_dir / "cascade_stats.csv"
    cas.write_stats_csv([st for st, _ in results], stats_csv)
    outputs = [stats_csv] + [p for _, paths in results for p in paths]
    return [events_in], outputs


def stage_params(cfg) -> dict:
    return cfg.model_dump(mode="json")
