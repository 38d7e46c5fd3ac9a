"""Command line entry point: one subcommand per pipeline stage.

Exit codes: 0 success, 1 internal failure, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import inspect
import logging
import os
import sys
import time
from pathlib import Path
from typing import Any, Callable

from . import __version__, stages
from .config import ConfigError, PipelineConfig, load_config, section
from .manifest import RunManifest, resolve_seed, stage_seed
from .report import NothingToReport, build_report

log = logging.getLogger("cascadescope")

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _need(*paths: Path | None) -> None:
    for p in paths:
        if p is not None and not Path(p).exists():
            raise UsageError(f"input not found: {p}")


def _csv_ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _csv_floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _snapshot(dirs: list[Path]) -> dict[Path, int]:
    snap = {}
    for d in dirs:
        if d.is_dir():
            for p in d.rglob("*"):
                if p.is_file():
                    snap[p] = p.stat().st_mtime_ns
    return snap


def _cleanup(dirs: list[Path], before: dict[Path, int], keep: set[Path]) -> None:
    """Remove files created or rewritten since ``before`` (partial outputs)."""
    for d in dirs:
        if not d.is_dir():
            continue
        for p in d.rglob("*"):
            if p.is_file() and p.resolve() not in keep and before.get(p) != p.stat().st_mtime_ns:
                p.unlink()
                log.info("removed partial output %s", p)


class Runner:
    """Runs stages, records them in the manifest, cleans up on failure."""

    def __init__(self, args: argparse.Namespace, cfg: PipelineConfig, manifest_path: Path):
        self.root_seed = resolve_seed(args.seed)
        self.cfg = cfg
        self.workers = (os.cpu_count() or 1) if args.parallel else 1
        self.manifest = RunManifest.load(manifest_path)

    def run(self, name: str, out_dirs: list[Path], fn: Callable[..., tuple[list[Path], list[Path]]], params: Any, **kwargs):
        seed = stage_seed(self.root_seed, name)
        dirs = sorted({Path(d) for d in out_dirs})
        for d in dirs:
            d.mkdir(parents=True, exist_ok=True)
        keep = {self.manifest.path.resolve(), self.manifest.timing_path.resolve()}
        before = _snapshot(dirs)
        t = time.perf_counter()
        accepted = inspect.signature(fn).parameters
        if "seed" in accepted:
            kwargs["seed"] = seed
        if "workers" in accepted:
            kwargs["workers"] = self.workers
        try:
            inputs, outputs = fn(cfg=params, **kwargs)
        except BaseException:
            _cleanup(dirs, before, keep)
            raise
        self.manifest.record(name, stages.stage_params(params), seed, self.root_seed, inputs, outputs, time.perf_counter() - t)
        log.info("%s done: %s", name, ", ".join(self.manifest.rel(p) for p in outputs))
        return outputs


def _overrides(args: argparse.Namespace, mapping: dict[str, str]) -> dict[str, Any]:
    return {field: getattr(args, attr, None) for attr, field in mapping.items()}


def _manifest_for(args, default_dir: Path) -> Path:
    return Path(args.manifest) if args.manifest else default_dir / "manifest.json"


# --- subcommand handlers -------------------------------------------------

def cmd_ingest(args, cfg):
    _need(args.input)
    out = Path(args.out)
    r = Runner(args, cfg, _manifest_for(args, out.parent))
    summary = Path(args.summary) if args.summary else out.with_name("ingest.json")
    params = section(cfg, "ingest", _overrides(args, {"strictness": "strictness"}))
    r.run("ingest", [out.parent, summary.parent], stages.ingest, params, inp=Path(args.input), records_out=out, summary_out=summary)


def cmd_preprocess(args, cfg):
    _need(args.input, args.stopwords)
    out = Path(args.out)
    r = Runner(args, cfg, _manifest_for(args, out.parent))
    params = section(cfg, "preprocess", _overrides(args, {"filter": "filter", "stopwords": "stopwords"}))
    r.run("preprocess", [out.parent], stages.preprocess, params, records_in=Path(args.input), docs_out=out)


def _keyword_paths(out: Path) -> dict[str, Path]:
    return {
        "counts_out": out,
        "rates_out": out.with_name(out.stem + "_rates.csv"),
        "smoothed_out": out.with_name(out.stem + "_lwma.csv"),
        "svg_out": out.with_suffix(".svg"),
    }


def cmd_keywords(args, cfg):
    _need(args.input, args.patterns)
    out = Path(args.out)
    r = Runner(args, cfg, _manifest_for(args, out.parent))
    params = section(cfg, "keywords", _overrides(args, {"patterns": "patterns", "window": "window", "filter": "filter"}))
    r.run("keywords", [out.parent], stages.keywords, params, records_in=Path(args.input), **_keyword_paths(out))


def _vectorize_paths(d: Path) -> dict[str, Path]:
    L = stages.LAYOUT
    return {"counts_out": d / L["counts"], "tfidf_out": d / L["tfidf"], "vocab_out": d / L["vocab"], "features_out": d / L["features"]}


def cmd_vectorize(args, cfg):
    _need(args.input)
    d = Path(args.out_dir)
    r = Runner(args, cfg, _manifest_for(args, d))
    params = section(cfg, "vectorize", _overrides(args, {"max_features": "max_features", "ngram_max": "ngram_max"}))
    r.run("vectorize", [d], stages.vectorize, params, docs_in=Path(args.input), **_vectorize_paths(d))


def cmd_sweep(args, cfg):
    _need(args.counts, args.vocab, args.docs)
    out = Path(args.out)
    r = Runner(args, cfg, _manifest_for(args, out.parent))
    params = section(cfg, "sweep", _overrides(args, {"grid": "grid", "iterations": "iterations", "passes": "passes"}))
    r.run("sweep", [out.parent], stages.sweep, params, counts_in=Path(args.counts), vocab_in=Path(args.vocab),
          docs_in=Path(args.docs), sweep_out=out)


def _lda_paths(d: Path) -> dict[str, Path]:
    L = stages.LAYOUT
    return {"model_out": d / L["model"], "assignments_out": d / L["assignments"], "topics_out": d / L["topics"]}


def cmd_lda(args, cfg):
    _need(args.counts, args.vocab, args.docs, args.sweep)
    d = Path(args.out_dir)
    r = Runner(args, cfg, _manifest_for(args, d))
    params = section(cfg, "lda", _overrides(args, {"k": "k", "iterations": "iterations", "passes": "passes", "preset": "preset"}))
    if params.k is None and args.sweep is None:
        raise UsageError("lda needs --k or --sweep (or lda.k in the config)")
    r.run("lda", [d], stages.lda, params, counts_in=Path(args.counts), vocab_in=Path(args.vocab), docs_in=Path(args.docs),
          sweep_in=Path(args.sweep) if args.sweep else None, **_lda_paths(d))


def cmd_coherence(args, cfg):
    _need(args.model, args.vocab, args.docs)
    out = Path(args.out)
    r = Runner(args, cfg, _manifest_for(args, out.parent))
    params = section(cfg, "coherence", _overrides(args, {"window": "window", "top_n": "top_n"}))
    r.run("coherence", [out.parent], stages.coherence, params, model_in=Path(args.model), vocab_in=Path(args.vocab),
          docs_in=Path(args.docs), out=out)


def cmd_umap(args, cfg):
    _need(args.tfidf, args.assignments)
    out = Path(args.out)
    r = Runner(args, cfg, _manifest_for(args, out.parent))
    params = section(cfg, "umap", _overrides(args, {"n_neighbors": "n_neighbors", "min_dist": "min_dist", "epochs": "epochs", "sample": "sample"}))
    r.run("umap", [out.parent], stages.umap, params, tfidf_in=Path(args.tfidf), assignments_in=Path(args.assignments),
          csv_out=out, svg_out=out.with_suffix(".svg"))


def _changepoint_paths(d: Path) -> dict[str, Path]:
    L = stages.LAYOUT
    return {"series_out": d / L["series"], "breakpoints_out": d / L["breakpoints"], "svg_out": d / L["changepoint_svg"],
            "alignment_out": d / "alignment.json"}


def cmd_changepoint(args, cfg):
    _need(args.docs, args.assignments)
    d = Path(args.out_dir)
    r = Runner(args, cfg, _manifest_for(args, d))
    params = section(cfg, "changepoint", _overrides(args, {"n_bkps": "n_bkps", "penalty": "penalty", "span": "span", "event_time": "event_time"}))
    r.run("changepoint", [d], stages.changepoint, params, docs_in=Path(args.docs), assignments_in=Path(args.assignments),
          **_changepoint_paths(d))


def _retweet_paths(d: Path) -> dict[str, Path]:
    L = stages.LAYOUT
    return {"events_out": d / L["events"], "stats_out": d / L["retweet_stats"], "hist_log_out": d / L["hist_log"],
            "hist_linear_out": d / L["hist_linear"], "svg_log_out": d / L["hist_log_svg"], "svg_linear_out": d / L["hist_linear_svg"]}


def cmd_retweets(args, cfg):
    _need(args.input)
    d = Path(args.out_dir)
    r = Runner(args, cfg, _manifest_for(args, d))
    params = section(cfg, "retweets", _overrides(args, {"linear_bin_s": "linear_bin_s"}))
    r.run("retweets", [d], stages.retweets, params, records_in=Path(args.input), **_retweet_paths(d))


def cmd_cascade(args, cfg):
    _need(args.events)
    d = Path(args.out_dir)
    r = Runner(args, cfg, _manifest_for(args, d))
    params = section(cfg, "cascade", _overrides(args, {"rule": "rule", "max_edges": "max_edges", "iterations": "iterations", "time_points": "time_points"}))
    r.run("cascade", [d], stages.cascade, params, events_in=Path(args.events), out_dir=d)


def cmd_report(args, cfg):
    _need(args.manifest)
    m = RunManifest.load(args.manifest)
    out = Path(args.out) if args.out else m.path.parent / stages.LAYOUT["report"]
    titles = build_report(m, out)
    print(f"wrote {out} ({len(titles)} sections)")


def cmd_pipeline(args, cfg):
    """All stages in order inside one output directory."""
    _need(args.input)
    d = Path(args.out_dir)
    L = stages.LAYOUT
    r = Runner(args, cfg, _manifest_for(args, d))
    p = lambda key: d / L[key]  # noqa: E731
    none: dict[str, Any] = {}
    r.run("ingest", [d], stages.ingest, section(cfg, "ingest", none), inp=Path(args.input), records_out=p("records"), summary_out=p("ingest"))
    r.run("preprocess", [d], stages.preprocess, section(cfg, "preprocess", none), records_in=p("records"), docs_out=p("docs"))
    r.run("keywords", [d], stages.keywords, section(cfg, "keywords", none), records_in=p("records"), **_keyword_paths(d / "keywords.csv"))
    r.run("vectorize", [d], stages.vectorize, section(cfg, "vectorize", none), docs_in=p("docs"), **_vectorize_paths(d))
    r.run("sweep", [d], stages.sweep, section(cfg, "sweep", none), counts_in=p("counts"), vocab_in=p("vocab"), docs_in=p("docs"), sweep_out=p("sweep"))
    lda_cfg = section(cfg, "lda", none)
    r.run("lda", [d], stages.lda, lda_cfg, counts_in=p("counts"), vocab_in=p("vocab"), docs_in=p("docs"),
          sweep_in=None if lda_cfg.k is not None else p("sweep"), **_lda_paths(d))
    r.run("coherence", [d], stages.coherence, section(cfg, "coherence", none), model_in=p("model"), vocab_in=p("vocab"), docs_in=p("docs"), out=p("coherence"))
    r.run("umap", [d], stages.umap, section(cfg, "umap", none), tfidf_in=p("tfidf"), assignments_in=p("assignments"), csv_out=p("umap"), svg_out=p("umap_svg"))
    r.run("changepoint", [d], stages.changepoint, section(cfg, "changepoint", none), docs_in=p("docs"), assignments_in=p("assignments"), **_changepoint_paths(d))
    r.run("retweets", [d], stages.retweets, section(cfg, "retweets", none), records_in=p("records"), **_retweet_paths(d))
    r.run("cascade", [d], stages.cascade, section(cfg, "cascade", none), events_in=p("events"), out_dir=d / L["cascade_dir"])
    titles = build_report(r.manifest, p("report"))
    print(f"pipeline complete: {d} ({len(titles)} report sections)")


def cmd_synth(args, cfg):
    from .ingest import write_archive
    from .synth import synthetic_archive

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    n = write_archive(synthetic_archive(args.n, resolve_seed(args.seed)), out)
    print(f"wrote {n} tweets to {out}")


# --- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="root seed (default: $CASCADESCOPE_SEED or 0)")
    common.add_argument("--config", default=None, help="TOML file with per-stage sections")
    common.add_argument("--manifest", default=None, help="run manifest path (default: manifest.json beside the outputs)")
    common.add_argument("--parallel", action="store_true", help="enable intra-stage parallelism")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="cascadescope", description="Tweet-archive trend, topic and retweet-cascade analytics.")
    parser.add_argument("--version", action="version", version=f"cascadescope {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, handler, help_: str) -> argparse.ArgumentParser:
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.set_defaults(handler=handler)
        return sp

    sp = add("ingest", cmd_ingest, "parse an archive into normalized records")
    sp.add_argument("--input", required=True)
    sp.add_argument("--out", required=True, help="records file (.jsonl or .jsonl.gz)")
    sp.add_argument("--summary", default=None, help="parse report and corpus stats JSON")
    sp.add_argument("--strictness", choices=["strict", "lenient"], default=None)

    sp = add("preprocess", cmd_preprocess, "clean, tokenize and stem tweets")
    sp.add_argument("--input", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--filter", choices=["originals_only", "retweets_only", "all"], default=None)
    sp.add_argument("--stopwords", default=None)

    sp = add("keywords", cmd_keywords, "per-minute keyword trend counts and rates")
    sp.add_argument("--input", required=True)
    sp.add_argument("--patterns", default=None)
    sp.add_argument("--out", required=True)
    sp.add_argument("--window", type=int, default=None)
    sp.add_argument("--filter", choices=["originals_only", "retweets_only", "all"], default=None)

    sp = add("vectorize", cmd_vectorize, "vocabulary, count and TF-IDF matrices")
    sp.add_argument("--input", required=True)
    sp.add_argument("--out-dir", default=".")
    sp.add_argument("--max-features", type=int, default=None)
    sp.add_argument("--ngram-max", type=int, default=None)

    sp = add("sweep", cmd_sweep, "LDA over a grid of topic counts scored by C_v")
    sp.add_argument("--counts", required=True)
    sp.add_argument("--vocab", required=True)
    sp.add_argument("--docs", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--grid", type=_csv_ints, default=None)
    sp.add_argument("--iterations", type=int, default=None)
    sp.add_argument("--passes", type=int, default=None)

    sp = add("lda", cmd_lda, "train the final LDA model and assign topics")
    sp.add_argument("--counts", required=True)
    sp.add_argument("--vocab", required=True)
    sp.add_argument("--docs", required=True)
    sp.add_argument("--out-dir", default=".")
    sp.add_argument("--k", type=int, default=None)
    sp.add_argument("--sweep", default=None, help="sweep CSV; picks the K with the best mean C_v")
    sp.add_argument("--iterations", type=int, default=None)
    sp.add_argument("--passes", type=int, default=None)
    sp.add_argument("--preset", choices=["sweep", "final"], default=None)

    sp = add("coherence", cmd_coherence, "C_v coherence of a trained model")
    sp.add_argument("--model", required=True)
    sp.add_argument("--vocab", required=True)
    sp.add_argument("--docs", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--window", type=int, default=None)
    sp.add_argument("--top-n", type=int, default=None)

    sp = add("umap", cmd_umap, "2-D embedding of TF-IDF rows colored by topic")
    sp.add_argument("--tfidf", required=True)
    sp.add_argument("--assignments", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--n-neighbors", type=int, default=None)
    sp.add_argument("--min-dist", type=float, default=None)
    sp.add_argument("--epochs", type=int, default=None)
    sp.add_argument("--sample", type=int, default=None)

    sp = add("changepoint", cmd_changepoint, "segment per-topic rate series")
    sp.add_argument("--docs", required=True)
    sp.add_argument("--assignments", required=True)
    sp.add_argument("--out-dir", default=".")
    sp.add_argument("--n-bkps", type=int, default=None)
    sp.add_argument("--penalty", type=float, default=None)
    sp.add_argument("--span", type=float, default=None)
    sp.add_argument("--event-time", default=None, help="ISO-8601 UTC time to align breakpoints against")

    sp = add("retweets", cmd_retweets, "time-to-retweet statistics and histograms")
    sp.add_argument("--input", required=True)
    sp.add_argument("--out-dir", default=".")
    sp.add_argument("--linear-bin-s", type=float, default=None)

    sp = add("cascade", cmd_cascade, "cascade graphs, stats and layouts at benchmark time points")
    sp.add_argument("--events", required=True)
    sp.add_argument("--out-dir", default=".")
    sp.add_argument("--rule", choices=["nearest", "at_most"], default=None)
    sp.add_argument("--max-edges", type=int, default=None)
    sp.add_argument("--iterations", type=int, default=None)
    sp.add_argument("--time-points", type=_csv_floats, default=None)

    sp = add("report", cmd_report, "Markdown report from a run manifest")
    sp.add_argument("--out", default=None)

    sp = add("pipeline", cmd_pipeline, "run every stage from ingest to report")
    sp.add_argument("--input", required=True)
    sp.add_argument("--out-dir", required=True)

    sp = add("synth", cmd_synth, "write a deterministic synthetic archive")
    sp.add_argument("--out", required=True)
    sp.add_argument("--n", type=int, default=10_000)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)
    if args.command == "report" and args.manifest is None:
        parser.error("report requires --manifest")
    try:
        cfg = load_config(args.config)
        args.handler(args, cfg)
    except (UsageError, ConfigError) as exc:
        print(f"cascadescope: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"cascadescope: error: input not found: {exc.filename or exc}", file=sys.stderr)
        return EXIT_USAGE
    except NothingToReport as exc:
        print(f"cascadescope: error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except KeyboardInterrupt:
        return EXIT_FAILURE
    except Exception as exc:  # noqa: BLE001 - the exit-code contract covers every other failure
        log.debug("stage failed", exc_info=True)
        print(f"cascadescope: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
