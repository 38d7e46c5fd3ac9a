import json
import subprocess
import sys
from pathlib import Path

import pytest

from cascadescope import cli, stages
from cascadescope.config import ConfigError, PipelineConfig, load_config, section
from cascadescope.manifest import RunManifest, resolve_seed, sha256_file, stage_seed
from cascadescope.report import NothingToReport, build_report

FAST = """
[sweep]
grid = [2, 3]
iterations = 20
passes = 1

[lda]
iterations = 20
passes = 1

[umap]
epochs = 30

[cascade]
iterations = 20
"""


@pytest.fixture(scope="module")
def small(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert cli.main(["synth", "--out", str(d / "small.jsonl.gz"), "--n", "1500"]) == 0
    (d / "fast.toml").write_text(FAST, encoding="utf-8")
    return d


@pytest.fixture(scope="module")
def staged(small):
    """Run every stage as its own subcommand into one directory."""
    out = small / "staged"
    cfg = ["--config", str(small / "fast.toml"), "--seed", "7"]

    def run(*argv):
        assert cli.main([*argv, *cfg]) == 0, argv

    run("ingest", "--input", str(small / "small.jsonl.gz"), "--out", str(out / "records.jsonl"))
    run("preprocess", "--input", str(out / "records.jsonl"), "--out", str(out / "docs.jsonl"))
    run("keywords", "--input", str(out / "records.jsonl"), "--out", str(out / "k.csv"))
    run("vectorize", "--input", str(out / "docs.jsonl"), "--out-dir", str(out))
    run("sweep", "--counts", str(out / "counts.mtx"), "--vocab", str(out / "vocab.tsv"), "--docs", str(out / "docs.jsonl"),
        "--out", str(out / "sweep_coherence.csv"))
    run("lda", "--counts", str(out / "counts.mtx"), "--vocab", str(out / "vocab.tsv"), "--docs", str(out / "docs.jsonl"),
        "--sweep", str(out / "sweep_coherence.csv"), "--out-dir", str(out))
    run("coherence", "--model", str(out / "lda_model.json"), "--vocab", str(out / "vocab.tsv"),
        "--docs", str(out / "docs.jsonl"), "--out", str(out / "coherence.csv"))
    run("umap", "--tfidf", str(out / "tfidf.mtx"), "--assignments", str(out / "assignments.csv"), "--out", str(out / "umap.csv"))
    run("changepoint", "--docs", str(out / "docs.jsonl"), "--assignments", str(out / "assignments.csv"), "--out-dir", str(out),
        "--event-time", "2020-03-24T23:00:00Z")
    run("retweets", "--input", str(out / "records.jsonl"), "--out-dir", str(out))
    run("cascade", "--events", str(out / "retweet_events.csv"), "--out-dir", str(out / "cascade"),
        "--manifest", str(out / "manifest.json"))
    return out


def test_all_stage_outputs_present(staged):
    for key, name in stages.LAYOUT.items():
        if key in ("report", "keyword_counts", "keyword_rates", "keyword_smoothed", "keyword_svg"):
            continue
        assert (staged / name).exists(), name
    for name in ("k.csv", "k_rates.csv", "k_lwma.csv", "k.svg", "alignment.json", "cascade/cascade_stats.csv"):
        assert (staged / name).exists(), name


def test_manifest_lists_every_output_with_digest(staged):
    m = RunManifest.load(staged / "manifest.json")
    assert [s["stage"] for s in m.stages] == [
        "ingest", "preprocess", "keywords", "vectorize", "sweep", "lda", "coherence",
        "umap", "changepoint", "retweets", "cascade"]
    for s in m.stages:
        assert s["seed"] == stage_seed(7, s["stage"])
        for rel, digest in s["outputs"].items():
            assert sha256_file(m.resolve(rel)) == digest
    assert m.data["root_seed"] == 7
    timing = json.loads(m.timing_path.read_text())
    assert set(timing) == {s["stage"] for s in m.stages}


def test_keyword_outputs(staged):
    head = (staged / "k.csv").read_text().splitlines()[0]
    assert head == "minute_utc,label,count"
    assert (staged / "k_lwma.csv").read_text().splitlines()[0] == "minute_utc,label,value"


def test_report_sections(staged, tmp_path):
    assert cli.main(["report", "--manifest", str(staged / "manifest.json"), "--out", str(tmp_path / "r.md")]) == 0
    text = (tmp_path / "r.md").read_text()
    assert text.count("\n## ") == 7


def test_report_single_stage(small, tmp_path):
    out = tmp_path / "kw"
    assert cli.main(["keywords", "--input", str(small / "small.jsonl.gz"), "--out", str(out / "k.csv")]) == 0
    titles = build_report(RunManifest.load(out / "manifest.json"), out / "report.md")
    assert titles == ["Keyword rates"]


def test_empty_manifest(tmp_path, capsys):
    m = RunManifest(tmp_path / "manifest.json")
    m.save()
    with pytest.raises(NothingToReport, match="nothing to report"):
        build_report(m, tmp_path / "r.md")
    assert cli.main(["report", "--manifest", str(m.path)]) == 1
    assert "nothing to report" in capsys.readouterr().err


def test_missing_input_is_usage_error(tmp_path, capsys):
    missing = tmp_path / "nope.jsonl"
    assert cli.main(["ingest", "--input", str(missing), "--out", str(tmp_path / "r.jsonl")]) == 2
    assert str(missing) in capsys.readouterr().err


def test_config_error_names_field(tmp_path, capsys):
    p = tmp_path / "bad.toml"
    p.write_text("[lda]\nk = 0\n", encoding="utf-8")
    with pytest.raises(ConfigError, match=r"lda\.k"):
        load_config(p)
    p.write_text("[vectorize]\nbogus = 1\n", encoding="utf-8")
    with pytest.raises(ConfigError, match=r"vectorize\.bogus"):
        load_config(p)
    assert cli.main(["synth", "--out", str(tmp_path / "x.jsonl"), "--n", "10", "--config", str(p)]) == 2
    assert "vectorize.bogus" in capsys.readouterr().err


def test_cli_flags_override_config():
    cfg = PipelineConfig.model_validate({"umap": {"n_neighbors": 30}})
    assert section(cfg, "umap", {"n_neighbors": 5}).n_neighbors == 5
    assert section(cfg, "umap", {"n_neighbors": None}).n_neighbors == 30
    with pytest.raises(ConfigError, match="umap.n_neighbors"):
        section(cfg, "umap", {"n_neighbors": 1})
    assert section(cfg, "changepoint", {"penalty": 3.0}).n_bkps is None


def test_argparse_errors_exit_2():
    with pytest.raises(SystemExit) as exc:
        cli.main(["lda"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["report"])
    assert exc.value.code == 2


def test_lda_needs_k_or_sweep(staged, capsys):
    rc = cli.main(["lda", "--counts", str(staged / "counts.mtx"), "--vocab", str(staged / "vocab.tsv"),
                   "--docs", str(staged / "docs.jsonl"), "--out-dir", str(staged / "tmp")])
    assert rc == 2


def test_failure_removes_partial_outputs(small, tmp_path, monkeypatch):
    out = tmp_path / "fail"
    out.mkdir()
    (out / "keep.txt").write_text("old", encoding="utf-8")

    def broken(records_in, docs_out, cfg):
        docs_out.write_text("half", encoding="utf-8")
        raise RuntimeError("boom")

    monkeypatch.setattr(stages, "preprocess", broken)
    rc = cli.main(["preprocess", "--input", str(small / "small.jsonl.gz"), "--out", str(out / "docs.jsonl")])
    assert rc == 1
    assert not (out / "docs.jsonl").exists()
    assert (out / "keep.txt").read_text() == "old"


def test_seed_resolution(monkeypatch):
    monkeypatch.delenv("CASCADESCOPE_SEED", raising=False)
    assert resolve_seed(None) == 0
    monkeypatch.setenv("CASCADESCOPE_SEED", "42")
    assert resolve_seed(None) == 42
    assert resolve_seed(3) == 3
    monkeypatch.setenv("CASCADESCOPE_SEED", "x")
    with pytest.raises(ValueError):
        resolve_seed(None)
    assert stage_seed(1, "lda") != stage_seed(1, "umap")
    assert stage_seed(1, "lda") == stage_seed(1, "lda")


def test_pipeline_manifest_is_stable(small, tmp_path):
    runs = []
    for name in ("a", "b"):
        d = tmp_path / name
        argv = ["pipeline", "--input", str(small / "small.jsonl.gz"), "--out-dir", str(d),
                "--config", str(small / "fast.toml"), "--seed", "11"]
        assert cli.main(argv) == 0
        runs.append((d / "manifest.json").read_bytes())
        assert (d / "report.md").read_text().count("\n## ") == 7
    assert runs[0] == runs[1]


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "cascadescope.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("cascadescope ")
    r = subprocess.run([sys.executable, "-m", "cascadescope.cli", "ingest", "--input", str(tmp_path / "none"),
                        "--out", str(tmp_path / "o.jsonl")], capture_output=True, text=True)
    assert r.returncode == 2 and "input not found" in r.stderr


def test_events_path_layout():
    assert Path(stages.LAYOUT["events"]).suffix == ".csv"
