import gzip
import json
from datetime import datetime, timedelta, timezone
from pathlib import Path

import pytest

T0 = datetime(2020, 3, 24, 14, 0, 0, tzinfo=timezone.utc)


def twitter_time(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).strftime("%a %b %d %H:%M:%S +0000 %Y")


def tweet(
    tid,
    text="hello world",
    at=T0,
    user="u1",
    source_user=None,
    source_at=None,
    lang="en",
    description="",
):
    obj = {
        "id_str": str(tid),
        "created_at": twitter_time(at),
        "text": text,
        "lang": lang,
        "user": {"id_str": user, "description": description},
    }
    if source_user is not None:
        obj["retweeted_status"] = {
            "user": {"id_str": source_user},
            "created_at": twitter_time(source_at if source_at is not None else at - timedelta(seconds=60)),
            "text": text,
        }
    return obj


def write_lines(path: Path, objs, compress=False):
    lines = [o if isinstance(o, str) else json.dumps(o) for o in objs]
    data = "\n".join(lines) + ("\n" if lines else "")
    if compress:
        with gzip.open(path, "wt", encoding="utf-8") as fh:
            fh.write(data)
    else:
        path.write_text(data, encoding="utf-8")
    return path


@pytest.fixture
def ten_line_archive(tmp_path):
    objs = []
    for i in range(10):
        at = T0 + timedelta(minutes=i)
        if i in (2, 5, 8):
            objs.append(tweet(i, f"RT @orig: mask story {i}", at, user=f"r{i}", source_user="orig"))
        else:
            objs.append(tweet(i, f"hospital mask news number {i}", at, user=f"u{i}"))
    return write_lines(tmp_path / "ten.jsonl", objs)


@pytest.fixture(scope="session")
def shipped_archive():
    from importlib import resources

    return Path(str(resources.files("cascadescope") / "data" / "synthetic_10k.jsonl.gz"))


ACCEPTANCE: dict[int, tuple[str, bool]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok = ACCEPTANCE[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {n:>2}: {title}")
