"""Tweet archive parsing, retweet classification and corpus statistics.

Archives are newline-delimited JSON with one tweet object per line, either
plain or gzip-compressed (``.gz``).
"""
from __future__ import annotations

import gzip
import io
import json
import math
import re
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Iterator, Literal

TWITTER_TIME_FORMAT = "%a %b %d %H:%M:%S %z %Y"
RT_PREFIX = re.compile(r"^RT @")

Strictness = Literal["strict", "lenient"]
FilterMode = Literal["originals_only", "retweets_only", "all"]


class ArchiveParseError(ValueError):
    """A malformed line was met in strict mode."""

    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class EmptyCorpusError(ValueError):
    pass


@dataclass(frozen=True)
class RetweetSource:
    source_author_id: str
    source_created_at: datetime | None
    source_text: str


@dataclass(frozen=True)
class TweetRecord:
    tweet_id: str
    created_at: datetime
    text: str
    author_id: str
    author_description: str = ""
    lang: str = "und"
    retweet_source: RetweetSource | None = None

    @property
    def is_retweet(self) -> bool:
        return self.retweet_source is not None

    @property
    def minute(self) -> datetime:
        return floor_minute(self.created_at)

    @property
    def inverted_timing(self) -> bool:
        src = self.retweet_source
        return bool(src and src.source_created_at and src.source_created_at > self.created_at)

    def to_json(self) -> dict:
        """Serialize back into the tweet-object archive format."""
        obj = {
            "id_str": self.tweet_id,
            "created_at": format_twitter_time(self.created_at),
            "full_text": self.text,
            "lang": self.lang,
            "user": {"id_str": self.author_id, "description": self.author_description},
        }
        src = self.retweet_source
        if src is not None:
            rs = {"user": {"id_str": src.source_author_id}, "full_text": src.source_text}
            if src.source_created_at is not None:
                rs["created_at"] = format_twitter_time(src.source_created_at)
            obj["retweeted_status"] = rs
        return obj


@dataclass
class ParseReport:
    lines: int = 0
    parsed: int = 0
    skipped: int = 0
    quarantined: int = 0
    errors: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {k: v for k, v in asdict(self).items() if k != "errors"}


@dataclass(frozen=True)
class CorpusStats:
    total_tweets: int
    non_retweets: int
    retweets: int
    pct_non_retweets: float
    time_start: datetime
    time_end: datetime
    total_minutes: int

    def to_json(self) -> dict:
        d = asdict(self)
        d["time_start"] = iso_utc(self.time_start)
        d["time_end"] = iso_utc(self.time_end)
        return d


def parse_twitter_time(value: str) -> datetime:
    return datetime.strptime(value, TWITTER_TIME_FORMAT).astimezone(timezone.utc)


def format_twitter_time(value: datetime) -> str:
    return value.astimezone(timezone.utc).strftime("%a %b %d %H:%M:%S +0000 %Y")


def floor_minute(value: datetime) -> datetime:
    return value.astimezone(timezone.utc).replace(second=0, microsecond=0)


def iso_utc(value: datetime) -> str:
    return value.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_iso_utc(value: str) -> datetime:
    dt = datetime.fromisoformat(value.replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def _pick_text(obj: dict) -> str | None:
    if isinstance(obj.get("full_text"), str):
        return obj["full_text"]
    ext = obj.get("extended_tweet")
    if isinstance(ext, dict) and isinstance(ext.get("full_text"), str):
        return ext["full_text"]
    text = obj.get("text")
    return text if isinstance(text, str) else None


def record_from_json(obj: object) -> TweetRecord:
    """Build a record from one decoded tweet object; raises ValueError if malformed."""
    if not isinstance(obj, dict):
        raise ValueError("not a JSON object")
    text = _pick_text(obj)
    if text is None:
        raise ValueError("missing text")
    if not isinstance(obj.get("created_at"), str):
        raise ValueError("missing created_at")
    created = parse_twitter_time(obj["created_at"])
    tweet_id = obj.get("id_str")
    if tweet_id is None and obj.get("id") is not None:
        tweet_id = str(obj["id"])
    if not isinstance(tweet_id, str):
        raise ValueError("missing id_str")
    user = obj.get("user")
    if not isinstance(user, dict) or not isinstance(user.get("id_str"), str):
        raise ValueError("missing user.id_str")

    source = None
    rs = obj.get("retweeted_status")
    if isinstance(rs, dict):
        rs_user = rs.get("user") or {}
        if not isinstance(rs_user.get("id_str"), str):
            raise ValueError("missing retweeted_status.user.id_str")
        rs_created = rs.get("created_at")
        source = RetweetSource(
            source_author_id=rs_user["id_str"],
            source_created_at=parse_twitter_time(rs_created) if isinstance(rs_created, str) else None,
            source_text=_pick_text(rs) or "",
        )
    lang = obj.get("lang")
    return TweetRecord(
        tweet_id=tweet_id,
        created_at=created,
        text=text,
        author_id=user["id_str"],
        author_description=user.get("description") or "",
        lang=lang if isinstance(lang, str) and lang else "und",
        retweet_source=source,
    )


def _open_text(path: Path):
    if path.suffix == ".gz":
        return gzip.open(path, "rt", encoding="utf-8")
    return open(path, "r", encoding="utf-8")


def iter_archive(
    path: str | Path, strictness: Strictness = "lenient", report: ParseReport | None = None
) -> Iterator[TweetRecord]:
    """Yield records in file order, updating ``report`` as lines are consumed.

    Records whose retweet source is newer than the retweet itself are still
    yielded but counted as quarantined; downstream timing code drops them.
    """
    if report is None:
        report = ParseReport()
    path = Path(path)
    with _open_text(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            report.lines += 1
            try:
                rec = record_from_json(json.loads(line))
            except (ValueError, TypeError) as exc:
                if strictness == "strict":
                    raise ArchiveParseError(line_no, str(exc)) from None
                report.skipped += 1
                report.errors.append(f"line {line_no}: {exc}")
                continue
            report.parsed += 1
            if rec.inverted_timing:
                report.quarantined += 1
            yield rec


def parse_archive(
    path: str | Path, strictness: Strictness = "lenient"
) -> tuple[list[TweetRecord], ParseReport]:
    report = ParseReport()
    records = list(iter_archive(path, strictness, report))
    return records, report


def write_archive(records: Iterable[TweetRecord], path: str | Path) -> int:
    n = 0
    path = Path(path)
    with open(path, "wb") as raw:
        # mtime=0 keeps compressed output byte-identical across runs
        sink = gzip.GzipFile(filename="", mode="wb", fileobj=raw, mtime=0) if path.suffix == ".gz" else raw
        with io.TextIOWrapper(sink, encoding="utf-8", newline="\n") as fh:
            for rec in records:
                fh.write(json.dumps(rec.to_json(), ensure_ascii=False, sort_keys=True))
                fh.write("\n")
                n += 1
    return n


def classify(record: TweetRecord) -> Literal["retweet", "prefix_retweet", "original"]:
    """Three-way split: metadata retweet, text-only "RT @" retweet, original."""
    if record.retweet_source is not None:
        return "retweet"
    if RT_PREFIX.match(record.text):
        return "prefix_retweet"
    return "original"


def filter_records(records: Iterable[TweetRecord], mode: FilterMode = "all") -> list[TweetRecord]:
    if mode == "all":
        return list(records)
    if mode == "originals_only":
        return [r for r in records if classify(r) == "original"]
    if mode == "retweets_only":
        return [r for r in records if r.retweet_source is not None]
    raise ValueError(f"unknown filter mode {mode!r}")


def corpus_stats(records: Iterable[TweetRecord]) -> CorpusStats:
    total = retweets = 0
    start = end = None
    for r in records:
        total += 1
        retweets += r.retweet_source is not None
        if start is None or r.created_at < start:
            start = r.created_at
        if end is None or r.created_at > end:
            end = r.created_at
    if total == 0:
        raise EmptyCorpusError("corpus is empty")
    originals = total - retweets
    return CorpusStats(
        total_tweets=total,
        non_retweets=originals,
        retweets=retweets,
        pct_non_retweets=originals / total,
        time_start=start,
        time_end=end,
        total_minutes=math.ceil((end - start).total_seconds() / 60.0),
    )
