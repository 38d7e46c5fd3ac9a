"""Deterministic tweet text normalization, tokenization and stemming."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from datetime import datetime
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from nltk.stem.porter import PorterStemmer

from .ingest import TweetRecord, floor_minute, iso_utc, parse_iso_utc

DEFAULT_EXTENSIONS = frozenset({"coronavirus", "covid19", "19", "covid"})
MIN_TOKEN_LEN = 3

_URL = re.compile(r"http\S*")
_MENTION = re.compile(r"@\S*")
_DIGITS = re.compile(r"[0-9]+")
_SPACES = re.compile(r"\s+")


def _is_latin_letter(ch: str) -> bool:
    if "a" <= ch <= "z" or "A" <= ch <= "Z":
        return True
    return "À" <= ch <= "ÿ" and ch not in "×÷"


def _strip_non_latin(text: str) -> str:
    # digits survive here so rule 5 stays meaningful on its own
    out = []
    for ch in text:
        if _is_latin_letter(ch) or "0" <= ch <= "9":
            out.append(ch)
        elif ch.isspace():
            out.append(" ")
    return "".join(out)


def _normalize_once(text: str) -> str:
    text = text.lower()
    text = _URL.sub(" ", text)
    text = _MENTION.sub(" ", text)
    text = _strip_non_latin(text)
    text = _DIGITS.sub("", text)
    return _SPACES.sub(" ", text).strip()


def normalize(text: str) -> str:
    """Lowercase, drop URLs and mentions, keep Latin letters, drop digits.

    Rules are reapplied until the output is stable, so fragments such as
    ``"ht7tp..."`` cannot reassemble into a URL token after digit removal.
    """
    prev = None
    while text != prev:
        prev, text = text, _normalize_once(text)
    return text


@dataclass(frozen=True)
class StopwordList:
    base: frozenset[str]
    extensions: frozenset[str] = DEFAULT_EXTENSIONS

    @property
    def words(self) -> frozenset[str]:
        return self.base | self.extensions

    def __contains__(self, word: str) -> bool:
        return word in self.base or word in self.extensions


def read_wordlist(path: str | Path) -> frozenset[str]:
    words = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.add(line.lower())
    return frozenset(words)


def load_stopwords(path: str | Path | None = None, extensions: Iterable[str] = DEFAULT_EXTENSIONS) -> StopwordList:
    if path is None:
        path = resources.files("cascadescope") / "data" / "stopwords_en.txt"
    return StopwordList(base=read_wordlist(path), extensions=frozenset(extensions))


_STEMMER = PorterStemmer(mode=PorterStemmer.ORIGINAL_ALGORITHM)


@lru_cache(maxsize=200_000)
def stem(word: str) -> str:
    return _STEMMER.stem(word)


def tokenize_stem(cleaned: str, stopwords: StopwordList) -> list[str]:
    """Whitespace split, stopword and short-word removal, then Porter stemming.

    Stems that come out shorter than three characters (``"use" -> "us"``)
    are dropped as well so every emitted token keeps the minimum length.
    """
    tokens = []
    for word in cleaned.split():
        if word in stopwords or len(word) < MIN_TOKEN_LEN:
            continue
        s = stem(word)
        if len(s) >= MIN_TOKEN_LEN:
            tokens.append(s)
    return tokens


@dataclass(frozen=True)
class Document:
    tweet_id: str
    minute: datetime
    tokens: tuple[str, ...] = field(default_factory=tuple)

    @property
    def empty(self) -> bool:
        return not self.tokens

    def to_json(self) -> dict:
        return {"tweet_id": self.tweet_id, "minute": iso_utc(self.minute), "tokens": list(self.tokens)}

    @classmethod
    def from_json(cls, obj: dict) -> "Document":
        return cls(obj["tweet_id"], parse_iso_utc(obj["minute"]), tuple(obj["tokens"]))


def preprocess_corpus(records: Iterable[TweetRecord], stopwords: StopwordList | None = None) -> list[Document]:
    if stopwords is None:
        stopwords = load_stopwords()
    return [
        Document(r.tweet_id, floor_minute(r.created_at), tuple(tokenize_stem(normalize(r.text), stopwords)))
        for r in records
    ]


def write_documents(docs: Sequence[Document], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for d in docs:
            fh.write(json.dumps(d.to_json(), ensure_ascii=False))
            fh.write("\n")


def read_documents(path: str | Path) -> list[Document]:
    with open(path, encoding="utf-8") as fh:
        return [Document.from_json(json.loads(line)) for line in fh if line.strip()]
