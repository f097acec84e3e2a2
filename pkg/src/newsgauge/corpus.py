"""Corpus ingestion: parse, clean, and filter raw news articles.

Raw articles arrive as line-delimited JSON records whose ``content`` field
uses a small markup vocabulary (``title``, ``p``, ``table``, ``box``).
Cleaning removes table/box subtrees, strips the remaining tags, and joins
the title and body with a single newline. Cleaned corpora can be written
back out with explicit ``title``/``body`` fields and re-ingested without
loss.
"""

from __future__ import annotations

import datetime as dt
import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Optional

logger = logging.getLogger(__name__)

PUBTYPES = ("print", "online")
LANGUAGES = ("de", "fr")

DEFAULT_DATE_FROM = dt.date(1999, 1, 1)

_TAG_RE = re.compile(r"<(/?)(title|p|table|box)>")
_BLOCK_TAGS = {"title", "p"}
_DROP_TAGS = {"table", "box"}
_HSPACE_RE = re.compile(r"[^\S\n]+")


class MarkupError(ValueError):
    """Raised for malformed article markup; carries the byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte offset {offset}")
        self.offset = offset


class CorpusError(ValueError):
    """Fatal corpus-level problem (unreadable file, duplicate ids)."""


@dataclass(frozen=True)
class Article:
    """One cleaned news item."""

    id: int
    date: dt.date
    outlet: str
    pubtype: str
    language: str
    section: Optional[str]
    title: str
    body: str

    def __post_init__(self):
        if not (0 <= self.id < 2**64):
            raise ValueError(f"article id {self.id} outside unsigned 64-bit range")
        if self.pubtype not in PUBTYPES:
            raise ValueError(f"unknown pubtype {self.pubtype!r}")
        if self.language not in LANGUAGES:
            raise ValueError(f"unknown language {self.language!r}")

    @property
    def text(self) -> str:
        """Title and body joined the same way `clean_text` joins them."""
        if self.title and self.body:
            return self.title + "\n" + self.body
        return self.title or self.body


@dataclass(frozen=True)
class CorpusFilter:
    """Predicate over articles; ``None`` fields accept everything."""

    date_from: Optional[dt.date] = None
    date_to: Optional[dt.date] = None
    languages: Optional[frozenset[str]] = None
    pubtypes: Optional[frozenset[str]] = None
    outlets: Optional[frozenset[str]] = None

    def __post_init__(self):
        if self.date_from and self.date_to and self.date_from > self.date_to:
            raise ValueError("date_from is after date_to")
        for name in ("languages", "pubtypes", "outlets"):
            value = getattr(self, name)
            if value is not None and not isinstance(value, frozenset):
                object.__setattr__(self, name, frozenset(value))

    def matches(self, article: Article) -> bool:
        if self.date_from and article.date < self.date_from:
            return False
        if self.date_to and article.date > self.date_to:
            return False
        if self.languages is not None and article.language not in self.languages:
            return False
        if self.pubtypes is not None and article.pubtype not in self.pubtypes:
            return False
        if self.outlets is not None and article.outlet not in self.outlets:
            return False
        return True

    @classmethod
    def from_pairs(cls, pairs: Iterable[str]) -> "CorpusFilter":
        """Build a filter from ``key=value`` strings (CLI form).

        Set-valued keys take comma-separated values, e.g.
        ``languages=de,fr``.
        """
        kwargs = {}
        for pair in pairs:
            key, sep, value = pair.partition("=")
            if not sep:
                raise ValueError(f"expected key=value, got {pair!r}")
            key = key.replace("-", "_")
            if key in ("date_from", "date_to"):
                kwargs[key] = dt.date.fromisoformat(value)
            elif key in ("languages", "pubtypes", "outlets"):
                kwargs[key] = frozenset(v for v in value.split(",") if v)
            else:
                raise ValueError(f"unknown corpus filter key {key!r}")
        return cls(**kwargs)


@dataclass
class IngestStats:
    """Counters filled in while an ingest stream is consumed."""

    read: int = 0
    yielded: int = 0
    skipped_malformed: int = 0
    filtered_out: int = 0
    offsets_of_malformed: list[int] = field(default_factory=list)


def _byte_offset(raw: str, pos: int) -> int:
    return len(raw[:pos].encode("utf-8"))


def parse_markup(raw: str) -> tuple[str, str]:
    """Split raw markup into (title text, body text).

    Table and box subtrees are dropped entirely. ``title`` and ``p`` are
    block elements: their boundaries become line breaks. Within each line,
    runs of whitespace collapse to single spaces. A ``<`` that does not
    start a known tag is treated as literal text.
    """
    title_parts: list[str] = []
    body_parts: list[str] = []
    stack: list[tuple[str, int]] = []
    title_depth = 0
    drop_depth = 0
    pos = 0

    def emit(text: str):
        if drop_depth > 0 or not text:
            return
        (title_parts if title_depth > 0 else body_parts).append(text)

    def emit_break():
        if drop_depth > 0:
            return
        (title_parts if title_depth > 0 else body_parts).append("\n")

    for match in _TAG_RE.finditer(raw):
        emit(raw[pos : match.start()])
        pos = match.end()
        closing, name = match.group(1), match.group(2)
        if not closing:
            if name in _BLOCK_TAGS:
                emit_break()
            stack.append((name, match.start()))
            if name in _DROP_TAGS:
                drop_depth += 1
            elif name == "title":
                title_depth += 1
        else:
            if not stack or stack[-1][0] != name:
                raise MarkupError(
                    f"unexpected closing tag </{name}>", _byte_offset(raw, match.start())
                )
            stack.pop()
            if name in _DROP_TAGS:
                drop_depth -= 1
            elif name == "title":
                title_depth -= 1
            if name in _BLOCK_TAGS:
                emit_break()
    if stack:
        name, start = stack[-1]
        raise MarkupError(f"unclosed tag <{name}>", _byte_offset(raw, start))
    emit(raw[pos:])

    return _normalize("".join(title_parts)), _normalize("".join(body_parts))


def _normalize(text: str) -> str:
    lines = [_HSPACE_RE.sub(" ", line).strip() for line in text.split("\n")]
    return "\n".join(line for line in lines if line)


def clean_text(raw: str) -> str:
    """Markup to plain text: title, a single newline, then the body.

    An empty title or body segment is omitted together with its newline.
    Raises `MarkupError` (recoverable per article) on malformed input.
    """
    title, body = parse_markup(raw)
    if title and body:
        return title + "\n" + body
    return title or body


def _article_from_record(
    record: dict, date_from: Optional[dt.date], date_to: Optional[dt.date]
) -> Article:
    if "content" in record:
        title, body = parse_markup(record["content"])
    else:
        title, body = record["title"], record["body"]
    date = dt.date.fromisoformat(record["date"])
    if date_from and date < date_from:
        raise ValueError(f"date {date} before corpus range start {date_from}")
    if date_to and date > date_to:
        raise ValueError(f"date {date} after corpus range end {date_to}")
    return Article(
        id=int(record["id"]),
        date=date,
        outlet=record["outlet"],
        pubtype=record["pubtype"],
        language=record["language"],
        section=record.get("section"),
        title=title,
        body=body,
    )


def ingest(
    path: str | Path,
    corpus_filter: Optional[CorpusFilter] = None,
    stats: Optional[IngestStats] = None,
    date_from: Optional[dt.date] = DEFAULT_DATE_FROM,
    date_to: Optional[dt.date] = None,
) -> Iterator[Article]:
    """Yield cleaned articles from a line-delimited corpus file, in file order.

    Per-record parse failures (bad JSON, malformed markup, out-of-range
    dates) are counted in ``stats`` and skipped. Duplicate ids and an
    unreadable file are fatal.
    """
    path = Path(path)
    if stats is None:
        stats = IngestStats()
    try:
        handle = path.open("r", encoding="utf-8")
    except OSError as exc:
        raise CorpusError(f"cannot read corpus file {path}: {exc}") from exc

    def generate() -> Iterator[Article]:
        seen: set[int] = set()
        with handle:
            for lineno, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                stats.read += 1
                try:
                    record = json.loads(line)
                    article = _article_from_record(record, date_from, date_to)
                except MarkupError as exc:
                    stats.skipped_malformed += 1
                    stats.offsets_of_malformed.append(exc.offset)
                    logger.warning("%s line %d: %s (skipped)", path.name, lineno, exc)
                    continue
                except (KeyError, ValueError, TypeError) as exc:
                    stats.skipped_malformed += 1
                    logger.warning("%s line %d: %s (skipped)", path.name, lineno, exc)
                    continue
                if article.id in seen:
                    raise CorpusError(f"duplicate article id {article.id} in {path}")
                seen.add(article.id)
                if corpus_filter is not None and not corpus_filter.matches(article):
                    stats.filtered_out += 1
                    continue
                stats.yielded += 1
                yield article

    return generate()


def write_corpus(articles: Iterable[Article], path: str | Path) -> int:
    """Write cleaned articles as line-delimited JSON; returns the count."""
    n = 0
    with Path(path).open("w", encoding="utf-8") as handle:
        for article in articles:
            record = {
                "id": article.id,
                "date": article.date.isoformat(),
                "outlet": article.outlet,
                "pubtype": article.pubtype,
                "language": article.language,
                "section": article.section,
                "title": article.title,
                "body": article.body,
            }
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")
            n += 1
    return n
