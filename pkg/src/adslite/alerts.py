"""Periodic per-subscriber digests and query-to-RSS feeds.

Profiles file: one JSON document per line::

    {"id": "hgardner",
     "queries": {"ast": {"author": ["Kowalski"]}, "pre": {"text": "galaxies"}},
     "frequencies": {"pre": "daily"},
     "last_run": {"ast": 0}, "last_run_at": {"ast": "2006-09-01T00:00:00+00:00"}}

Stored queries are kept as raw query fields and parsed at run time, so a
broken one is skipped (watermark untouched) instead of poisoning the file.
"""

from __future__ import annotations

import html
import json
import logging
import os
import tempfile
import threading
import xml.etree.ElementTree as ET
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from email.utils import format_datetime
from pathlib import Path
from typing import Any
from urllib.parse import urlencode

from .corpus import DATABASES, Corpus
from .errors import AdsliteError, UnknownDatabase
from .index import IndexedCorpus
from .query import QueryAst, RefereedLookup, canonical_query, execute, parse_query, query_fields

logger = logging.getLogger(__name__)

DEFAULT_CYCLE_DAYS = 10
NAMED_CYCLES = {"daily": 1, "weekly": 7}


def cycle_days(database: str, frequency: int | str | None) -> int:
    if frequency is None:
        return DEFAULT_CYCLE_DAYS
    if isinstance(frequency, str):
        if frequency not in NAMED_CYCLES:
            raise ValueError(f"unknown frequency {frequency!r}")
        if database != "pre":
            raise ValueError("daily/weekly cycles are only available for the pre database")
        return NAMED_CYCLES[frequency]
    if isinstance(frequency, bool) or frequency < 1:
        raise ValueError(f"cycle must be a positive number of days, got {frequency!r}")
    return frequency


@dataclass
class SubscriberProfile:
    subscriber_id: str
    queries: dict[str, dict[str, Any]]
    frequencies: dict[str, int | str] = field(default_factory=dict)
    last_run: dict[str, int] = field(default_factory=dict)
    last_run_at: dict[str, datetime] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for db in set(self.queries) | set(self.frequencies) | set(self.last_run):
            if db not in DATABASES:
                raise UnknownDatabase(f"profile {self.subscriber_id}: unknown database {db!r}")
        for db, freq in self.frequencies.items():
            cycle_days(db, freq)

    def query_for(self, database: str) -> QueryAst:
        return parse_query(self.queries[database])

    def is_due(self, database: str, now: datetime) -> bool:
        last = self.last_run_at.get(database)
        if last is None:
            return True
        return now - last >= timedelta(days=cycle_days(database, self.frequencies.get(database)))

    def advance(self, database: str, watermark: int, now: datetime) -> None:
        self.last_run[database] = max(self.last_run.get(database, 0), watermark)
        self.last_run_at[database] = now

    def to_document(self) -> dict[str, Any]:
        return {
            "id": self.subscriber_id,
            "queries": {db: self.queries[db] for db in sorted(self.queries)},
            "frequencies": {db: self.frequencies[db] for db in sorted(self.frequencies)},
            "last_run": {db: self.last_run[db] for db in sorted(self.last_run)},
            "last_run_at": {db: self.last_run_at[db].isoformat() for db in sorted(self.last_run_at)},
        }

    @classmethod
    def from_document(cls, doc: Mapping[str, Any]) -> SubscriberProfile:
        return cls(
            subscriber_id=str(doc["id"]),
            queries={db: dict(q) for db, q in doc.get("queries", {}).items()},
            frequencies=dict(doc.get("frequencies", {})),
            last_run={db: int(v) for db, v in doc.get("last_run", {}).items()},
            last_run_at={db: datetime.fromisoformat(v) for db, v in doc.get("last_run_at", {}).items()},
        )


def load_profiles(path: str | Path) -> list[SubscriberProfile]:
    p = Path(path)
    if not p.exists():
        return []
    lines = p.read_text(encoding="utf-8").splitlines()
    return [SubscriberProfile.from_document(json.loads(ln)) for ln in lines if ln.strip()]


def save_profiles(path: str | Path, profiles: Iterable[SubscriberProfile]) -> None:
    """Rewrite the profiles file atomically (temp file + rename)."""
    p = Path(path)
    text = "".join(json.dumps(pr.to_document(), sort_keys=True) + "\n" for pr in profiles)
    fd, tmp = tempfile.mkstemp(dir=p.parent, prefix=p.name, suffix=".tmp")
    with os.fdopen(fd, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, p)


@dataclass(frozen=True)
class DigestItem:
    bibcode: str
    title: str
    first_author: str
    score: float


@dataclass(frozen=True)
class DigestDocument:
    subscriber_id: str
    database: str
    run_at: datetime
    items: tuple[DigestItem, ...]
    html: str

    @property
    def filename(self) -> str:
        return f"{self.subscriber_id}-{self.database}-{self.run_at.strftime('%Y%m%dT%H%M%SZ')}.html"


def render_digest_html(subscriber_id: str, database: str, run_at: datetime, header: str, items: Sequence[DigestItem]) -> str:
    esc = html.escape
    rows = "".join(
        f'<li><a href="/abs/{esc(it.bibcode)}">{esc(it.title)}</a> '
        f"<span class=\"author\">{esc(it.first_author)}</span> "
        f"<code>{esc(it.bibcode)}</code></li>\n"
        for it in items
    )
    return (
        "<html>\n<head><meta charset=\"utf-8\"/>"
        f"<title>myADS digest {esc(subscriber_id)} {esc(database)}</title></head>\n<body>\n"
        f"<h1>New {esc(database)} papers for {esc(subscriber_id)}</h1>\n"
        f"<p>{esc(run_at.isoformat())} | {esc(header)}</p>\n"
        f"<ol>\n{rows}</ol>\n</body>\n</html>\n"
    )


_digest_lock = threading.Lock()


def run_digest(
    profiles: Iterable[SubscriberProfile],
    corpus: Corpus,
    index: IndexedCorpus,
    now: datetime,
    groups: Mapping[str, Iterable[str]] | None = None,
    registry: RefereedLookup | None = None,
) -> list[DigestDocument]:
    """One digest cycle. Watermarks in ``profiles`` are advanced in place.

    Only one run may be in flight at a time.
    """
    if now.tzinfo is None:
        now = now.replace(tzinfo=timezone.utc)
    documents = []
    with _digest_lock:
        high = index.max_seq
        for profile in sorted(profiles, key=lambda p: p.subscriber_id):
            for db in sorted(profile.queries):
                if not profile.is_due(db, now):
                    continue
                try:
                    ast = profile.query_for(db)
                    results = execute(
                        ast, index, corpus, groups, registry,
                        min_seq=profile.last_run.get(db, 0), database=db,
                    )
                except AdsliteError as exc:
                    logger.warning("skipping %s/%s: %s: %s", profile.subscriber_id, db, exc.code, exc)
                    continue
                if results:
                    items = []
                    for bibcode, s in results:
                        record = corpus.get(bibcode)
                        items.append(DigestItem(bibcode, record.title, record.first_author.display(), s))
                    body = render_digest_html(profile.subscriber_id, db, now, canonical_query(ast), items)
                    documents.append(DigestDocument(profile.subscriber_id, db, now, tuple(items), body))
                profile.advance(db, high, now)
    return documents


@dataclass(frozen=True)
class FeedItem:
    title: str
    link: str
    pub_date: str
    guid: str


@dataclass(frozen=True)
class FeedDocument:
    channel_title: str
    items: tuple[FeedItem, ...]
    xml: str


def _rfc822(year: int, month: int) -> str:
    # month 0 (unknown) is rendered as January
    return format_datetime(datetime(year, month or 1, 1, tzinfo=timezone.utc))


def render_rss(
    ast: QueryAst,
    results: Sequence[tuple[str, float]],
    corpus: Corpus,
    base_url: str = "",
) -> FeedDocument:
    title = canonical_query(ast)
    items = []
    for bibcode, _score in results:
        record = corpus.get(bibcode)
        items.append(
            FeedItem(
                title=record.title if record else bibcode,
                link=f"{base_url}/abs/{bibcode}",
                pub_date=_rfc822(record.pubdate.year, record.pubdate.month) if record else "",
                guid=bibcode,
            )
        )

    rss = ET.Element("rss", version="2.0")
    channel = ET.SubElement(rss, "channel")
    ET.SubElement(channel, "title").text = title
    ET.SubElement(channel, "link").text = f"{base_url}/search?{urlencode(query_fields(ast))}"
    ET.SubElement(channel, "description").text = f"adslite results for {title}"
    for item in items:
        node = ET.SubElement(channel, "item")
        ET.SubElement(node, "title").text = item.title
        ET.SubElement(node, "link").text = item.link
        if item.pub_date:
            ET.SubElement(node, "pubDate").text = item.pub_date
        ET.SubElement(node, "guid", isPermaLink="false").text = item.guid
    ET.indent(rss, space="  ")
    xml = '<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(rss, encoding="unicode") + "\n"
    return FeedDocument(channel_title=title, items=tuple(items), xml=xml)


def check_rss(xml: str) -> list[str]:
    """Structural check of the RSS 2.0 required elements; returns the problems found."""
    problems = []
    try:
        root = ET.fromstring(xml.encode("utf-8"))
    except ET.ParseError as exc:
        return [f"not well-formed: {exc}"]
    if root.tag != "rss" or root.get("version") != "2.0":
        problems.append("root must be <rss version=\"2.0\">")
    channels = root.findall("channel")
    if len(channels) != 1:
        return problems + ["exactly one <channel> required"]
    channel = channels[0]
    for tag in ("title", "link", "description"):
        if channel.find(tag) is None:
            problems.append(f"channel missing <{tag}>")
    for n, item in enumerate(channel.findall("item"), start=1):
        if item.find("title") is None and item.find("description") is None:
            problems.append(f"item {n} needs <title> or <description>")
    return problems
