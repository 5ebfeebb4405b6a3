"""Record data model, bibcode parsing, JSON-lines ingestion and corpus statistics.

Records arrive as one JSON document per line::

    {"bibcode": "2006ApJ...636..891G", "title": "...", "abstract": null,
     "authors": [{"last": "Gardner", "first": "Helen", "middle": ["S."], "aff": null}],
     "pubdate": {"year": 2006, "month": 0}, "journal": "ApJ",
     "databases": ["ast"], "references": [], "objects": ["M31"],
     "scanned_pages": 0, "external_links": 0}

The corpus is append-only. Accepted records get consecutive ``ingest_seq``
values starting at 1; rejected lines are reported and never abort the stream.
"""

from __future__ import annotations

import json
import logging
import re
import threading
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from typing import Any

from .errors import (
    AdsliteError,
    DuplicateBibcode,
    EmptyAuthorList,
    MalformedBibcode,
    MalformedRecord,
    NonEmptyDatabasesRequired,
    SelfReference,
    UnknownDatabase,
)
from .textutil import fold

logger = logging.getLogger(__name__)

DATABASES: tuple[str, ...] = ("ast", "gen", "phy", "pre")

BIBCODE_LENGTH = 19
_BIBCODE_CHARS = re.compile(r"[A-Za-z0-9.&]{19}")


@dataclass(frozen=True, order=True)
class Bibcode:
    """Fixed-width identifier ``YYYYJJJJJVVVVMPPPPA``.

    The padded fields keep their dots so that rendering is a plain
    concatenation; use :attr:`journal`, :attr:`volume_number` and friends for
    the unpadded values.
    """

    year: int
    journal_code: str
    volume: str
    qualifier: str
    page: str
    author_initial: str

    def __str__(self) -> str:
        return self.render()

    def render(self) -> str:
        return (
            f"{self.year:04d}{self.journal_code}{self.volume}"
            f"{self.qualifier}{self.page}{self.author_initial}"
        )

    @property
    def journal(self) -> str:
        return self.journal_code.strip(".")

    @property
    def volume_number(self) -> str:
        return self.volume.strip(".")

    @property
    def page_number(self) -> str:
        return self.page.strip(".")


def parse_bibcode(s: str) -> Bibcode:
    if not isinstance(s, str) or len(s) != BIBCODE_LENGTH:
        raise MalformedBibcode(f"bibcode must be {BIBCODE_LENGTH} characters: {s!r}")
    if not _BIBCODE_CHARS.fullmatch(s):
        raise MalformedBibcode(f"bibcode contains forbidden characters: {s!r}")
    year_text = s[0:4]
    if not year_text.isdigit():
        raise MalformedBibcode(f"bibcode year is not numeric: {s!r}")
    year = int(year_text)
    if not 1000 <= year <= 2999:
        raise MalformedBibcode(f"bibcode year {year_text} out of range: {s!r}")
    return Bibcode(
        year=year,
        journal_code=s[4:9],
        volume=s[9:13],
        qualifier=s[13],
        page=s[14:18],
        author_initial=s[18],
    )


def is_valid_bibcode(s: str) -> bool:
    try:
        parse_bibcode(s)
    except MalformedBibcode:
        return False
    return True


@dataclass(frozen=True)
class Author:
    last_name: str
    first_name: str = ""
    middle_names: tuple[str, ...] = ()
    affiliation: str | None = None

    def display(self) -> str:
        given = " ".join(p for p in (self.first_name, *self.middle_names) if p)
        return f"{self.last_name}, {given}" if given else self.last_name


@dataclass(frozen=True, order=True)
class PubDate:
    year: int
    month: int = 0  # 0 = unknown month

    def __post_init__(self) -> None:
        if not 0 <= self.month <= 12:
            raise ValueError(f"month must be in [0, 12], got {self.month}")

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"


@dataclass(frozen=True)
class BibRecord:
    bibcode: Bibcode
    title: str
    abstract: str | None
    authors: tuple[Author, ...]
    pubdate: PubDate
    journal_code: str
    databases: frozenset[str]
    references: frozenset[Bibcode] = frozenset()
    object_names: frozenset[str] = frozenset()
    ingest_seq: int = 0
    scanned_pages: int = 0
    external_links: int = 0

    @property
    def key(self) -> str:
        """The bibcode as a string."""
        return self.bibcode.render()

    @property
    def first_author(self) -> Author:
        return self.authors[0]

    def has_abstract(self) -> bool:
        return bool(self.abstract and self.abstract.strip())

    def has_affiliation(self) -> bool:
        return any(a.affiliation and a.affiliation.strip() for a in self.authors)

    def to_document(self) -> dict[str, Any]:
        """Interchange form; ``record_from_document(r.to_document())`` round-trips."""
        return {
            "bibcode": self.key,
            "title": self.title,
            "abstract": self.abstract,
            "authors": [
                {
                    "last": a.last_name,
                    "first": a.first_name,
                    "middle": list(a.middle_names),
                    "aff": a.affiliation,
                }
                for a in self.authors
            ],
            "pubdate": {"year": self.pubdate.year, "month": self.pubdate.month},
            "journal": self.journal_code,
            "databases": sorted(self.databases),
            "references": sorted(b.render() for b in self.references),
            "objects": sorted(self.object_names),
            "scanned_pages": self.scanned_pages,
            "external_links": self.external_links,
        }


def _require(doc: Mapping[str, Any], key: str, kind: type | tuple[type, ...]) -> Any:
    if key not in doc:
        raise MalformedRecord(f"missing field {key!r}")
    value = doc[key]
    if not isinstance(value, kind):
        raise MalformedRecord(f"field {key!r} has wrong type {type(value).__name__}")
    return value


def _counter(doc: Mapping[str, Any], key: str) -> int:
    value = doc.get(key) or 0
    if not isinstance(value, int) or isinstance(value, bool) or value < 0:
        raise MalformedRecord(f"{key} must be a non-negative integer")
    return value


def _parse_author(raw: Any) -> Author:
    if not isinstance(raw, Mapping):
        raise MalformedRecord("author entries must be objects")
    last = raw.get("last")
    if not isinstance(last, str) or not fold(last):
        raise MalformedRecord("author last name must be non-empty")
    first = raw.get("first") or ""
    middle = raw.get("middle") or []
    aff = raw.get("aff")
    if not isinstance(first, str) or not isinstance(middle, list):
        raise MalformedRecord("author first/middle have wrong types")
    if aff is not None and not isinstance(aff, str):
        raise MalformedRecord("author aff must be a string or null")
    return Author(
        last_name=last.strip(),
        first_name=first.strip(),
        middle_names=tuple(str(m).strip() for m in middle if str(m).strip()),
        affiliation=aff,
    )


def record_from_document(doc: Mapping[str, Any], ingest_seq: int = 0) -> BibRecord:
    """Validate one interchange document and build a record.

    Raises the specific :class:`AdsliteError` subclass describing the first
    problem found.
    """
    if not isinstance(doc, Mapping):
        raise MalformedRecord("record document must be a JSON object")
    bibcode = parse_bibcode(_require(doc, "bibcode", str))
    title = _require(doc, "title", str)
    abstract = doc.get("abstract")
    if abstract is not None and not isinstance(abstract, str):
        raise MalformedRecord("abstract must be a string or null")

    raw_authors = _require(doc, "authors", list)
    if not raw_authors:
        raise EmptyAuthorList(f"{bibcode}: author list is empty")
    authors = tuple(_parse_author(a) for a in raw_authors)

    pub = _require(doc, "pubdate", Mapping)
    try:
        pubdate = PubDate(int(pub["year"]), int(pub.get("month", 0)))
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedRecord(f"bad pubdate: {exc}") from exc

    journal = _require(doc, "journal", str)

    dbs = _require(doc, "databases", list)
    if not dbs:
        raise NonEmptyDatabasesRequired(f"{bibcode}: databases must be non-empty")
    unknown = [d for d in dbs if d not in DATABASES]
    if unknown:
        raise UnknownDatabase(f"{bibcode}: unknown database ids {unknown}")

    refs = frozenset(parse_bibcode(r) for r in doc.get("references") or [])
    if bibcode in refs:
        raise SelfReference(f"{bibcode}: record references itself")
    objects = doc.get("objects") or []
    if not isinstance(objects, list) or not all(isinstance(o, str) for o in objects):
        raise MalformedRecord("objects must be a list of strings")

    return BibRecord(
        bibcode=bibcode,
        title=title,
        abstract=abstract,
        authors=authors,
        pubdate=pubdate,
        journal_code=journal.strip(),
        databases=frozenset(dbs),
        references=refs,
        object_names=frozenset(o.strip() for o in objects if o.strip()),
        ingest_seq=ingest_seq,
        scanned_pages=_counter(doc, "scanned_pages"),
        external_links=_counter(doc, "external_links"),
    )


@dataclass(frozen=True)
class Rejection:
    line: int
    code: str
    message: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.code}: {self.message}"


@dataclass
class IngestReport:
    accepted: int = 0
    rejected: list[Rejection] = field(default_factory=list)
    accepted_bibcodes: list[str] = field(default_factory=list)

    @property
    def rejected_count(self) -> int:
        return len(self.rejected)


class Corpus:
    """Append-only record store.

    A single writer ingests; readers may iterate concurrently. A record is
    fully built before it becomes visible, so readers never see partial state.
    """

    def __init__(self) -> None:
        self._records: list[BibRecord] = []
        self._by_bibcode: dict[str, BibRecord] = {}
        self._write_lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[BibRecord]:
        return iter(self.snapshot())

    def __contains__(self, bibcode: object) -> bool:
        return str(bibcode) in self._by_bibcode

    def snapshot(self) -> tuple[BibRecord, ...]:
        return tuple(self._records[: len(self._records)])

    def get(self, bibcode: str | Bibcode) -> BibRecord | None:
        return self._by_bibcode.get(str(bibcode))

    def by_seq(self, seq: int) -> BibRecord:
        # seqs are consecutive from 1
        return self._records[seq - 1]

    @property
    def max_seq(self) -> int:
        return len(self._records)

    def ingest(self, source: Iterable[str | Mapping[str, Any]]) -> IngestReport:
        """Ingest a stream of JSON lines (or already-decoded documents)."""
        report = IngestReport()
        with self._write_lock:
            for lineno, item in enumerate(source, start=1):
                if isinstance(item, str):
                    if not item.strip():
                        continue
                    try:
                        doc = json.loads(item)
                    except json.JSONDecodeError as exc:
                        report.rejected.append(Rejection(lineno, "MalformedRecord", str(exc)))
                        continue
                else:
                    doc = item
                try:
                    record = record_from_document(doc, ingest_seq=len(self._records) + 1)
                    if record.key in self._by_bibcode:
                        raise DuplicateBibcode(f"{record.key} already ingested")
                except AdsliteError as exc:
                    report.rejected.append(Rejection(lineno, exc.code, str(exc)))
                    continue
                self._by_bibcode[record.key] = record
                self._records.append(record)
                report.accepted += 1
                report.accepted_bibcodes.append(record.key)
        for rej in report.rejected:
            logger.warning("rejected %s", rej)
        return report


def ingest_records(source: Iterable[str | Mapping[str, Any]], corpus: Corpus | None = None) -> tuple[Corpus, IngestReport]:
    """Ingest ``source`` into ``corpus`` (a fresh one if omitted)."""
    corpus = corpus if corpus is not None else Corpus()
    report = corpus.ingest(source)
    return corpus, report


@dataclass(frozen=True)
class CorpusStats:
    total_records: int
    per_database: dict[str, int]
    with_abstract: int
    abstract_fraction: float
    with_references: int
    reference_fraction: float
    citation_pairs: int
    affiliation_coverage: float
    scanned_pages: int = 0
    external_links: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "total_records": self.total_records,
            "per_database": dict(sorted(self.per_database.items())),
            "with_abstract": self.with_abstract,
            "abstract_fraction": self.abstract_fraction,
            "with_references": self.with_references,
            "reference_fraction": self.reference_fraction,
            "citation_pairs": self.citation_pairs,
            "affiliation_coverage": self.affiliation_coverage,
            "scanned_pages": self.scanned_pages,
            "external_links": self.external_links,
        }


def compute_stats(corpus: Corpus | Iterable[BibRecord]) -> CorpusStats:
    records = corpus.snapshot() if isinstance(corpus, Corpus) else tuple(corpus)
    total = len(records)
    per_db = {db: 0 for db in DATABASES}
    present = {r.bibcode for r in records}
    with_abs = with_refs = with_aff = pairs = pages = links = 0
    for r in records:
        for db in r.databases:
            per_db[db] += 1
        with_abs += r.has_abstract()
        with_refs += bool(r.references)
        with_aff += r.has_affiliation()
        pairs += sum(1 for ref in r.references if ref in present)
        pages += r.scanned_pages
        links += r.external_links

    def frac(n: int) -> float:
        return n / total if total else 0.0

    return CorpusStats(
        total_records=total,
        per_database=per_db,
        with_abstract=with_abs,
        abstract_fraction=frac(with_abs),
        with_references=with_refs,
        reference_fraction=frac(with_refs),
        citation_pairs=pairs,
        affiliation_coverage=frac(with_aff),
        scanned_pages=pages,
        external_links=links,
    )
