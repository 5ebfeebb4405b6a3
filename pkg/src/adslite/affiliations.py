"""Two-step affiliation search.

Step one lists the distinct verbatim affiliation spellings that contain a
pattern; step two retrieves the records carrying any of the chosen
spellings. Affiliations are never cleaned up, and every result carries a
coverage note because only part of the corpus has affiliations at all.
"""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass

from .corpus import BibRecord, Corpus

BIAS_THRESHOLD = 0.9


@dataclass(frozen=True)
class AffiliationEntry:
    spelling: str
    record_count: int


@dataclass(frozen=True)
class CoverageNote:
    fraction: float
    biased: bool
    threshold: float = BIAS_THRESHOLD


@dataclass(frozen=True)
class AffiliationSearch:
    bibcodes: list[str]
    coverage: CoverageNote


def _records(corpus: Corpus | Iterable[BibRecord]) -> tuple[BibRecord, ...]:
    records = corpus.snapshot() if isinstance(corpus, Corpus) else tuple(corpus)
    return tuple(sorted(records, key=lambda r: r.ingest_seq))


def _spellings(record: BibRecord) -> set[str]:
    return {a.affiliation for a in record.authors if a.affiliation and a.affiliation.strip()}


def list_affiliations(corpus: Corpus | Iterable[BibRecord], pattern: str) -> list[AffiliationEntry]:
    if not pattern or not pattern.strip():
        raise ValueError("pattern must be non-empty")
    needle = pattern.casefold()
    counts: dict[str, int] = {}
    for record in _records(corpus):
        for spelling in _spellings(record):
            if needle in spelling.casefold():
                counts[spelling] = counts.get(spelling, 0) + 1
    return [AffiliationEntry(s, n) for s, n in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))]


def affiliation_coverage(corpus: Corpus | Iterable[BibRecord], threshold: float = BIAS_THRESHOLD) -> CoverageNote:
    records = _records(corpus)
    fraction = sum(1 for r in records if _spellings(r)) / len(records) if records else 0.0
    return CoverageNote(fraction, fraction < threshold, threshold)


def search_by_affiliations(
    corpus: Corpus | Iterable[BibRecord],
    spellings: Iterable[str],
    threshold: float = BIAS_THRESHOLD,
) -> AffiliationSearch:
    wanted = set(spellings)
    if not wanted:
        raise ValueError("at least one spelling is required")
    records = _records(corpus)
    hits = [r.key for r in records if _spellings(r) & wanted]
    return AffiliationSearch(hits, affiliation_coverage(records, threshold))
