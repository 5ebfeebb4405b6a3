"""Search request parsing and execution.

Query fields (all optional, at least one must be non-blank)::

    author          repeatable; "[^]last[, first [middle ...]]"
    text            words; a leading "=" disables synonym expansion for that word
    object          object names separated by "," or ";"
    start_date      YYYY[-MM], month 00 allowed
    end_date        YYYY[-MM], month 00 allowed
    journals_include, journals_exclude   journal codes separated by "," or spaces
    refereed        0/1
    group           name of a curated bibcode group
    db              database ids separated by ","
    combine         and|or, how text words combine (default and)
    limit           positive integer (default 50)
"""

from __future__ import annotations

import logging
import re
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Protocol

from .corpus import DATABASES, Author, BibRecord, Corpus, PubDate
from .errors import EmptyQuery, MalformedDate, MalformedQuery, UnknownDatabase, UnknownGroup
from .index import IndexedCorpus, expand_term, score, tokenize
from .textutil import fold

logger = logging.getLogger(__name__)

DEFAULT_LIMIT = 50
QUERY_FIELDS = (
    "author",
    "text",
    "object",
    "start_date",
    "end_date",
    "journals_include",
    "journals_exclude",
    "refereed",
    "group",
    "db",
    "combine",
    "limit",
)

MIN_YEAR, MAX_YEAR = 1000, 2999


class RefereedLookup(Protocol):
    def is_refereed(self, journal_code: str) -> bool: ...


@dataclass(frozen=True)
class AuthorClause:
    last_name: str
    first_name: str | None = None
    middle_names: tuple[str, ...] = ()
    first_author_only: bool = False

    def render(self) -> str:
        given = " ".join(p for p in (self.first_name or "", *self.middle_names) if p)
        text = f"{self.last_name}, {given}" if given else self.last_name
        return ("^" if self.first_author_only else "") + text


@dataclass(frozen=True)
class DateRange:
    start: PubDate
    end: PubDate

    @property
    def start_key(self) -> tuple[int, int]:
        return (self.start.year, self.start.month or 1)

    @property
    def end_key(self) -> tuple[int, int]:
        return (self.end.year, self.end.month or 12)

    def __post_init__(self) -> None:
        if self.start_key > self.end_key:
            raise MalformedDate(f"date range is empty: {self.start}..{self.end}")


@dataclass(frozen=True)
class Filters:
    include_journals: frozenset[str] | None = None
    exclude_journals: frozenset[str] = frozenset()
    refereed_only: bool = False
    group: str | None = None
    databases: frozenset[str] | None = None

    def __post_init__(self) -> None:
        if self.include_journals and self.include_journals & self.exclude_journals:
            raise MalformedQuery("journal include and exclude sets overlap")

    def is_empty(self) -> bool:
        return (
            self.include_journals is None
            and not self.exclude_journals
            and not self.refereed_only
            and self.group is None
            and self.databases is None
        )


class TextTerm(NamedTuple):
    token: str
    exact: bool = False
    # "object" when the term was copied from the object box
    origin: str = "text"


@dataclass(frozen=True)
class QueryAst:
    authors: tuple[AuthorClause, ...] = ()
    text_terms: tuple[TextTerm, ...] = ()
    object_terms: tuple[str, ...] = ()
    date: DateRange | None = None
    filters: Filters = field(default_factory=Filters)
    combine_text: str = "AND"
    limit: int = DEFAULT_LIMIT

    def __post_init__(self) -> None:
        if self.combine_text not in ("AND", "OR"):
            raise MalformedQuery(f"combine must be AND or OR, got {self.combine_text!r}")
        if self.limit < 1:
            raise MalformedQuery("limit must be positive")
        if not (self.authors or self.text_terms or self.object_terms or self.date or not self.filters.is_empty()):
            raise EmptyQuery("query has no constraints")

    @property
    def user_terms(self) -> tuple[TextTerm, ...]:
        return tuple(t for t in self.text_terms if t.origin == "text")


# -- parsing ---------------------------------------------------------------

def _name_parts(text: str) -> list[str]:
    return [p for p in re.split(r"[\s.]+", fold(text)) if p]


def parse_author(raw: str) -> AuthorClause:
    text = raw.strip()
    caret = text.startswith("^")
    if caret:
        text = text[1:].strip()
    last, _, given = text.partition(",")
    last_name = fold(last)
    if not last_name:
        raise MalformedQuery(f"author clause needs a last name: {raw!r}")
    parts = _name_parts(given)
    return AuthorClause(
        last_name=last_name,
        first_name=parts[0] if parts else None,
        middle_names=tuple(parts[1:]),
        first_author_only=caret,
    )


_DATE = re.compile(r"(\d{4})(?:-(\d{1,2}))?")


def parse_pubdate(raw: str) -> PubDate:
    m = _DATE.fullmatch(raw.strip())
    if not m:
        raise MalformedDate(f"expected YYYY or YYYY-MM, got {raw!r}")
    year, month = int(m.group(1)), int(m.group(2) or 0)
    if not MIN_YEAR <= year <= MAX_YEAR or not 0 <= month <= 12:
        raise MalformedDate(f"date out of range: {raw!r}")
    return PubDate(year, month)


def parse_text_terms(raw: str, origin: str = "text") -> list[TextTerm]:
    terms = []
    for word in raw.split():
        exact = word.startswith("=")
        for token in tokenize(word.lstrip("=") if exact else word):
            terms.append(TextTerm(token, exact, origin))
    return terms


def _split_list(raw: str) -> list[str]:
    return [p for p in re.split(r"[,\s]+", raw.strip()) if p]


def _values(fields: Mapping[str, str | Sequence[str]], key: str) -> list[str]:
    value = fields.get(key)
    if value is None:
        return []
    if isinstance(value, str):
        return [value]
    return [str(v) for v in value]


def _single(fields: Mapping[str, str | Sequence[str]], key: str) -> str:
    values = [v for v in _values(fields, key) if v.strip()]
    if len(values) > 1:
        raise MalformedQuery(f"field {key!r} given more than once")
    return values[0].strip() if values else ""


def parse_query(fields: Mapping[str, str | Sequence[str]]) -> QueryAst:
    unknown = sorted(set(fields) - set(QUERY_FIELDS))
    if unknown:
        raise MalformedQuery(f"unknown query fields: {', '.join(unknown)}")

    authors = tuple(parse_author(a) for a in _values(fields, "author") if a.strip())
    text_terms = parse_text_terms(_single(fields, "text"))
    object_terms = [o.strip() for o in re.split(r"[,;]", _single(fields, "object")) if o.strip()]
    for obj in object_terms:
        text_terms.extend(parse_text_terms(obj, origin="object"))

    start_raw, end_raw = _single(fields, "start_date"), _single(fields, "end_date")
    date = None
    if start_raw or end_raw:
        date = DateRange(
            parse_pubdate(start_raw) if start_raw else PubDate(MIN_YEAR, 0),
            parse_pubdate(end_raw) if end_raw else PubDate(MAX_YEAR, 0),
        )

    include_raw = _single(fields, "journals_include")
    dbs_raw = _single(fields, "db")
    databases = None
    if dbs_raw:
        databases = frozenset(_split_list(dbs_raw))
        bad = sorted(databases - set(DATABASES))
        if bad:
            raise UnknownDatabase(f"unknown database ids: {', '.join(bad)}")
    refereed_raw = _single(fields, "refereed").lower()
    if refereed_raw not in ("", "0", "1", "true", "false"):
        raise MalformedQuery(f"refereed must be 0 or 1, got {refereed_raw!r}")
    filters = Filters(
        include_journals=frozenset(_split_list(include_raw)) if include_raw else None,
        exclude_journals=frozenset(_split_list(_single(fields, "journals_exclude"))),
        refereed_only=refereed_raw in ("1", "true"),
        group=_single(fields, "group") or None,
        databases=databases,
    )

    combine = (_single(fields, "combine") or "and").upper()
    limit_raw = _single(fields, "limit")
    try:
        limit = int(limit_raw) if limit_raw else DEFAULT_LIMIT
    except ValueError as exc:
        raise MalformedQuery(f"limit must be an integer, got {limit_raw!r}") from exc

    return QueryAst(
        authors=authors,
        text_terms=tuple(text_terms),
        object_terms=tuple(object_terms),
        date=date,
        filters=filters,
        combine_text=combine,
        limit=limit,
    )


def query_fields(ast: QueryAst) -> list[tuple[str, str]]:
    """Raw field pairs in canonical order; ``parse_query`` of these gives ``ast`` back."""
    pairs: list[tuple[str, str]] = [("author", a.render()) for a in ast.authors]
    if ast.user_terms:
        pairs.append(("text", " ".join(("=" if t.exact else "") + t.token for t in ast.user_terms)))
    if ast.object_terms:
        pairs.append(("object", ", ".join(ast.object_terms)))
    if ast.date:
        pairs.append(("start_date", str(ast.date.start)))
        pairs.append(("end_date", str(ast.date.end)))
    f = ast.filters
    if f.include_journals is not None:
        pairs.append(("journals_include", ",".join(sorted(f.include_journals))))
    if f.exclude_journals:
        pairs.append(("journals_exclude", ",".join(sorted(f.exclude_journals))))
    if f.refereed_only:
        pairs.append(("refereed", "1"))
    if f.group is not None:
        pairs.append(("group", f.group))
    if f.databases is not None:
        pairs.append(("db", ",".join(sorted(f.databases))))
    if ast.combine_text != "AND":
        pairs.append(("combine", ast.combine_text.lower()))
    pairs.append(("limit", str(ast.limit)))
    return pairs


def canonical_query(ast: QueryAst) -> str:
    return "; ".join(f"{k}={v}" for k, v in query_fields(ast))


# -- predicates --------------------------------------------------------------

def _compatible(query_part: str, record_part: str) -> bool:
    if query_part == record_part:
        return True
    if len(query_part) == 1 and record_part.startswith(query_part):
        return True
    return len(record_part) == 1 and query_part.startswith(record_part)


def _author_matches(clause: AuthorClause, author: Author) -> bool:
    if fold(author.last_name) != clause.last_name:
        return False
    if clause.first_name is None:
        return True
    record_parts = _name_parts(author.first_name) + [p for m in author.middle_names for p in _name_parts(m)]
    query_parts = [clause.first_name, *clause.middle_names]
    # a part the record does not carry cannot contradict the query
    return all(_compatible(q, r) for q, r in zip(query_parts, record_parts))


def match_author(clause: AuthorClause, record: BibRecord) -> bool:
    authors = record.authors[:1] if clause.first_author_only else record.authors
    return any(_author_matches(clause, a) for a in authors)


def match_date(range_: DateRange, pub: PubDate) -> bool:
    if pub.month == 0:
        return range_.start_key <= (pub.year, 1) and (pub.year, 12) <= range_.end_key
    return range_.start_key <= (pub.year, pub.month) <= range_.end_key


def load_groups(directory: str | Path) -> dict[str, frozenset[str]]:
    """Read every ``*.txt`` file in ``directory`` as a group named by its stem."""
    groups = {}
    for path in sorted(Path(directory).glob("*.txt")):
        lines = (ln.split("#", 1)[0].strip() for ln in path.read_text(encoding="utf-8").splitlines())
        groups[path.stem] = frozenset(ln for ln in lines if ln)
    return groups


# -- execution ---------------------------------------------------------------

def _passes_filters(
    record: BibRecord,
    filters: Filters,
    group_members: frozenset[str] | None,
    is_refereed: Callable[[str], bool],
) -> bool:
    if filters.include_journals is not None and record.journal_code not in filters.include_journals:
        return False
    if record.journal_code in filters.exclude_journals:
        return False
    if filters.refereed_only and not is_refereed(record.journal_code):
        return False
    if group_members is not None and record.key not in group_members:
        return False
    return filters.databases is None or bool(record.databases & filters.databases)


def scoring_terms(ast: QueryAst, index: IndexedCorpus) -> list[str]:
    terms: set[str] = set()
    for t in ast.text_terms:
        terms |= expand_term(t.token, index.synonyms, t.exact)
    return sorted(terms)


def execute(
    ast: QueryAst,
    index: IndexedCorpus,
    corpus: Corpus,
    groups: Mapping[str, Iterable[str]] | None = None,
    registry: RefereedLookup | None = None,
    *,
    min_seq: int = 0,
    database: str | None = None,
) -> list[tuple[str, float]]:
    """Run ``ast`` and return ``(bibcode, score)`` pairs, best first.

    ``min_seq`` and ``database`` restrict the candidates to records ingested
    after a watermark and belonging to one database (used by digests).
    """
    group_members = None
    if ast.filters.group is not None:
        if groups is None or ast.filters.group not in groups:
            raise UnknownGroup(f"no group named {ast.filters.group!r}")
        group_members = frozenset(groups[ast.filters.group])
    is_refereed = registry.is_refereed if registry is not None else (lambda _j: False)
    table = index.synonyms

    user = ast.user_terms
    if user:
        sets = [index.docs_with_any(expand_term(t.token, table, t.exact)) for t in user]
        candidates = set.intersection(*sets) if ast.combine_text == "AND" else set.union(*sets)
    else:
        candidates = set(range(min_seq + 1, index.max_seq + 1))

    object_routes = []
    for obj in ast.object_terms:
        tokens = tokenize(obj)
        text_docs = None
        if tokens:
            text_docs = set.intersection(*(index.docs_with_any(expand_term(t, table)) for t in tokens))
        object_routes.append((fold(obj), text_docs))

    terms = scoring_terms(ast, index)
    hits = []
    for seq in sorted(candidates):
        if seq <= min_seq or seq > index.max_seq:
            continue
        record = corpus.by_seq(seq)
        if database is not None and database not in record.databases:
            continue
        if not all(match_author(c, record) for c in ast.authors):
            continue
        if object_routes:
            names = {fold(n) for n in record.object_names}
            if not any(name in names or (docs is not None and seq in docs) for name, docs in object_routes):
                continue
        if ast.date is not None and not match_date(ast.date, record.pubdate):
            continue
        if not _passes_filters(record, ast.filters, group_members, is_refereed):
            continue
        hits.append((record.key, score(index, seq, terms), seq))

    hits.sort(key=lambda h: (-h[1], h[2]))
    return [(bibcode, s) for bibcode, s, _ in hits[: ast.limit]]
