"""Tokenizer, synonym groups, inverted index and tf-idf scoring.

Synonyms are expanded at query time only: the index stores every surface
form under itself, so an exact (``=word``) lookup always stays reachable.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import BibRecord, Corpus
from .errors import SynonymTableError
from .textutil import strip_diacritics

TITLE = "title"
ABSTRACT = "abstract"
TITLE_BOOST = 2.0
MIN_TOKEN_LENGTH = 2

INDEX_MAGIC = b"ADSLITE-IDX"
INDEX_VERSION = 1

# Unicode letters and digits; underscore is punctuation for our purposes.
_WORD = re.compile(r"[^\W_]+")


def tokenize(text: str | None) -> list[str]:
    if not text:
        return []
    folded = strip_diacritics(text).lower()
    return [t for t in _WORD.findall(folded) if len(t) >= MIN_TOKEN_LENGTH]


def normalize_token(word: str) -> str:
    """Return the single token ``word`` folds to, or raise ValueError."""
    tokens = tokenize(word)
    if tokens != [strip_diacritics(word).lower()]:
        raise ValueError(f"{word!r} is not a single token")
    return tokens[0]


@dataclass(frozen=True)
class SynonymTable:
    groups: tuple[frozenset[str], ...] = ()
    _lookup: Mapping[str, frozenset[str]] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "groups", tuple(sorted(self.groups, key=sorted)))
        lookup: dict[str, frozenset[str]] = {}
        for group in self.groups:
            if len(group) < 2:
                raise SynonymTableError(f"synonym group needs at least 2 members: {sorted(group)}")
            for token in group:
                if token in lookup:
                    raise SynonymTableError(f"token {token!r} appears in more than one group")
                lookup[token] = group
        object.__setattr__(self, "_lookup", lookup)

    @classmethod
    def from_groups(cls, groups: Iterable[Iterable[str]]) -> SynonymTable:
        normalized = []
        for group in groups:
            try:
                normalized.append(frozenset(normalize_token(w) for w in group))
            except ValueError as exc:
                raise SynonymTableError(str(exc)) from exc
        return cls(tuple(normalized))

    @classmethod
    def parse(cls, text: str) -> SynonymTable:
        """One group per line, members separated by whitespace; ``#`` starts a comment."""
        groups = []
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                groups.append(line.split())
        return cls.from_groups(groups)

    @classmethod
    def load(cls, path: str | Path) -> SynonymTable:
        return cls.parse(Path(path).read_text(encoding="utf-8"))

    def group_of(self, token: str) -> frozenset[str] | None:
        return self._lookup.get(token)

    def dump(self) -> str:
        return "".join(" ".join(sorted(g)) + "\n" for g in self.groups)


def expand_term(term: str, table: SynonymTable, exact: bool = False) -> frozenset[str]:
    if exact:
        return frozenset({term})
    return table.group_of(term) or frozenset({term})


@dataclass(frozen=True)
class Posting:
    seq: int
    field: str
    tf: int


@dataclass
class IndexedCorpus:
    postings: dict[str, list[Posting]]
    field_lengths: dict[int, tuple[int, int]]
    doc_count: int
    synonyms: SynonymTable
    # term -> {seq: (title tf, abstract tf)}, derived from postings
    _tf: dict[str, dict[int, tuple[int, int]]] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if not self._tf:
            for term, plist in self.postings.items():
                by_doc: dict[int, list[int]] = {}
                for p in plist:
                    slot = by_doc.setdefault(p.seq, [0, 0])
                    slot[0 if p.field == TITLE else 1] += p.tf
                self._tf[term] = {seq: (t, a) for seq, (t, a) in by_doc.items()}

    @property
    def max_seq(self) -> int:
        """Highest ingest_seq covered; later records are invisible to queries."""
        return max(self.field_lengths, default=0)

    def docs_with(self, term: str) -> frozenset[int]:
        return frozenset(self._tf.get(term, ()))

    def docs_with_any(self, terms: Iterable[str]) -> set[int]:
        out: set[int] = set()
        for term in terms:
            out.update(self._tf.get(term, ()))
        return out

    def df(self, term: str) -> int:
        return len(self._tf.get(term, ()))

    def tf(self, term: str, seq: int) -> tuple[int, int]:
        """(title tf, abstract tf) of ``term`` in document ``seq``."""
        return self._tf.get(term, {}).get(seq, (0, 0))

    def serialize(self) -> bytes:
        body = {
            "doc_count": self.doc_count,
            "field_lengths": [[seq, t, a] for seq, (t, a) in sorted(self.field_lengths.items())],
            "postings": {
                term: [[p.seq, p.field, p.tf] for p in plist]
                for term, plist in sorted(self.postings.items())
            },
            "synonyms": [sorted(g) for g in sorted(self.synonyms.groups, key=sorted)],
        }
        payload = json.dumps(body, sort_keys=True, separators=(",", ":")).encode("utf-8")
        return INDEX_MAGIC + b"\n" + str(INDEX_VERSION).encode() + b"\n" + payload

    @classmethod
    def deserialize(cls, data: bytes) -> IndexedCorpus:
        magic, version, payload = data.split(b"\n", 2)
        if magic != INDEX_MAGIC:
            raise ValueError("not an adslite index")
        if int(version) != INDEX_VERSION:
            raise ValueError(f"unsupported index version {int(version)}")
        body = json.loads(payload)
        return cls(
            postings={
                term: [Posting(seq, fld, tf) for seq, fld, tf in plist]
                for term, plist in body["postings"].items()
            },
            field_lengths={seq: (t, a) for seq, t, a in body["field_lengths"]},
            doc_count=body["doc_count"],
            synonyms=SynonymTable(tuple(frozenset(g) for g in body["synonyms"])),
        )


def record_tokens(record: BibRecord) -> tuple[list[str], list[str]]:
    return tokenize(record.title), tokenize(record.abstract)


def build_index(corpus: Corpus | Iterable[BibRecord], table: SynonymTable | None = None) -> IndexedCorpus:
    records = corpus.snapshot() if isinstance(corpus, Corpus) else tuple(corpus)
    postings: dict[str, list[Posting]] = {}
    lengths: dict[int, tuple[int, int]] = {}
    for record in sorted(records, key=lambda r: r.ingest_seq):
        title_tokens, abstract_tokens = record_tokens(record)
        lengths[record.ingest_seq] = (len(title_tokens), len(abstract_tokens))
        for fld, tokens in ((TITLE, title_tokens), (ABSTRACT, abstract_tokens)):
            for term, tf in sorted(Counter(tokens).items()):
                postings.setdefault(term, []).append(Posting(record.ingest_seq, fld, tf))
    return IndexedCorpus(
        postings=dict(sorted(postings.items())),
        field_lengths=lengths,
        doc_count=len(records),
        synonyms=table if table is not None else SynonymTable(),
    )


def idf(index: IndexedCorpus, term: str) -> float:
    df = index.df(term)
    return math.log(1.0 + index.doc_count / df) if df else 0.0


def score(index: IndexedCorpus, record_seq: int, terms: Mapping[str, float] | Iterable[str]) -> float:
    """tf-idf of one document: sum of weight * (2*tf_title + tf_abstract) * log(1 + N/df).

    ``terms`` is either a mapping token -> weight or an iterable of tokens
    (weight 1). Terms are summed in sorted order so the result is
    reproducible bit for bit.
    """
    weighted = terms if isinstance(terms, Mapping) else {t: 1.0 for t in terms}
    total = 0.0
    for term in sorted(weighted):
        tf_title, tf_abstract = index.tf(term, record_seq)
        if tf_title or tf_abstract:
            total += weighted[term] * (TITLE_BOOST * tf_title + tf_abstract) * idf(index, term)
    return total
