"""Per-database article scoring and the refereed-status registry.

Each database gets a smoothed unigram model built from the titles and
abstracts of its member records. An article is scored against a database by
summing, over its tokens, the weighted log ratio of the database model to
the pooled background model, plus a bonus for every reference into one of
that database's core journals. The article goes to the best-scoring
database; articles with too short an abstract are not scored at all.

Parameter file format (``key = value`` lines, ``#`` comments)::

    min_words = 20
    citation_weight = 1.0
    smoothing = 0.5
    word_weights = galaxy:2.0 quark:1.5
    core_journals = ast:ApJ,AJ,MNRAS phy:PhRvD,PhRvL
"""

from __future__ import annotations

import math
import threading
from collections import Counter
from collections.abc import Callable, Iterable, Mapping
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

from .corpus import DATABASES, BibRecord, Corpus
from .errors import ConfigError, EmptyDatabase, UnknownDatabase
from .index import tokenize


@dataclass(frozen=True)
class ClassifierParams:
    min_words: int = 20
    word_weights: Mapping[str, float] = field(default_factory=dict)
    citation_weight: float = 1.0
    core_journals: Mapping[str, frozenset[str]] = field(default_factory=dict)
    smoothing: float = 0.5
    default_word_weight: float = 1.0

    def __post_init__(self) -> None:
        if self.min_words < 1:
            raise ValueError("min_words must be >= 1")
        if self.smoothing <= 0:
            raise ValueError("smoothing must be > 0")
        if self.citation_weight < 0:
            raise ValueError("citation_weight must be >= 0")
        if any(w <= 0 for w in self.word_weights.values()) or self.default_word_weight <= 0:
            raise ValueError("word weights must be positive")

    def weight(self, token: str) -> float:
        return self.word_weights.get(token, self.default_word_weight)

    def scaled(self, factor: float) -> ClassifierParams:
        """Copy with every word weight (including the default) multiplied by ``factor``."""
        return replace(
            self,
            word_weights={t: w * factor for t, w in self.word_weights.items()},
            default_word_weight=self.default_word_weight * factor,
        )

    @classmethod
    def parse(cls, text: str) -> ClassifierParams:
        values: dict[str, str] = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ConfigError(f"line {lineno}: expected key = value")
            values[key.strip()] = value.strip()
        known = {"min_words", "citation_weight", "smoothing", "word_weights", "default_word_weight", "core_journals"}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError(f"unknown classifier parameters: {', '.join(unknown)}")
        try:
            weights = {}
            for pair in values.get("word_weights", "").split():
                token, _, w = pair.rpartition(":")
                weights[token.lower()] = float(w)
            core = {}
            for pair in values.get("core_journals", "").split():
                db, _, journals = pair.partition(":")
                if db not in DATABASES:
                    raise ConfigError(f"core_journals names unknown database {db!r}")
                core[db] = frozenset(j for j in journals.split(",") if j)
            return cls(
                min_words=int(values.get("min_words", 20)),
                citation_weight=float(values.get("citation_weight", 1.0)),
                smoothing=float(values.get("smoothing", 0.5)),
                word_weights=weights,
                core_journals=core,
                default_word_weight=float(values.get("default_word_weight", 1.0)),
            )
        except ValueError as exc:
            raise ConfigError(f"bad classifier parameter: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> ClassifierParams:
        return cls.parse(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class DatabaseModel:
    database: str
    term_counts: Mapping[str, int]
    total_tokens: int
    vocabulary: frozenset[str]
    smoothing: float

    def probability(self, token: str) -> float:
        return (self.term_counts.get(token, 0) + self.smoothing) / (
            self.total_tokens + self.smoothing * len(self.vocabulary)
        )


@dataclass(frozen=True)
class ClassificationResult:
    scores: dict[str, float]
    assigned: str | None
    gated: bool

    def to_dict(self) -> dict:
        return {"scores": dict(sorted(self.scores.items())), "assigned": self.assigned, "gated": self.gated}


def article_tokens(record: BibRecord) -> list[str]:
    return tokenize(record.title) + tokenize(record.abstract)


def train(
    corpus: Corpus | Iterable[BibRecord],
    params: ClassifierParams,
    databases: Iterable[str] = DATABASES,
) -> dict[str, DatabaseModel]:
    records = corpus.snapshot() if isinstance(corpus, Corpus) else tuple(corpus)
    dbs = sorted(set(databases))
    for db in dbs:
        if db not in DATABASES:
            raise UnknownDatabase(f"unknown database id {db!r}")
    counts: dict[str, Counter[str]] = {db: Counter() for db in dbs}
    members = dict.fromkeys(dbs, 0)
    for record in sorted(records, key=lambda r: r.ingest_seq):
        tokens = article_tokens(record)
        for db in record.databases:
            if db in counts:
                counts[db].update(tokens)
                members[db] += 1
    empty = [db for db in dbs if members[db] == 0]
    if empty:
        raise EmptyDatabase(f"no member records for: {', '.join(empty)}")
    vocabulary = frozenset().union(*(c.keys() for c in counts.values()))
    return {
        db: DatabaseModel(
            database=db,
            term_counts=dict(sorted(counts[db].items())),
            total_tokens=sum(counts[db].values()),
            vocabulary=vocabulary,
            smoothing=params.smoothing,
        )
        for db in dbs
    }


def background_model(all_models: Mapping[str, DatabaseModel]) -> DatabaseModel:
    pooled: Counter[str] = Counter()
    for model in all_models.values():
        pooled.update(model.term_counts)
    first = next(iter(all_models.values()))
    return DatabaseModel(
        database="*",
        term_counts=dict(pooled),
        total_tokens=sum(m.total_tokens for m in all_models.values()),
        vocabulary=first.vocabulary,
        smoothing=first.smoothing,
    )


def core_citations(record: BibRecord, database: str, params: ClassifierParams) -> int:
    core = params.core_journals.get(database, frozenset())
    return sum(1 for ref in record.references if ref.journal in core)


def score_against(
    record: BibRecord,
    model: DatabaseModel,
    all_models: Mapping[str, DatabaseModel],
    params: ClassifierParams,
    background: DatabaseModel | None = None,
) -> float:
    """Weighted log-likelihood ratio against the pooled background plus the core-citation bonus.

    Tokens outside the training vocabulary carry no evidence and are skipped.
    """
    bg = background if background is not None else background_model(all_models)
    total = 0.0
    for token in article_tokens(record):
        if token not in model.vocabulary:
            continue
        total += params.weight(token) * math.log(model.probability(token) / bg.probability(token))
    return total + params.citation_weight * core_citations(record, model.database, params)


def classify(record: BibRecord, models: Mapping[str, DatabaseModel], params: ClassifierParams) -> ClassificationResult:
    if len(tokenize(record.abstract)) < params.min_words:
        return ClassificationResult(scores={}, assigned=None, gated=True)
    bg = background_model(models)
    scores = {db: score_against(record, m, models, params, bg) for db, m in sorted(models.items())}
    assigned = min(scores, key=lambda db: (-scores[db], db))
    return ClassificationResult(scores=scores, assigned=assigned, gated=False)


@dataclass(frozen=True)
class Suggestion:
    bibcode: str
    current: tuple[str, ...]
    suggested: str
    margin: float


def reclassification_report(
    corpus: Corpus | Iterable[BibRecord],
    models: Mapping[str, DatabaseModel],
    params: ClassifierParams,
    source_db: str,
) -> list[Suggestion]:
    """Records of ``source_db`` whose best database is none of their current ones."""
    if source_db not in models:
        raise UnknownDatabase(f"no model for database {source_db!r}")
    records = corpus.snapshot() if isinstance(corpus, Corpus) else tuple(corpus)
    found = []
    for record in sorted(records, key=lambda r: r.ingest_seq):
        if source_db not in record.databases:
            continue
        result = classify(record, models, params)
        if result.gated or result.assigned in record.databases:
            continue
        best_current = max(result.scores[db] for db in record.databases if db in result.scores)
        margin = result.scores[result.assigned] - best_current
        found.append((record.ingest_seq, Suggestion(record.key, tuple(sorted(record.databases)), result.assigned, margin)))
    found.sort(key=lambda item: (-item[1].margin, item[0]))
    return [s for _, s in found]


REFEREED = "refereed"
NON_REFEREED = "non-refereed"


class RefereedRegistry:
    """One refereed flag per journal, persisted as an append-only audit log.

    Log lines are ``<ISO timestamp> <journal> <refereed|non-refereed>``;
    loading replays them, so the latest write for a journal wins.
    """

    def __init__(self, log_path: str | Path | None = None, clock: Callable[[], datetime] | None = None) -> None:
        self._path = Path(log_path) if log_path is not None else None
        self._clock = clock or (lambda: datetime.now(timezone.utc))
        self._status: dict[str, bool] = {}
        self._audit: list[tuple[str, str, str]] = []
        self._lock = threading.Lock()
        if self._path is not None and self._path.exists():
            for lineno, line in enumerate(self._path.read_text(encoding="utf-8").splitlines(), start=1):
                if not line.strip():
                    continue
                parts = line.rsplit(" ", 2)
                if len(parts) != 3 or parts[2] not in (REFEREED, NON_REFEREED):
                    raise ConfigError(f"{self._path}:{lineno}: malformed registry line")
                ts, journal, status = parts
                self._status[journal] = status == REFEREED
                self._audit.append((ts, journal, status))

    def set_refereed_status(self, journal_code: str, status: str | bool) -> None:
        if isinstance(status, bool):
            status = REFEREED if status else NON_REFEREED
        if status not in (REFEREED, NON_REFEREED):
            raise ValueError(f"status must be {REFEREED!r} or {NON_REFEREED!r}")
        if not journal_code or any(c.isspace() for c in journal_code):
            raise ValueError(f"bad journal code {journal_code!r}")
        with self._lock:
            entry = (self._clock().isoformat(), journal_code, status)
            if self._path is not None:
                with self._path.open("a", encoding="utf-8") as fh:
                    fh.write(" ".join(entry) + "\n")
            self._audit.append(entry)
            self._status[journal_code] = status == REFEREED

    def is_refereed(self, journal_code: str) -> bool:
        return self._status.get(journal_code, False)

    def status(self, journal_code: str) -> str:
        return REFEREED if self.is_refereed(journal_code) else NON_REFEREED

    @property
    def audit_log(self) -> list[tuple[str, str, str]]:
        return list(self._audit)
