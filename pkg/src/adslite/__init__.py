"""adslite: a miniature bibliographic search service."""

from .corpus import Bibcode, BibRecord, Corpus, compute_stats, parse_bibcode
from .index import SynonymTable, build_index, expand_term, tokenize
from .query import execute, parse_query

__version__ = "0.1.0"

__all__ = [
    "BibRecord",
    "Bibcode",
    "Corpus",
    "SynonymTable",
    "build_index",
    "compute_stats",
    "execute",
    "expand_term",
    "parse_bibcode",
    "parse_query",
    "tokenize",
]
