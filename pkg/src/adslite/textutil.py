"""Small text-folding helpers shared by the index and the name matcher."""

from __future__ import annotations

import unicodedata


def strip_diacritics(text: str) -> str:
    decomposed = unicodedata.normalize("NFKD", text)
    return "".join(ch for ch in decomposed if not unicodedata.combining(ch))


def fold(text: str) -> str:
    """Lowercase and strip diacritics; whitespace is trimmed but not collapsed."""
    return strip_diacritics(text).lower().strip()
