"""Exception hierarchy shared by every adslite module.

Each exception carries a stable ``code`` (the class name) so the HTTP layer
and the CLI can report structured reasons without string matching.
"""

from __future__ import annotations


class AdsliteError(Exception):
    """Base class for all request-level errors."""

    @property
    def code(self) -> str:
        return type(self).__name__


class MalformedBibcode(AdsliteError, ValueError):
    pass


class DuplicateBibcode(AdsliteError):
    pass


class NonEmptyDatabasesRequired(AdsliteError, ValueError):
    pass


class EmptyAuthorList(AdsliteError, ValueError):
    pass


class UnknownDatabase(AdsliteError, ValueError):
    pass


class MalformedRecord(AdsliteError, ValueError):
    pass


class SelfReference(AdsliteError, ValueError):
    pass


class SynonymTableError(AdsliteError, ValueError):
    pass


class EmptyQuery(AdsliteError, ValueError):
    pass


class MalformedDate(AdsliteError, ValueError):
    pass


class MalformedQuery(AdsliteError, ValueError):
    pass


class UnknownGroup(AdsliteError, LookupError):
    pass


class EmptyDatabase(AdsliteError, ValueError):
    pass


class UnknownToken(AdsliteError, LookupError):
    pass


class ConfigError(AdsliteError):
    pass
