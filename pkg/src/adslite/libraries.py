"""Private libraries: named bibcode collections shared by unguessable URL token.

Whoever holds the token can read the library; there is no other credential.
Mutations are appended to a JSON-lines journal and replayed on startup::

    {"op": "create", "token": "...", "payload": {"name": "...", "owner": "...", "ts": "..."}}
    {"op": "add", "token": "...", "payload": {"bibcodes": ["..."], "ts": "..."}}
"""

from __future__ import annotations

import json
import random
import re
import secrets
import string
import threading
from collections.abc import Callable, Iterable
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from .corpus import parse_bibcode
from .errors import ConfigError, MalformedBibcode, UnknownToken

TOKEN_ALPHABET = string.ascii_letters + string.digits
TOKEN_LENGTH = 16
TOKEN_PATTERN = re.compile(rf"[A-Za-z0-9]{{{TOKEN_LENGTH}}}")


@dataclass(frozen=True)
class PrivateLibrary:
    token: str
    name: str
    owner: str
    bibcodes: tuple[str, ...] = ()
    created: datetime = field(default_factory=lambda: datetime.now(timezone.utc))
    modified: datetime = field(default_factory=lambda: datetime.now(timezone.utc))

    @property
    def url(self) -> str:
        return f"/lib/{self.token}"

    def to_dict(self) -> dict[str, Any]:
        return {
            "token": self.token,
            "url": self.url,
            "name": self.name,
            "owner": self.owner,
            "bibcodes": list(self.bibcodes),
            "created": self.created.isoformat(),
            "modified": self.modified.isoformat(),
        }


class LibraryStore:
    def __init__(
        self,
        journal_path: str | Path | None = None,
        *,
        seed: int | None = None,
        clock: Callable[[], datetime] | None = None,
    ) -> None:
        self._journal = Path(journal_path) if journal_path is not None else None
        self._rng: random.Random = random.Random(seed) if seed is not None else secrets.SystemRandom()
        self._clock = clock or (lambda: datetime.now(timezone.utc))
        self._libraries: dict[str, PrivateLibrary] = {}
        self._lock = threading.RLock()
        if self._journal is not None and self._journal.exists():
            self._replay()

    def __len__(self) -> int:
        return len(self._libraries)

    def _replay(self) -> None:
        for lineno, line in enumerate(self._journal.read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            try:
                entry = json.loads(line)
                op, token, payload = entry["op"], entry["token"], entry["payload"]
                ts = datetime.fromisoformat(payload["ts"])
                if op == "create":
                    self._libraries[token] = PrivateLibrary(token, payload["name"], payload["owner"], (), ts, ts)
                elif op == "add":
                    lib = self._libraries[token]
                    merged = lib.bibcodes + tuple(b for b in payload["bibcodes"] if b not in lib.bibcodes)
                    self._libraries[token] = replace(lib, bibcodes=merged, modified=ts)
                else:
                    raise ValueError(f"unknown op {op!r}")
            except (KeyError, ValueError, TypeError) as exc:
                raise ConfigError(f"{self._journal}:{lineno}: bad journal entry: {exc}") from exc

    def _append(self, op: str, token: str, payload: dict[str, Any]) -> None:
        if self._journal is None:
            return
        line = json.dumps({"op": op, "token": token, "payload": payload}, sort_keys=True)
        with self._journal.open("a", encoding="utf-8") as fh:
            fh.write(line + "\n")
            fh.flush()

    def _new_token(self) -> str:
        while True:
            token = "".join(self._rng.choice(TOKEN_ALPHABET) for _ in range(TOKEN_LENGTH))
            if token not in self._libraries:
                return token

    def create_library(self, name: str, owner: str) -> PrivateLibrary:
        if not name or not name.strip():
            raise ValueError("library name must be non-empty")
        with self._lock:
            now = self._clock()
            lib = PrivateLibrary(self._new_token(), name, owner, (), now, now)
            self._append("create", lib.token, {"name": name, "owner": owner, "ts": now.isoformat()})
            self._libraries[lib.token] = lib
            return lib

    def add_records(self, token: str, bibcodes: Iterable[str]) -> tuple[PrivateLibrary, list[MalformedBibcode]]:
        """Union ``bibcodes`` into the library, keeping first-insertion order.

        Returns the updated library and one error per malformed entry; the
        valid entries are added regardless.
        """
        with self._lock:
            lib = self.resolve(token)
            errors: list[MalformedBibcode] = []
            new: list[str] = []
            for raw in bibcodes:
                try:
                    parse_bibcode(raw)
                except MalformedBibcode as exc:
                    errors.append(exc)
                    continue
                if raw not in lib.bibcodes and raw not in new:
                    new.append(raw)
            if not new:
                return lib, errors
            now = max(self._clock(), lib.modified)
            self._append("add", token, {"bibcodes": new, "ts": now.isoformat()})
            lib = replace(lib, bibcodes=lib.bibcodes + tuple(new), modified=now)
            self._libraries[token] = lib
            return lib, errors

    def resolve(self, token: str) -> PrivateLibrary:
        try:
            return self._libraries[token]
        except KeyError:
            raise UnknownToken(f"no library with token {token!r}") from None
