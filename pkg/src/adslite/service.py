"""Application wiring and the HTTP facade.

Configuration is an INI file with one ``[adslite]`` section; relative paths
are resolved against the config file's directory, and every key can be
overridden by an ``ADSLITE_<KEY>`` environment variable::

    [adslite]
    corpus = corpus.jsonl
    synonyms = synonyms.txt
    groups = groups/
    registry = refereed.log
    params = classifier.conf
    profiles = profiles.jsonl
    libraries = libraries.jsonl
    output = digests/
    listen = 127.0.0.1:8080

Every response body is JSON with a ``status`` member ("ok" or "error"),
except ``/rss`` which returns the feed XML.
"""

from __future__ import annotations

import configparser
import json
import logging
import os
import threading
from collections.abc import Callable, Iterable, Mapping
from dataclasses import dataclass
from datetime import datetime, timezone
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Any
from urllib.parse import parse_qs, urlsplit

from . import affiliations, alerts, classify, query
from .corpus import Corpus, IngestReport, compute_stats, record_from_document
from .errors import AdsliteError, ConfigError, EmptyDatabase, UnknownToken
from .index import IndexedCorpus, SynonymTable, build_index
from .libraries import LibraryStore

logger = logging.getLogger(__name__)

CONFIG_KEYS = ("corpus", "synonyms", "groups", "registry", "params", "profiles", "libraries", "output", "listen")
_REQUIRED_FILES = ("corpus", "synonyms", "params")


@dataclass(frozen=True)
class ServiceConfig:
    corpus: Path
    synonyms: Path
    groups: Path
    registry: Path
    params: Path
    profiles: Path
    libraries: Path
    output: Path
    listen: str = "127.0.0.1:8080"

    @classmethod
    def load(cls, path: str | Path | None = None, env: Mapping[str, str] | None = None) -> ServiceConfig:
        env = os.environ if env is None else env
        values: dict[str, str] = {}
        base = Path.cwd()
        if path is not None:
            cfg_path = Path(path)
            if not cfg_path.is_file():
                raise ConfigError(f"config file not found: {cfg_path}")
            parser = configparser.ConfigParser(inline_comment_prefixes=(";",))
            parser.read(cfg_path, encoding="utf-8")
            if "adslite" not in parser:
                raise ConfigError(f"{cfg_path}: missing [adslite] section")
            values.update(parser["adslite"])
            base = cfg_path.resolve().parent
        for key in CONFIG_KEYS:
            override = env.get(f"ADSLITE_{key.upper()}")
            if override:
                values[key] = override
        missing = [k for k in CONFIG_KEYS if k != "listen" and k not in values]
        if missing:
            raise ConfigError(f"missing config keys: {', '.join(missing)}")
        paths = {k: (base / values[k]) for k in CONFIG_KEYS if k != "listen"}
        config = cls(**paths, listen=values.get("listen", "127.0.0.1:8080"))
        config.validate()
        return config

    def validate(self) -> None:
        for key in _REQUIRED_FILES:
            if not getattr(self, key).is_file():
                raise ConfigError(f"{key}: file not found: {getattr(self, key)}")
        if not self.groups.is_dir():
            raise ConfigError(f"groups: directory not found: {self.groups}")
        for key in ("registry", "profiles", "libraries", "output"):
            if not getattr(self, key).parent.is_dir():
                raise ConfigError(f"{key}: parent directory not found: {getattr(self, key)}")


class App:
    """Loaded state plus one method per operation; the CLI and HTTP both call these."""

    def __init__(
        self,
        config: ServiceConfig,
        *,
        clock: Callable[[], datetime] | None = None,
        library_seed: int | None = None,
    ) -> None:
        self.config = config
        self.clock = clock or (lambda: datetime.now(timezone.utc))
        self.corpus = Corpus()
        with config.corpus.open(encoding="utf-8") as fh:
            report = self.corpus.ingest(fh)
        if report.rejected:
            logger.warning("%d corpus lines rejected at startup", report.rejected_count)
        self.synonyms = SynonymTable.load(config.synonyms)
        self.groups = query.load_groups(config.groups)
        self.registry = classify.RefereedRegistry(config.registry, clock=self.clock)
        self.params = classify.ClassifierParams.load(config.params)
        self.libraries = LibraryStore(config.libraries, seed=library_seed, clock=self.clock)
        self._write_lock = threading.Lock()
        self._digest_lock = threading.Lock()
        self._index, self._models = self._rebuild()

    def _rebuild(self) -> tuple[IndexedCorpus, dict[str, classify.DatabaseModel]]:
        index = build_index(self.corpus, self.synonyms)
        present = sorted({db for r in self.corpus for db in r.databases})
        models = classify.train(self.corpus, self.params, present) if present else {}
        return index, models

    @property
    def index(self) -> IndexedCorpus:
        return self._index

    # -- reads ---------------------------------------------------------------

    def search(self, fields: Mapping[str, Any]) -> tuple[query.QueryAst, list[tuple[str, float]]]:
        ast = query.parse_query(fields)
        return ast, query.execute(ast, self._index, self.corpus, self.groups, self.registry)

    def rss(self, fields: Mapping[str, Any]) -> alerts.FeedDocument:
        ast, results = self.search(fields)
        return alerts.render_rss(ast, results, self.corpus)

    def stats(self) -> dict[str, Any]:
        return compute_stats(self.corpus).to_dict()

    def record(self, bibcode: str) -> dict[str, Any]:
        rec = self.corpus.get(bibcode)
        if rec is None:
            raise UnknownToken(f"no record {bibcode!r}")
        return rec.to_document()

    def classify(self, document: Mapping[str, Any]) -> classify.ClassificationResult:
        if not self._models:
            raise EmptyDatabase("no trained database models")
        return classify.classify(record_from_document(document), self._models, self.params)

    def reclass_report(self, source_db: str) -> list[classify.Suggestion]:
        return classify.reclassification_report(self.corpus, self._models, self.params, source_db)

    def affil_list(self, pattern: str) -> list[affiliations.AffiliationEntry]:
        return affiliations.list_affiliations(self.corpus, pattern)

    def affil_search(self, spellings: Iterable[str]) -> affiliations.AffiliationSearch:
        return affiliations.search_by_affiliations(self.corpus, spellings)

    def lib_show(self, token: str):
        return self.libraries.resolve(token)

    # -- writes --------------------------------------------------------------

    def lib_create(self, name: str, owner: str):
        return self.libraries.create_library(name, owner)

    def lib_add(self, token: str, bibcodes: Iterable[str]):
        return self.libraries.add_records(token, bibcodes)

    def set_refereed(self, journal: str, status: str) -> None:
        self.registry.set_refereed_status(journal, status)

    def ingest(self, lines: Iterable[str]) -> IngestReport:
        """Append records, persist the accepted ones, then swap in a fresh index."""
        with self._write_lock:
            before = self.corpus.max_seq
            report = self.corpus.ingest(lines)
            if report.accepted:
                with self.config.corpus.open("a", encoding="utf-8") as fh:
                    for seq in range(before + 1, self.corpus.max_seq + 1):
                        fh.write(json.dumps(self.corpus.by_seq(seq).to_document(), sort_keys=True) + "\n")
                self._index, self._models = self._rebuild()
            return report

    def digest(self, now: datetime | None = None) -> list[tuple[alerts.DigestDocument, Path]]:
        now = now or self.clock()
        with self._digest_lock:
            profiles = alerts.load_profiles(self.config.profiles)
            docs = alerts.run_digest(profiles, self.corpus, self._index, now, self.groups, self.registry)
            self.config.output.mkdir(exist_ok=True)
            written = []
            for doc in docs:
                path = self.config.output / doc.filename
                path.write_text(doc.html, encoding="utf-8")
                written.append((doc, path))
            if profiles:
                alerts.save_profiles(self.config.profiles, profiles)
            return written

    # -- HTTP ----------------------------------------------------------------

    def handle(self, method: str, target: str, body: bytes = b"") -> tuple[int, str, bytes]:
        """Route one request; returns (status code, content type, body)."""
        parts = urlsplit(target)
        params = parse_qs(parts.query, keep_blank_values=True)
        segments = [s for s in parts.path.split("/") if s]
        try:
            return self._route(method, segments, params, body)
        except UnknownToken as exc:
            return _error(HTTPStatus.NOT_FOUND, exc.code, str(exc))
        except AdsliteError as exc:
            return _error(HTTPStatus.BAD_REQUEST, exc.code, str(exc))
        except (ValueError, KeyError, TypeError) as exc:
            return _error(HTTPStatus.BAD_REQUEST, "BadRequest", str(exc))

    def _route(self, method: str, seg: list[str], params: dict[str, list[str]], body: bytes) -> tuple[int, str, bytes]:
        if method == "GET":
            if seg == ["search"]:
                ast, results = self.search(params)
                return _ok({"query": query.canonical_query(ast), "results": [{"bibcode": b, "score": s} for b, s in results]})
            if seg == ["rss"]:
                return HTTPStatus.OK, "application/rss+xml; charset=utf-8", self.rss(params).xml.encode("utf-8")
            if seg == ["stats"]:
                return _ok({"stats": self.stats()})
            if len(seg) == 2 and seg[0] == "lib":
                return _ok({"library": self.lib_show(seg[1]).to_dict()})
            if len(seg) == 2 and seg[0] == "abs":
                return _ok({"record": self.record(seg[1])})
            if seg == ["affil", "list"]:
                pattern = _one(params, "pattern")
                entries = self.affil_list(pattern)
                return _ok({"affiliations": [{"spelling": e.spelling, "record_count": e.record_count} for e in entries]})
            if seg == ["affil", "search"]:
                found = self.affil_search(params.get("spelling", []))
                return _ok({"bibcodes": found.bibcodes, "coverage": _coverage(found.coverage)})
            if seg == ["reclass"]:
                return _ok({"suggestions": [_suggestion(s) for s in self.reclass_report(_one(params, "source"))]})
        elif method == "POST":
            payload = json.loads(body or b"{}") if seg != ["ingest"] else None
            if seg == ["lib"]:
                return _ok({"library": self.lib_create(payload["name"], payload.get("owner", "")).to_dict()})
            if len(seg) == 3 and seg[0] == "lib" and seg[2] == "add":
                lib, errors = self.lib_add(seg[1], payload["bibcodes"])
                return _ok({"library": lib.to_dict(), "errors": [{"error": e.code, "message": str(e)} for e in errors]})
            if seg == ["classify"]:
                return _ok({"classification": self.classify(payload).to_dict()})
            if seg == ["refereed"]:
                self.set_refereed(payload["journal"], payload["status"])
                return _ok({"journal": payload["journal"], "refereed": self.registry.status(payload["journal"])})
            if seg == ["ingest"]:
                report = self.ingest(body.decode("utf-8").splitlines())
                return _ok(_ingest_report(report))
        return _error(HTTPStatus.NOT_FOUND, "NotFound", f"no route for {method} /{'/'.join(seg)}")


def _one(params: Mapping[str, list[str]], key: str) -> str:
    values = params.get(key) or [""]
    if len(values) > 1:
        raise ValueError(f"parameter {key!r} given more than once")
    return values[0]


def _json(status: int, data: dict[str, Any]) -> tuple[int, str, bytes]:
    return status, "application/json", (json.dumps(data, sort_keys=True, indent=1) + "\n").encode("utf-8")


def _ok(data: dict[str, Any]) -> tuple[int, str, bytes]:
    return _json(HTTPStatus.OK, {"status": "ok", **data})


def _error(status: int, code: str, message: str) -> tuple[int, str, bytes]:
    return _json(status, {"status": "error", "error": code, "message": message})


def _coverage(note: affiliations.CoverageNote) -> dict[str, Any]:
    return {"fraction": note.fraction, "biased": note.biased, "threshold": note.threshold}


def _suggestion(s: classify.Suggestion) -> dict[str, Any]:
    return {"bibcode": s.bibcode, "current": list(s.current), "suggested": s.suggested, "margin": s.margin}


def _ingest_report(report: IngestReport) -> dict[str, Any]:
    return {
        "accepted": report.accepted,
        "rejected": [{"line": r.line, "error": r.code, "message": r.message} for r in report.rejected],
    }


class _Handler(BaseHTTPRequestHandler):
    app: App

    def _dispatch(self, method: str) -> None:
        length = int(self.headers.get("Content-Length") or 0)
        body = self.rfile.read(length) if length else b""
        status, ctype, payload = self.app.handle(method, self.path, body)
        self.send_response(status)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def do_GET(self) -> None:
        self._dispatch("GET")

    def do_POST(self) -> None:
        self._dispatch("POST")

    def log_message(self, format: str, *args: Any) -> None:
        logger.info("%s - %s", self.address_string(), format % args)


def make_server(app: App, listen: str | None = None) -> ThreadingHTTPServer:
    host, _, port = (listen or app.config.listen).rpartition(":")
    handler = type("Handler", (_Handler,), {"app": app})
    return ThreadingHTTPServer((host or "127.0.0.1", int(port)), handler)


def serve(config: ServiceConfig) -> None:
    app = App(config)
    server = make_server(app)
    logger.info("listening on %s:%s", *server.server_address[:2])
    try:
        server.serve_forever()
    finally:
        server.server_close()

