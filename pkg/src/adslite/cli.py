"""Command-line interface. Output is line-oriented and tab-separated."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from collections.abc import Sequence
from datetime import datetime, timezone
from pathlib import Path

from .errors import AdsliteError
from .query import QUERY_FIELDS, canonical_query
from .service import App, ServiceConfig, make_server


def _query_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--author", action="append", default=[], help="repeatable; ^ anchors to first author")
    for name in QUERY_FIELDS:
        if name != "author":
            p.add_argument(f"--{name.replace('_', '-')}", dest=name, default=None)


def _fields(args: argparse.Namespace) -> dict[str, object]:
    fields: dict[str, object] = {"author": args.author} if args.author else {}
    for name in QUERY_FIELDS:
        value = getattr(args, name)
        if name != "author" and value is not None:
            fields[name] = value
    return fields


def _read_input(path: str) -> str:
    return sys.stdin.read() if path == "-" else Path(path).read_text(encoding="utf-8")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adslite", description="miniature bibliographic search service")
    parser.add_argument("--config", help="INI config file (default: $ADSLITE_CONFIG or ./adslite.ini)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    p = sub.add_parser("ingest", help="append records from a JSON-lines file")
    p.add_argument("file", help="JSON-lines records, or - for stdin")

    _query_args(sub.add_parser("search", help="run a query"))
    _query_args(sub.add_parser("rss", help="run a query and print it as an RSS feed"))

    p = sub.add_parser("classify", help="score one record document against each database")
    p.add_argument("file", help="one JSON record document, or - for stdin")

    p = sub.add_parser("reclass-report", help="records that fit another database better")
    p.add_argument("--source", required=True, help="database to scan")

    p = sub.add_parser("digest", help="run one digest cycle")
    p.add_argument("--now", help="ISO timestamp (default: current time)")

    sub.add_parser("stats", help="corpus statistics")

    p = sub.add_parser("affil-list", help="list affiliation spellings containing a pattern")
    p.add_argument("pattern")

    p = sub.add_parser("affil-search", help="records carrying any of the given spellings")
    p.add_argument("spelling", nargs="+")

    p = sub.add_parser("lib-create", help="create a private library")
    p.add_argument("name")
    p.add_argument("--owner", default="")

    p = sub.add_parser("lib-add", help="add bibcodes to a library")
    p.add_argument("token")
    p.add_argument("bibcodes", nargs="+")

    p = sub.add_parser("lib-show", help="show a library")
    p.add_argument("token")

    p = sub.add_parser("set-refereed", help="declare a journal's refereed status")
    p.add_argument("journal")
    p.add_argument("status", choices=["refereed", "non-refereed"])

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--listen", help="host:port (default from config)")
    return parser


def _load_config(args: argparse.Namespace) -> ServiceConfig:
    path = args.config or os.environ.get("ADSLITE_CONFIG")
    if path is None and Path("adslite.ini").is_file():
        path = "adslite.ini"
    return ServiceConfig.load(path)


def run(args: argparse.Namespace, app: App, out) -> int:
    cmd = args.command
    if cmd == "ingest":
        report = app.ingest(_read_input(args.file).splitlines())
        print(f"accepted\t{report.accepted}", file=out)
        print(f"rejected\t{report.rejected_count}", file=out)
        for rej in report.rejected:
            print(f"line {rej.line}\t{rej.code}\t{rej.message}", file=out)
    elif cmd == "search":
        ast, results = app.search(_fields(args))
        print(f"# {canonical_query(ast)}", file=out)
        for bibcode, score in results:
            print(f"{bibcode}\t{score!r}", file=out)
    elif cmd == "rss":
        out.write(app.rss(_fields(args)).xml)
    elif cmd == "classify":
        result = app.classify(json.loads(_read_input(args.file)))
        print(f"gated\t{int(result.gated)}", file=out)
        print(f"assigned\t{result.assigned or '-'}", file=out)
        for db, score in sorted(result.scores.items()):
            print(f"score\t{db}\t{score!r}", file=out)
    elif cmd == "reclass-report":
        for s in app.reclass_report(args.source):
            print(f"{s.bibcode}\t{','.join(s.current)}\t{s.suggested}\t{s.margin!r}", file=out)
    elif cmd == "digest":
        now = datetime.fromisoformat(args.now) if args.now else None
        if now is not None and now.tzinfo is None:
            now = now.replace(tzinfo=timezone.utc)
        written = app.digest(now)
        print(f"{len(written)} digests", file=out)
        for doc, path in written:
            print(f"{doc.subscriber_id}\t{doc.database}\t{len(doc.items)}\t{path}", file=out)
    elif cmd == "stats":
        stats = app.stats()
        for key, value in stats.items():
            if isinstance(value, dict):
                for sub, n in value.items():
                    print(f"{key}.{sub}\t{n!r}", file=out)
            else:
                print(f"{key}\t{value!r}", file=out)
    elif cmd == "affil-list":
        for entry in app.affil_list(args.pattern):
            print(f"{entry.record_count}\t{entry.spelling}", file=out)
    elif cmd == "affil-search":
        found = app.affil_search(args.spelling)
        flag = "biased" if found.coverage.biased else "unbiased"
        print(f"# coverage\t{found.coverage.fraction!r}\t{flag}", file=out)
        for bibcode in found.bibcodes:
            print(bibcode, file=out)
    elif cmd == "lib-create":
        lib = app.lib_create(args.name, args.owner)
        print(f"{lib.token}\t{lib.url}", file=out)
    elif cmd == "lib-add":
        lib, errors = app.lib_add(args.token, args.bibcodes)
        for err in errors:
            print(f"error\t{err.code}\t{err}", file=out)
        print(f"{lib.token}\t{len(lib.bibcodes)}", file=out)
    elif cmd == "lib-show":
        lib = app.lib_show(args.token)
        print(f"token\t{lib.token}", file=out)
        print(f"name\t{lib.name}", file=out)
        print(f"owner\t{lib.owner}", file=out)
        for bibcode in lib.bibcodes:
            print(bibcode, file=out)
    elif cmd == "set-refereed":
        app.set_refereed(args.journal, args.status)
        print(f"{args.journal}\t{app.registry.status(args.journal)}", file=out)
    elif cmd == "serve":
        server = make_server(app, args.listen)
        print("listening on {}:{}".format(*server.server_address[:2]), file=out, flush=True)
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            pass
        finally:
            server.server_close()
    return 0


def main(argv: Sequence[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        app = App(_load_config(args))
        return run(args, app, out)
    except AdsliteError as exc:
        print(f"adslite: {exc.code}: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"adslite: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
