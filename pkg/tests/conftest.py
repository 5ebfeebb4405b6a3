from __future__ import annotations

import itertools
import json
from datetime import datetime, timedelta, timezone
from pathlib import Path

import pytest

from adslite.corpus import Corpus
from adslite.index import SynonymTable, build_index

FIXTURES = Path(__file__).parent / "fixtures"

# criterion number -> status line, filled by the acceptance module
ACCEPTANCE_LINES: dict[int, str] = {}

_counter = itertools.count(1)


def make_doc(bibcode=None, title="Untitled", abstract=None, authors=("Doe, Jane",), year=2006, month=1,
             journal="ApJ", databases=("ast",), references=(), objects=(), affs=None):
    """Interchange document with sensible defaults; authors given as "Last, First Middle" strings."""
    if bibcode is None:
        bibcode = f"{year}{journal:.<5}{next(_counter):.>4}..{1:.>3}X"[:19]
    parsed = []
    for i, a in enumerate(authors):
        last, _, given = a.partition(",")
        parts = given.split()
        parsed.append({
            "last": last.strip(),
            "first": parts[0] if parts else "",
            "middle": parts[1:],
            "aff": affs[i] if affs else None,
        })
    return {
        "bibcode": bibcode,
        "title": title,
        "abstract": abstract,
        "authors": parsed,
        "pubdate": {"year": year, "month": month},
        "journal": journal,
        "databases": list(databases),
        "references": list(references),
        "objects": list(objects),
    }


def corpus_of(docs):
    corpus = Corpus()
    report = corpus.ingest(docs)
    assert report.rejected_count == 0, report.rejected
    return corpus


def indexed(docs, groups=()):
    corpus = corpus_of(docs)
    return corpus, build_index(corpus, SynonymTable.from_groups(groups))


def load_jsonl(path):
    return [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]


class FakeClock:
    def __init__(self, start=datetime(2006, 9, 1, tzinfo=timezone.utc)):
        self.now = start

    def __call__(self):
        return self.now

    def advance(self, **kw):
        self.now += timedelta(**kw)
        return self.now


@pytest.fixture
def clock():
    return FakeClock()


@pytest.fixture
def desk_docs():
    return load_jsonl(FIXTURES / "desk487.jsonl")


RED = [("red", "reddening", "reddened")]


def make_site(root, docs, profiles=(), groups=None):
    """Write a complete deployment under ``root`` and return the config path."""
    root.mkdir(parents=True, exist_ok=True)
    (root / "corpus.jsonl").write_text("".join(json.dumps(d, sort_keys=True) + "\n" for d in docs))
    (root / "synonyms.txt").write_text("red reddening reddened\ngalaxy galaxies\nqso quasar\n")
    (root / "groups").mkdir(exist_ok=True)
    for name, members in (groups or {}).items():
        (root / "groups" / f"{name}.txt").write_text("".join(m + "\n" for m in members))
    (root / "classifier.conf").write_text(
        "min_words = 3\ncitation_weight = 1.0\nsmoothing = 0.5\ncore_journals = ast:ApJ,AJ phy:PhRvD\n")
    (root / "refereed.log").write_text(
        "2006-01-01T00:00:00+00:00 ApJ refereed\n2006-01-01T00:00:00+00:00 AJ refereed\n")
    (root / "profiles.jsonl").write_text("".join(json.dumps(p) + "\n" for p in profiles))
    config = root / "adslite.ini"
    config.write_text(
        "[adslite]\ncorpus = corpus.jsonl\nsynonyms = synonyms.txt\ngroups = groups\n"
        "registry = refereed.log\nparams = classifier.conf\nprofiles = profiles.jsonl\n"
        "libraries = libraries.jsonl\noutput = digests\nlisten = 127.0.0.1:0\n")
    return config


def site_docs():
    from gen import random_docs

    docs = random_docs(50, seed=21)
    docs[3]["authors"][0] = {"last": "Gardner", "first": "Helen", "middle": ["S."], "aff": "CfA"}
    docs[8]["authors"].insert(0, {"last": "Gardner", "first": "H.", "middle": [], "aff": None})
    docs[9]["authors"].append({"last": "Gardner", "first": "Helen", "middle": [], "aff": "CfA"})
    return docs


@pytest.fixture
def site(tmp_path):
    docs = site_docs()
    groups = {"CfA": [docs[i]["bibcode"] for i in (1, 3, 5, 7, 9)]}
    profiles = [{"id": "hgardner", "queries": {"ast": {"text": "galaxy"}, "pre": {"author": ["Gardner"]}},
                 "frequencies": {"pre": "daily"}}]
    return make_site(tmp_path / "site", docs, profiles, groups), docs


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
        passed = sum(line.startswith("PASS") for line in ACCEPTANCE_LINES.values())
        terminalreporter.write_line(f"{passed}/{len(ACCEPTANCE_LINES)} criteria passed")
