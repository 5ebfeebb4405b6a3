import json
import threading
import urllib.error
import urllib.parse
import urllib.request

import pytest

from adslite.alerts import check_rss
from adslite.errors import ConfigError
from adslite.service import App, ServiceConfig, make_server

from conftest import FakeClock, FIXTURES, make_site


def get(app, target):
    status, ctype, body = app.handle("GET", target)
    return status, json.loads(body) if ctype == "application/json" else body.decode()


def post(app, target, payload):
    body = payload if isinstance(payload, bytes) else json.dumps(payload).encode()
    status, _, out = app.handle("POST", target, body)
    return status, json.loads(out)


@pytest.fixture
def app(site):
    config, _ = site
    return App(ServiceConfig.load(config, env={}), clock=FakeClock(), library_seed=7)


def test_config_fails_fast(tmp_path, site):
    config, _ = site
    (config.parent / "synonyms.txt").unlink()
    with pytest.raises(ConfigError, match="synonyms"):
        ServiceConfig.load(config, env={})
    with pytest.raises(ConfigError):
        ServiceConfig.load(tmp_path / "nope.ini", env={})


def test_config_inline_comments(site):
    config, _ = site
    text = config.read_text().replace("corpus = corpus.jsonl", "corpus = corpus.jsonl   ; one record per line")
    config.write_text(text)
    assert ServiceConfig.load(config, env={}).corpus.name == "corpus.jsonl"


def test_config_env_override(site, tmp_path):
    config, _ = site
    other = tmp_path / "other.jsonl"
    other.write_text("")
    cfg = ServiceConfig.load(config, env={"ADSLITE_CORPUS": str(other), "ADSLITE_LISTEN": "0.0.0.0:9999"})
    assert cfg.corpus == other and cfg.listen == "0.0.0.0:9999"


def test_stats_on_desk_fixture(tmp_path):
    docs = [json.loads(ln) for ln in (FIXTURES / "desk487.jsonl").read_text().splitlines()]
    app = App(ServiceConfig.load(make_site(tmp_path, docs), env={}))
    status, body = get(app, "/stats")
    assert status == 200 and body["status"] == "ok"
    stats = body["stats"]
    assert stats["total_records"] == 487
    assert stats["per_database"] == {"ast": 120, "gen": 38, "phy": 304, "pre": 38}
    assert (stats["with_abstract"], stats["with_references"], stats["citation_pairs"]) == (322, 166, 470)


def test_search_errors(app):
    status, body = get(app, "/search")
    assert status == 400 and body == {"status": "error", "error": "EmptyQuery", "message": "query has no constraints"}
    status, body = get(app, "/search?group=Nowhere")
    assert status == 400 and body["error"] == "UnknownGroup"
    status, body = get(app, "/search?start_date=abc")
    assert body["error"] == "MalformedDate"
    status, body = get(app, "/nope")
    assert status == 404 and body["error"] == "NotFound"


def test_search_and_rss(app, site):
    _, docs = site
    status, body = get(app, "/search?author=%5EGardner&limit=100")
    assert status == 200
    first = {d["bibcode"] for d in docs if d["authors"][0]["last"] == "Gardner"}
    anywhere = {d["bibcode"] for d in docs if any(a["last"] == "Gardner" for a in d["authors"])}
    assert {docs[3]["bibcode"], docs[8]["bibcode"]} <= first and docs[9]["bibcode"] in anywhere - first
    assert {r["bibcode"] for r in body["results"]} == first
    status, xml = get(app, "/rss?text=zzzzzz")
    assert status == 200 and check_rss(xml) == [] and "<item>" not in xml
    status, xml = get(app, "/rss?author=Gardner")
    assert xml.count("<item>") == len(anywhere) and check_rss(xml) == []


def test_library_routes(app):
    status, body = post(app, "/lib", {"name": "Reading", "owner": "cg"})
    token = body["library"]["token"]
    status, body = post(app, f"/lib/{token}/add", {"bibcodes": ["2006ApJ...636..891G", "bad"]})
    assert body["library"]["bibcodes"] == ["2006ApJ...636..891G"]
    assert [e["error"] for e in body["errors"]] == ["MalformedBibcode"]
    status, body = get(app, f"/lib/{token}")
    assert status == 200 and body["library"]["name"] == "Reading"
    status, body = get(app, "/lib/AAAAAAAAAAAAAAAA")
    assert status == 404 and body["error"] == "UnknownToken"


def test_affiliation_routes(app):
    status, body = get(app, "/affil/list?pattern=cambridge")
    spellings = [e["spelling"] for e in body["affiliations"]]
    assert spellings and all("cambridge" in s.lower() for s in spellings)
    query = "&".join(f"spelling={urllib.parse.quote(s)}" for s in spellings)
    status, body = get(app, f"/affil/search?{query}")
    assert status == 200 and body["bibcodes"] and body["coverage"]["biased"]


def test_classify_route(app):
    doc = {"bibcode": "2007ApJ...700..001Z", "title": "galaxy stellar", "abstract": "galaxy stellar dust survey",
           "authors": [{"last": "Z"}], "pubdate": {"year": 2007}, "journal": "ApJ", "databases": ["ast"]}
    status, body = post(app, "/classify", doc)
    assert status == 200 and not body["classification"]["gated"]
    assert body["classification"]["assigned"] in {"ast", "phy", "pre", "gen"}
    status, body = post(app, "/classify", dict(doc, abstract="dust"))
    assert body["classification"]["gated"]
    status, body = post(app, "/classify", {"bibcode": "x"})
    assert status == 400 and body["error"] == "MalformedBibcode"


def test_ingest_route_rebuilds_index(app, site):
    config, _ = site
    doc = {"bibcode": "2007ApJ...700..001Z", "title": "Zwicky xylophone", "abstract": None,
           "authors": [{"last": "Zwicky"}], "pubdate": {"year": 2007, "month": 3}, "journal": "ApJ",
           "databases": ["ast"]}
    _, before = get(app, "/search?text=xylophone")
    assert before["results"] == []
    status, body = post(app, "/ingest", (json.dumps(doc) + "\n" + json.dumps(doc) + "\n").encode())
    assert body["accepted"] == 1 and body["rejected"][0]["error"] == "DuplicateBibcode"
    _, after = get(app, "/search?text=xylophone")
    assert [r["bibcode"] for r in after["results"]] == [doc["bibcode"]]
    # persisted for the next start
    assert App(ServiceConfig.load(config, env={})).corpus.get(doc["bibcode"]) is not None


def test_refereed_route(app):
    _, body = get(app, "/search?journals_include=BAAS&refereed=1")
    assert body["results"] == []
    status, body = post(app, "/refereed", {"journal": "BAAS", "status": "refereed"})
    assert body["refereed"] == "refereed"
    _, body = get(app, "/search?journals_include=BAAS&refereed=1")
    assert body["results"]


def test_bodies_deterministic(app):
    for target in ("/stats", "/search?text=galaxy", "/rss?text=dust", "/affil/list?pattern=cfa"):
        assert app.handle("GET", target) == app.handle("GET", target)


def test_live_http_server(app):
    server = make_server(app, "127.0.0.1:0")
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    base = "http://{}:{}".format(*server.server_address[:2])
    try:
        with urllib.request.urlopen(base + "/stats") as resp:
            assert resp.status == 200 and json.load(resp)["stats"]["total_records"] == 50
        with pytest.raises(urllib.error.HTTPError) as err:
            urllib.request.urlopen(base + "/search")
        assert err.value.code == 400 and json.load(err.value)["error"] == "EmptyQuery"
        req = urllib.request.Request(base + "/lib", data=b'{"name": "x"}', method="POST")
        with urllib.request.urlopen(req) as resp:
            assert len(json.load(resp)["library"]["token"]) == 16
    finally:
        server.shutdown()
        server.server_close()
