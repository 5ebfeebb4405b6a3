import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adslite.errors import SynonymTableError
from adslite.index import IndexedCorpus, SynonymTable, build_index, expand_term, score, tokenize

from conftest import RED, corpus_of, indexed, make_doc
from gen import SYNONYMS, random_docs
from oracles import o_tokens

TABLE = SynonymTable.from_groups(RED)


@pytest.mark.parametrize("text, expected", [
    ("Interstellar Reddening!", ["interstellar", "reddening"]),
    ("", []),
    ("...!?", []),
    ("T Tauri X-ray", ["tauri", "ray"]),
    ("Gödel's Ångström_units", ["godel", "angstrom", "units"]),
])
def test_tokenize(text, expected):
    assert tokenize(text) == expected


@given(st.text())
def test_tokenize_matches_oracle(text):
    assert tokenize(text) == o_tokens(text)


@given(st.text())
def test_tokens_are_clean(text):
    for tok in tokenize(text):
        assert tok and len(tok) >= 2
        assert not any(c.isspace() for c in tok)
        assert tok == tok.lower()


def test_expand_term():
    assert expand_term("reddening", TABLE) == {"red", "reddening", "reddened"}
    assert expand_term("reddening", TABLE, exact=True) == {"reddening"}
    assert expand_term("quasar", TABLE) == {"quasar"}


def test_expansion_idempotent_over_group():
    for member in ("red", "reddening", "reddened"):
        assert expand_term(member, TABLE) == expand_term("red", TABLE)


def test_synonym_table_parse_and_validation():
    table = SynonymTable.parse("# comment\nred reddening Reddened\n\ngalaxy galaxies\n")
    assert table.group_of("reddened") == {"red", "reddening", "reddened"}
    assert SynonymTable.parse(table.dump()) == table
    with pytest.raises(SynonymTableError):
        SynonymTable.parse("red reddening\nred crimson\n")
    with pytest.raises(SynonymTableError):
        SynonymTable.parse("lonely\n")
    with pytest.raises(SynonymTableError):
        SynonymTable.parse("x-ray xray\n")


def test_build_index_single_record():
    corpus, index = indexed([make_doc(title="Red Giants")])
    assert index.doc_count == 1
    assert {t: [(p.seq, p.field, p.tf) for p in pl] for t, pl in index.postings.items()} == {
        "red": [(1, "title", 1)], "giants": [(1, "title", 1)]}


def test_term_frequency_counted():
    _, index = indexed([make_doc(title="Giants", abstract="red red red")])
    assert [(p.seq, p.field, p.tf) for p in index.postings["red"]] == [(1, "abstract", 3)]


def test_index_not_expanded_at_build_time():
    _, index = indexed([make_doc(title="red")], RED)
    assert "reddening" not in index.postings


def test_rebuild_is_bit_identical():
    corpus = corpus_of(random_docs(200, seed=3))
    a = build_index(corpus, TABLE).serialize()
    b = build_index(corpus, TABLE).serialize()
    assert a == b
    assert a.startswith(b"ADSLITE-IDX\n1\n")
    assert IndexedCorpus.deserialize(a).serialize() == a


def test_deserialize_rejects_wrong_version():
    data = build_index(corpus_of([make_doc()])).serialize().replace(b"\n1\n", b"\n9\n", 1)
    with pytest.raises(ValueError):
        IndexedCorpus.deserialize(data)


def test_postings_sorted():
    _, index = indexed(random_docs(100, seed=5))
    for plist in index.postings.values():
        seqs = [p.seq for p in plist]
        assert seqs == sorted(seqs)
        assert all(p.tf >= 1 for p in plist)


def test_score_values():
    _, index = indexed([make_doc(title="nothing", abstract="quasar")])
    assert score(index, 1, ["galaxy"]) == 0
    assert score(index, 1, ["quasar"]) == pytest.approx(math.log(2))
    _, title_index = indexed([make_doc(title="quasar", abstract="nothing")])
    assert score(title_index, 1, ["quasar"]) == pytest.approx(2 * math.log(2))


def test_score_monotone_in_occurrences():
    prev = 0.0
    for n in range(1, 6):
        docs = [make_doc(abstract=" ".join(["dust"] * n)), make_doc(abstract="other words")]
        _, index = indexed(docs)
        s = score(index, 1, ["dust"])
        assert s >= prev
        prev = s


def test_index_matches_linear_scan():
    docs = random_docs(300, seed=11)
    corpus, index = indexed(docs, SYNONYMS)
    vocab = {t for d in docs for t in o_tokens(d["title"]) + o_tokens(d["abstract"])}
    for term in sorted(vocab) + ["absent"]:
        scan = {i for i, d in enumerate(docs, start=1) if term in o_tokens(d["title"]) + o_tokens(d["abstract"])}
        assert index.docs_with(term) == scan


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(["red", "reddening", "reddened", "dust"]), st.integers(0, 50))
def test_exact_results_subset_of_expanded(term, seed):
    docs = random_docs(60, seed=seed)
    _, index = indexed(docs, RED)
    exact = index.docs_with_any(expand_term(term, index.synonyms, True))
    loose = index.docs_with_any(expand_term(term, index.synonyms, False))
    assert exact <= loose
