"""Brute-force reference evaluators.

Nothing here imports adslite: each oracle re-derives its answer directly
from raw interchange documents so it can check the real code paths.
"""

from __future__ import annotations

import math
import unicodedata
from collections import Counter


def o_tokens(text):
    if not text:
        return []
    out, cur = [], []
    for ch in unicodedata.normalize("NFKD", text):
        if unicodedata.combining(ch):
            continue
        if ch.isalnum():
            cur.append(ch.lower())
        else:
            out.append("".join(cur))
            cur = []
    out.append("".join(cur))
    return [t for t in out if len(t) >= 2]


def o_fold(text):
    return "".join(c for c in unicodedata.normalize("NFKD", text) if not unicodedata.combining(c)).lower().strip()


def o_months(start, end):
    """Every (year, month) a range covers, by walking the calendar."""
    (sy, sm), (ey, em) = start, end
    sm = sm or 1
    em = em or 12
    covered = set()
    y, m = sy, sm
    while (y, m) <= (ey, em):
        covered.add((y, m))
        m += 1
        if m == 13:
            y, m = y + 1, 1
    return covered


def o_date_matches(start, end, year, month):
    covered = o_months(start, end)
    if month == 0:
        return all((year, m) in covered for m in range(1, 13))
    return (year, month) in covered


def _parts(s):
    return [p for p in o_fold(s).replace(".", " ").split() if p]


def o_author_matches(last, first, caret, authors):
    """``authors`` are interchange dicts; ``first`` is the raw query given-name string or None."""
    pool = authors[:1] if caret else authors
    q = _parts(first) if first else []
    for a in pool:
        if o_fold(a["last"]) != o_fold(last):
            continue
        r = _parts(a.get("first") or "")
        for mid in a.get("middle") or []:
            r += _parts(mid)
        ok = True
        for i, qp in enumerate(q):
            if i >= len(r):
                break
            rp = r[i]
            if not (qp == rp or (len(qp) == 1 and rp[0] == qp) or (len(rp) == 1 and qp[0] == rp)):
                ok = False
                break
        if ok:
            return True
    return False


def o_expand(word, exact, groups):
    if exact:
        return {word}
    for g in groups:
        if word in g:
            return set(g)
    return {word}


def o_search(docs, q, groups, synonym_groups, refereed):
    """Evaluate structured query ``q`` over docs (list in ingest order).

    q keys: authors [(last, first, caret)], terms [(token, exact)],
    objects [str], date ((y,m),(y,m)) | None, include set | None,
    exclude set, refereed bool, group str | None, dbs set | None,
    combine "AND"|"OR", limit int.
    """
    n = len(docs)
    toks = []
    for d in docs:
        toks.append((Counter(o_tokens(d["title"])), Counter(o_tokens(d.get("abstract")))))
    df = Counter()
    for tt, ta in toks:
        for term in set(tt) | set(ta):
            df[term] += 1

    expansions = [o_expand(t, ex, synonym_groups) for t, ex in q["terms"]]
    obj_exp = [[o_expand(t, False, synonym_groups) for t in o_tokens(o)] for o in q["objects"]]
    score_terms = set()
    for e in expansions:
        score_terms |= e
    for oe in obj_exp:
        for e in oe:
            score_terms |= e

    hits = []
    for seq, d in enumerate(docs, start=1):
        tt, ta = toks[seq - 1]
        present = set(tt) | set(ta)
        if not all(o_author_matches(last, first, caret, d["authors"]) for last, first, caret in q["authors"]):
            continue
        if expansions:
            flags = [bool(e & present) for e in expansions]
            if q["combine"] == "AND" and not all(flags):
                continue
            if q["combine"] == "OR" and not any(flags):
                continue
        if q["objects"]:
            names = {o.lower() for o in d.get("objects") or []}
            ok = False
            for o, oe in zip(q["objects"], obj_exp):
                if o.lower() in names or (oe and all(e & present for e in oe)):
                    ok = True
            if not ok:
                continue
        if q["date"] is not None:
            (s, e) = q["date"]
            if not o_date_matches(s, e, d["pubdate"]["year"], d["pubdate"]["month"]):
                continue
        if q["include"] is not None and d["journal"] not in q["include"]:
            continue
        if d["journal"] in q["exclude"]:
            continue
        if q["refereed"] and d["journal"] not in refereed:
            continue
        if q["group"] is not None and d["bibcode"] not in groups[q["group"]]:
            continue
        if q["dbs"] is not None and not set(d["databases"]) & q["dbs"]:
            continue
        s = 0.0
        for term in sorted(score_terms):
            c = 2 * tt[term] + ta[term]
            if c:
                s += c * math.log(1 + n / df[term])
        hits.append((-s, seq, d["bibcode"], s))
    hits.sort()
    return [(b, s) for _, _, b, s in hits[: q["limit"]]]


def o_journal_of(bibcode):
    return bibcode[4:9].strip(".")


def o_classifier(docs, dbs, smoothing, weights, default_weight, citation_weight, core):
    """Returns (score(doc, db), prob(db, term), vocab) for the log-ratio + core-citation scorer."""
    counts = {db: Counter() for db in dbs}
    for d in docs:
        words = o_tokens(d["title"]) + o_tokens(d.get("abstract"))
        for db in d["databases"]:
            if db in counts:
                for w in words:
                    counts[db][w] += 1
    vocab = set()
    for c in counts.values():
        vocab |= set(c)
    totals = {db: sum(c.values()) for db, c in counts.items()}
    pooled_total = sum(totals.values())

    def prob(db, t):
        return (counts[db][t] + smoothing) / (totals[db] + smoothing * len(vocab))

    def bg(t):
        return (sum(counts[db][t] for db in dbs) + smoothing) / (pooled_total + smoothing * len(vocab))

    def score(d, db):
        s = 0.0
        for t in o_tokens(d["title"]) + o_tokens(d.get("abstract")):
            if t in vocab:
                s += weights.get(t, default_weight) * math.log(prob(db, t) / bg(t))
        cites = sum(1 for r in d.get("references") or [] if o_journal_of(r) in core.get(db, ()))
        return s + citation_weight * cites

    return score, prob, vocab


def o_stats(docs):
    present = {d["bibcode"] for d in docs}
    per = {"ast": 0, "phy": 0, "pre": 0, "gen": 0}
    for d in docs:
        for db in set(d["databases"]):
            per[db] += 1
    return {
        "total": len(docs),
        "per_database": per,
        "with_abstract": sum(1 for d in docs if (d.get("abstract") or "").strip()),
        "with_references": sum(1 for d in docs if d.get("references")),
        "citation_pairs": sum(1 for d in docs for r in set(d.get("references") or []) if r in present),
        "with_aff": sum(1 for d in docs if any((a.get("aff") or "").strip() for a in d["authors"])),
    }
