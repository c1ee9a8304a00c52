"""Keyword loading, boundary-mode matching, span merging, partitioning."""

from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from conftest import make_record
from drugpulse.errors import LoadError
from drugpulse.lexicon import (
    DrugId,
    Keyword,
    KeywordMatcher,
    drug_token_spans,
    load_keyword_list,
    load_lexicon,
    match_drugs,
    normalize_text,
    partition_single_drug,
)


def _write_lexicon(tmp_path, rows):
    p = tmp_path / "lex.csv"
    body = "drug,pattern,boundary_mode\n" + "".join(f"{d},{pat},{m}\n" for d, pat, m in rows)
    p.write_text(body, encoding="utf-8")
    return p


MINIMAL = [
    ("hydroxychloroquine", "hcq", "exact-token"),
    ("ivermectin", "ivermectin", "token-prefix"),
    ("molnupiravir", "molnupiravir", "token-prefix"),
    ("remdesivir", "remdesivir", "token-prefix"),
]


def test_bundled_lexicon_names_every_drug(lexicon):
    for drug in DrugId:
        assert lexicon.entries[drug], drug


def test_keyword_validation():
    with pytest.raises(LoadError):
        Keyword(pattern="", boundary_mode="exact-token")
    with pytest.raises(LoadError):
        Keyword(pattern="x", boundary_mode="word")


def test_normalize_text_composes():
    assert normalize_text("é") == "é"


class TestBoundaryModes:
    def test_exact_token(self):
        m = KeywordMatcher([Keyword("hcq", "exact-token")])
        assert m.matches("HCQ works")
        assert m.matches("(hcq)")
        assert m.matches("take hcq.")
        assert m.matches("hcq")
        assert m.matches("hcq_tag")  # underscore is a boundary, not a token char
        assert not m.matches("thcqx")
        assert not m.matches("hcq2")
        assert not m.matches("2hcq")

    def test_token_prefix(self):
        m = KeywordMatcher([Keyword("hydroxych", "token-prefix")])
        assert m.matches("hydroxychloroquine")
        assert m.matches("Hydroxychloroquines are discussed")
        assert m.matches("hydroxych")
        assert not m.matches("xhydroxychloroquine")

    def test_substring_with_space_guard(self):
        m = KeywordMatcher([Keyword("hydroxy chloroquine", "substring-with-space-guard")])
        assert m.matches("hydroxy chloroquine")
        assert m.matches("hydroxy   chloroquine")
        assert m.matches("hydroxy\nchloroquine")
        assert m.matches("took hydroxy chloroquine today")
        assert not m.matches("dihydroxy chloroquine")
        assert not m.matches("hydroxy chloroquinelike")
        assert not m.matches("hydroxychloroquine")  # needs whitespace between parts

    def test_case_insensitive(self):
        m = KeywordMatcher([Keyword("veklury", "token-prefix")])
        assert m.matches("VEKLURY") and m.matches("VeKlUrY")


class TestLoadLexicon:
    def test_minimal_loads(self, tmp_path):
        lex = load_lexicon(_write_lexicon(tmp_path, MINIMAL))
        assert match_drugs("some hcq talk", lex) == {DrugId.HYDROXYCHLOROQUINE}

    def test_missing_drug_rejected(self, tmp_path):
        with pytest.raises(LoadError, match="no keywords"):
            load_lexicon(_write_lexicon(tmp_path, MINIMAL[:3]))

    def test_unknown_drug_rejected(self, tmp_path):
        rows = MINIMAL + [("aspirin", "asa", "exact-token")]
        with pytest.raises(LoadError, match="unknown drug"):
            load_lexicon(_write_lexicon(tmp_path, rows))

    def test_cross_drug_duplicate_rejected(self, tmp_path):
        rows = MINIMAL + [("remdesivir", "hcq", "exact-token")]
        with pytest.raises(LoadError, match="cross-drug"):
            load_lexicon(_write_lexicon(tmp_path, rows))

    def test_cross_drug_prefix_rejected(self, tmp_path):
        rows = MINIMAL + [("hydroxychloroquine", "rem", "token-prefix")]
        with pytest.raises(LoadError, match="cross-drug"):
            load_lexicon(_write_lexicon(tmp_path, rows))

    def test_missing_file(self, tmp_path):
        with pytest.raises(LoadError, match="not found"):
            load_lexicon(tmp_path / "absent.csv")

    def test_missing_columns(self, tmp_path):
        p = tmp_path / "lex.csv"
        p.write_text("drug,word\nivermectin,ivm\n", encoding="utf-8")
        with pytest.raises(LoadError, match="missing columns"):
            load_lexicon(p)


def test_match_drugs_multi(lexicon):
    text = "comparing hydroxychloroquine with ivermectin outcomes"
    assert match_drugs(text, lexicon) == {DrugId.HYDROXYCHLOROQUINE, DrugId.IVERMECTIN}
    assert match_drugs("nothing medicinal here", lexicon) == set()


class TestDrugTokenSpans:
    def test_prefix_extends_to_token_end(self, lexicon):
        text = "hydroxychloroquines"
        spans = drug_token_spans(text, lexicon)
        assert spans == [(0, len(text))]

    def test_overlapping_spans_merge(self, lexicon):
        # "plaq" and "plaquenil" both fire on the same token
        text = "my plaquenil prescription"
        spans = drug_token_spans(text, lexicon)
        assert spans == [(3, 3 + len("plaquenil"))]

    def test_sorted_disjoint(self, lexicon):
        text = "ivermectin now, remdesivir later"
        spans = drug_token_spans(text, lexicon)
        assert spans == sorted(spans)
        for (_, e1), (s2, _) in zip(spans, spans[1:]):
            assert e1 < s2

    def test_no_mention(self, lexicon):
        assert drug_token_spans("plain text", lexicon) == []


def test_partition_single_drug(lexicon):
    recs = [
        make_record(rec_id="a", text="ivermectin helped me"),
        make_record(rec_id="b", text="remdesivir trial results"),
        make_record(rec_id="c", text="ivermectin or remdesivir, both discussed"),
        make_record(rec_id="d", text="no drug here"),
    ]
    partitions, excluded = partition_single_drug(recs, lexicon)
    assert [r.id for r in partitions[DrugId.IVERMECTIN]] == ["a"]
    assert [r.id for r in partitions[DrugId.REMDESIVIR]] == ["b"]
    assert excluded == 1
    assigned = sum(len(v) for v in partitions.values())
    assert assigned + excluded + 1 == len(recs)  # +1 for the no-mention record


def test_load_keyword_list_rejects_empty(tmp_path):
    p = tmp_path / "kw.csv"
    p.write_text("pattern,boundary_mode\n", encoding="utf-8")
    with pytest.raises(LoadError, match="empty keyword file"):
        load_keyword_list(p)


_ALL_KEYWORDS = [
    (drug, kw.pattern) for drug in DrugId for kw in load_lexicon().entries[drug]
]


@given(st.sampled_from(_ALL_KEYWORDS), st.integers(min_value=0, max_value=2**40))
def test_case_flips_never_break_matching(lexicon, pair, bits):
    drug, pattern = pair
    surface = "".join(c.upper() if (bits >> i) & 1 else c for i, c in enumerate(pattern))
    assert drug in match_drugs(f"context {surface} context", lexicon)


@given(st.sampled_from(list(DrugId)), st.sampled_from(["!", " ", "...", "#", "-", "¿"]))
def test_punctuation_edges_never_break_matching(lexicon, drug, sep):
    kw = lexicon.entries[drug][0].pattern
    assert drug in match_drugs(f"x{sep}{kw}{sep}x", lexicon)
