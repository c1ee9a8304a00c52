"""Record parsing, corpus filtering, and shard merging."""

from __future__ import annotations

import gzip
import io
import json
from datetime import date, datetime, timezone

import pytest
from hypothesis import given, strategies as st

from conftest import make_record
from drugpulse.errors import ContractError
from drugpulse.records import (
    REJECTION_REASONS,
    FilteredCorpus,
    MalformedLine,
    _parse_timestamp,
    filter_corpus,
    merge_corpora,
    open_jsonl,
    parse_records,
    record_from_dict,
    record_to_dict,
)

WINDOW = (date(2020, 1, 29), date(2021, 11, 30))


def _obj(**over) -> dict:
    base = {
        "id": "t1",
        "created_at": "2020-06-02T12:00:00Z",
        "text": "hello world",
        "lang": "en",
        "is_repost": False,
        "user": {"id": "u1"},
    }
    base.update(over)
    return base


class TestParseTimestamp:
    def test_zulu_suffix(self):
        dt = _parse_timestamp("2020-05-01T12:00:00Z")
        assert dt == datetime(2020, 5, 1, 12, tzinfo=timezone.utc)

    def test_naive_assumed_utc(self):
        dt = _parse_timestamp("2020-05-01T12:00:00")
        assert dt.tzinfo == timezone.utc
        assert dt.hour == 12

    def test_offset_converted_to_utc(self):
        dt = _parse_timestamp("2020-05-01T02:00:00+05:00")
        assert dt == datetime(2020, 4, 30, 21, tzinfo=timezone.utc)

    @pytest.mark.parametrize("bad", [None, 12345, "", "yesterday", "2020-13-40T00:00:00Z"])
    def test_rejects_junk(self, bad):
        with pytest.raises(MalformedLine):
            _parse_timestamp(bad)


class TestRecordFromDict:
    def test_full_round_trip(self):
        obj = _obj(
            user={
                "id": "u9",
                "location": "Austin, TX",
                "description": "ICU nurse",
                "following": ["a", "b"],
            },
            place={"full_name": "Austin, TX", "country_code": "US"},
        )
        rec = record_from_dict(obj)
        assert rec.author.followed_accounts == ("a", "b")
        assert rec.place.country_code == "US"
        again = record_from_dict(record_to_dict(rec))
        assert again == rec

    def test_extra_keys_ignored(self):
        rec = record_from_dict(_obj(metrics={"likes": 3}))
        assert rec.id == "t1"

    @pytest.mark.parametrize(
        "over",
        [
            {"id": ""},
            {"id": 7},
            {"text": None},
            {"lang": ""},
            {"is_repost": "yes"},
            {"user": None},
            {"user": {"id": ""}},
            {"user": {"id": "u1", "following": "notalist"}},
            {"created_at": "nope"},
        ],
    )
    def test_rejects_malformed(self, over):
        with pytest.raises(MalformedLine):
            record_from_dict(_obj(**over))


def test_parse_records_counts_malformed():
    lines = [
        json.dumps(_obj(id="a")).encode(),
        b'{"id": "broken',
        b"not json",
        json.dumps(_obj(id="b")).encode(),
        json.dumps({"id": 42}).encode(),
        b"",  # blank lines are not records and not errors
    ]
    records, malformed = parse_records(lines)
    assert [r.id for r in records] == ["a", "b"]
    assert malformed == 3


def test_open_jsonl_reads_gzip(tmp_path):
    p = tmp_path / "c.jsonl.gz"
    with gzip.open(p, "wb") as f:
        f.write(json.dumps(_obj()).encode() + b"\n")
    with open_jsonl(p) as f:
        records, malformed = parse_records(f)
    assert len(records) == 1 and malformed == 0


class TestFilterCorpus:
    def test_keeps_clean_in_order(self):
        recs = [make_record(rec_id=f"t{i}") for i in range(5)]
        out = filter_corpus(recs, WINDOW)
        assert [r.id for r in out.records] == [f"t{i}" for i in range(5)]
        assert sum(out.rejection_counts.values()) == 0

    def test_window_edges_inclusive(self):
        inside = [
            make_record(rec_id="a", created="2020-01-29T00:00:00+00:00"),
            make_record(rec_id="b", created="2021-11-30T23:59:59+00:00"),
        ]
        outside = [
            make_record(rec_id="c", created="2020-01-28T23:59:59+00:00"),
            make_record(rec_id="d", created="2021-12-01T00:00:00+00:00"),
        ]
        out = filter_corpus(inside + outside, WINDOW)
        assert [r.id for r in out.records] == ["a", "b"]
        assert out.rejection_counts["out_of_window"] == 2

    def test_rejection_precedence(self):
        # one reason per record, tested in the documented check order
        recs = [
            make_record(rec_id="x", lang="es", is_repost=True),  # non_english wins
            make_record(rec_id="y", is_repost=True, created="2019-01-01T00:00:00+00:00"),
            make_record(rec_id="z", created="2019-01-01T00:00:00+00:00"),
            make_record(rec_id="z", created="2019-01-01T00:00:00+00:00"),  # still out_of_window
        ]
        out = filter_corpus(recs, WINDOW)
        assert out.rejection_counts == {
            "non_english": 1,
            "repost": 1,
            "duplicate": 0,
            "malformed": 0,
            "out_of_window": 2,
        }

    def test_duplicate_keeps_first(self):
        first = make_record(rec_id="t", text="first")
        second = make_record(rec_id="t", text="second")
        out = filter_corpus([first, second], WINDOW)
        assert out.records == [first]
        assert out.rejection_counts["duplicate"] == 1

    def test_malformed_count_folds_in(self):
        out = filter_corpus([make_record()], WINDOW, malformed_count=4)
        assert out.rejection_counts["malformed"] == 4
        assert out.total_seen() == 5

    def test_backwards_window_rejected(self):
        with pytest.raises(ContractError):
            filter_corpus([], (WINDOW[1], WINDOW[0]))


@given(
    st.lists(
        st.tuples(
            st.sampled_from("abcd"),                      # id pool small enough to collide
            st.sampled_from(["en", "es"]),
            st.booleans(),
            st.dates(date(2019, 6, 1), date(2022, 6, 1)),
        ),
        max_size=40,
    )
)
def test_filter_conservation(items):
    recs = [
        make_record(rec_id=i, lang=lang, is_repost=rp, created=f"{d.isoformat()}T10:00:00+00:00")
        for i, lang, rp, d in items
    ]
    out = filter_corpus(recs, WINDOW)
    assert out.total_seen() == len(recs)
    ids = [r.id for r in out.records]
    assert len(ids) == len(set(ids))
    assert set(out.rejection_counts) == set(REJECTION_REASONS)


def test_merge_corpora_dedups_across_shards():
    a = filter_corpus([make_record(rec_id="t1"), make_record(rec_id="t2")], WINDOW)
    b = filter_corpus([make_record(rec_id="t2"), make_record(rec_id="t3", lang="fr")], WINDOW)
    merged = merge_corpora([a, b])
    assert [r.id for r in merged.records] == ["t1", "t2"]
    assert merged.rejection_counts["duplicate"] == 1
    assert merged.rejection_counts["non_english"] == 1
    assert merged.total_seen() == 4


def test_merge_corpora_empty():
    merged = merge_corpora([])
    assert isinstance(merged, FilteredCorpus)
    assert merged.records == [] and merged.total_seen() == 0


def test_parse_records_from_stream_object():
    raw = json.dumps(_obj()).encode() + b"\n"
    records, malformed = parse_records(io.BytesIO(raw))
    assert len(records) == 1 and malformed == 0
