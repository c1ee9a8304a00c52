"""Masking, cue scoring, dataset split, and evaluation metrics."""

from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from drugpulse.errors import ContractError, LoadError
from drugpulse.lexicon import match_drugs
from drugpulse.stance import (
    CLASS_ORDER,
    MASK_TOKEN,
    ClassifierHandle,
    CueTable,
    StanceLabel,
    classify,
    evaluate,
    load_cue_table,
    load_stance_dataset,
    mask_drug_names,
    rule_classify_one,
    sample_indices,
    score_cues,
)


def test_stance_label_numeric_round_trip():
    for label in CLASS_ORDER:
        assert StanceLabel.from_numeric(label.numeric()) is label
    assert StanceLabel.Negative.numeric() == -1
    assert StanceLabel.Positive.numeric() == 1
    with pytest.raises(ContractError):
        StanceLabel.from_numeric(5)


class TestMasking:
    def test_replaces_whole_token(self, lexicon):
        out = mask_drug_names("I took Hydroxychloroquines today", lexicon)
        assert out == f"I took {MASK_TOKEN} today"

    def test_multiple_mentions(self, lexicon):
        out = mask_drug_names("ivermectin versus remdesivir", lexicon)
        assert out == f"{MASK_TOKEN} versus {MASK_TOKEN}"

    def test_leaves_other_text_alone(self, lexicon):
        assert mask_drug_names("nothing to see", lexicon) == "nothing to see"

    def test_masked_text_has_no_mentions(self, lexicon):
        out = mask_drug_names("HCQ and hydroxy chloroquine and Plaquenil", lexicon)
        assert match_drugs(out, lexicon) == set()

    def test_idempotent(self, lexicon):
        once = mask_drug_names("stromectol dose question", lexicon)
        assert mask_drug_names(once, lexicon) == once


CUES = CueTable(
    positive=frozenset({"works", "safe"}),
    negative=frozenset({"dangerous", "scam"}),
    negators=frozenset({"not", "never", "isnt"}),
)


class TestScoreCues:
    def test_counts_polarity(self):
        assert score_cues("it works and it is safe", CUES) == 2
        assert score_cues("a dangerous scam", CUES) == -2
        assert score_cues("no cues here", CUES) == 0

    def test_negation_flips_within_window(self):
        assert score_cues("not safe", CUES) == -1
        assert score_cues("it is not at all safe", CUES) == -1  # 3 tokens back still flips
        assert score_cues("never works", CUES) == -1

    def test_negation_outside_window_ignored(self):
        # four tokens between negator and cue
        assert score_cues("not a thing here that works", CUES) == 1

    def test_apostrophes_fold(self):
        assert score_cues("isn't safe", CUES) == -1

    def test_case_insensitive(self):
        assert score_cues("SAFE", CUES) == 1


def test_rule_classify_sign_mapping():
    assert rule_classify_one("it works", CUES) is StanceLabel.Positive
    assert rule_classify_one("total scam", CUES) is StanceLabel.Negative
    assert rule_classify_one("just a question", CUES) is StanceLabel.Neutral
    assert rule_classify_one("works but dangerous", CUES) is StanceLabel.Neutral


def test_bundled_cue_table_loads(cues):
    assert cues.positive and cues.negative and cues.negators
    assert "not" in cues.negators


def test_load_cue_table_errors(tmp_path):
    p = tmp_path / "cues.csv"
    p.write_text("term,polarity\ngood,positive\n", encoding="utf-8")
    with pytest.raises(LoadError, match="both positive and negative"):
        load_cue_table(p)
    p.write_text("term,polarity\ngood,sideways\n", encoding="utf-8")
    with pytest.raises(LoadError, match="unknown polarity"):
        load_cue_table(p)
    p.write_text("word,mood\n", encoding="utf-8")
    with pytest.raises(LoadError, match="expected columns"):
        load_cue_table(p)


class TestClassify:
    def test_rule_path_order_preserving(self):
        handle = ClassifierHandle(kind="rule-baseline", cues=CUES)
        out = classify(["it works", "a scam", "hmm"], handle)
        assert out == [StanceLabel.Positive, StanceLabel.Negative, StanceLabel.Neutral]

    def test_masking_applies_before_scoring(self, lexicon):
        # drug name is not a cue, so masking must not change the label
        handle = ClassifierHandle(kind="rule-baseline", masking=True, cues=CUES)
        out = classify(["ivermectin works"], handle, lexicon)
        assert out == [StanceLabel.Positive]

    def test_unknown_kind_rejected(self):
        with pytest.raises(ContractError):
            ClassifierHandle(kind="magic")

    def test_sidecar_without_client_rejected(self):
        handle = ClassifierHandle(kind="sidecar")
        with pytest.raises(ContractError, match="no client"):
            classify(["x"], handle)


def _dataset_csv(tmp_path, rows):
    p = tmp_path / "ds.csv"
    p.write_text("text,label\n" + "".join(f"{t},{c}\n" for t, c in rows), encoding="utf-8")
    return p


class TestStanceDataset:
    def test_split_sizes_and_determinism(self, tmp_path):
        rows = [(f"text {i}", i % 3) for i in range(10)]
        p = _dataset_csv(tmp_path, rows)
        train1, valid1 = load_stance_dataset(p, split_seed=11)
        train2, valid2 = load_stance_dataset(p, split_seed=11)
        assert len(train1) == 7 and len(valid1) == 3
        assert train1.items == train2.items and valid1.items == valid2.items
        combined = sorted(t for t, _ in train1.items + valid1.items)
        assert combined == sorted(t for t, _ in rows)

    def test_different_seed_different_split(self, tmp_path):
        p = _dataset_csv(tmp_path, [(f"text {i}", 0) for i in range(30)])
        train1, _ = load_stance_dataset(p, split_seed=1)
        train2, _ = load_stance_dataset(p, split_seed=2)
        assert train1.items != train2.items

    def test_class_counts(self, tmp_path):
        p = _dataset_csv(tmp_path, [("a", 0), ("b", 0), ("c", 2)])
        train, valid = load_stance_dataset(p, split_seed=0)
        counts = {
            label: train.class_counts[label] + valid.class_counts[label]
            for label in CLASS_ORDER
        }
        assert counts == {
            StanceLabel.Negative: 2,
            StanceLabel.Neutral: 0,
            StanceLabel.Positive: 1,
        }

    @pytest.mark.parametrize("bad", ["3", "x", ""])
    def test_bad_label_codes(self, tmp_path, bad):
        p = tmp_path / "ds.csv"
        p.write_text(f"text,label\nhello,{bad}\n", encoding="utf-8")
        with pytest.raises(LoadError):
            load_stance_dataset(p, split_seed=0)

    def test_empty_rejected(self, tmp_path):
        p = tmp_path / "ds.csv"
        p.write_text("text,label\n", encoding="utf-8")
        with pytest.raises(LoadError, match="no data rows"):
            load_stance_dataset(p, split_seed=0)


class TestSampleIndices:
    def test_sorted_unique_in_range(self):
        idx = sample_indices(100, 30, seed=5)
        assert idx == sorted(idx)
        assert len(set(idx)) == 30
        assert all(0 <= i < 100 for i in idx)

    def test_deterministic(self):
        assert sample_indices(50, 10, seed=3) == sample_indices(50, 10, seed=3)

    def test_oversample_rejected(self):
        with pytest.raises(ContractError):
            sample_indices(5, 6, seed=0)


class TestEvaluate:
    def test_hand_computed(self):
        gold = [StanceLabel.Positive, StanceLabel.Positive, StanceLabel.Negative, StanceLabel.Neutral]
        pred = [StanceLabel.Positive, StanceLabel.Negative, StanceLabel.Negative, StanceLabel.Neutral]
        row = evaluate(pred, gold)
        assert row.accuracy == 0.75
        pos = row.per_class[StanceLabel.Positive]
        assert pos.precision == 1.0 and pos.recall == 0.5
        assert pos.f1 == pytest.approx(2 / 3)
        neg = row.per_class[StanceLabel.Negative]
        assert neg.precision == 0.5 and neg.recall == 1.0
        # confusion rows are gold, columns predicted, both in class order
        assert row.confusion[0] == (1, 0, 0)
        assert row.confusion[2] == (1, 0, 1)

    def test_errors(self):
        with pytest.raises(ContractError):
            evaluate([StanceLabel.Neutral], [])
        with pytest.raises(ContractError):
            evaluate([], [])

    @given(
        st.lists(
            st.tuples(st.sampled_from(CLASS_ORDER), st.sampled_from(CLASS_ORDER)),
            min_size=1,
            max_size=50,
        )
    )
    def test_accuracy_is_trace_over_total(self, pairs):
        pred = [p for p, _ in pairs]
        gold = [g for _, g in pairs]
        row = evaluate(pred, gold)
        trace = sum(row.confusion[i][i] for i in range(3))
        assert row.accuracy == trace / len(pairs)
        assert sum(sum(r) for r in row.confusion) == len(pairs)
        assert 0.0 <= row.macro_f1 <= 1.0
