"""Contingency construction, chi-square against closed forms and the
independent oracle, and the state stance summary."""

from __future__ import annotations

import math

import pytest
from hypothesis import given, strategies as st

from drugpulse.errors import ContractError
from drugpulse.stance import StanceLabel
from drugpulse.stats import (
    DEFAULT_DEAD_ZONE,
    ContingencyTable,
    chi_square_p,
    contingency,
    format_p,
    pearson_chi_square,
    reg_gamma_q,
    state_stance_summary,
)
from drugpulse.timeline import Wave
from oracles import chi_square_oracle, chi_square_p_oracle

NEG, NEU, POS = StanceLabel.Negative, StanceLabel.Neutral, StanceLabel.Positive


class TestRegGammaQ:
    def test_at_zero(self):
        assert reg_gamma_q(2.5, 0.0) == 1.0

    def test_domain_checks(self):
        with pytest.raises(ContractError):
            reg_gamma_q(0.0, 1.0)
        with pytest.raises(ContractError):
            reg_gamma_q(1.0, -1.0)

    def test_exponential_special_case(self):
        # Q(1, x) = exp(-x), both below and above the series crossover
        for x in (0.5, 1.5, 4.0, 30.0):
            assert reg_gamma_q(1.0, x) == pytest.approx(math.exp(-x), rel=1e-12)


class TestChiSquareP:
    def test_df2_closed_form(self):
        for s in (0.1, 1.0, 5.0, 20.0):
            assert chi_square_p(s, 2) == pytest.approx(math.exp(-s / 2), rel=1e-12)

    def test_df1_reference_value(self):
        assert chi_square_p(4.0, 1) == pytest.approx(0.045500263896358, rel=1e-10)

    def test_df4_closed_form(self):
        # Q(2, x) = (1 + x) exp(-x) with x = s/2
        for s in (1.0, 6.0, 15.0):
            x = s / 2
            assert chi_square_p(s, 4) == pytest.approx((1 + x) * math.exp(-x), rel=1e-12)

    def test_domain_checks(self):
        with pytest.raises(ContractError):
            chi_square_p(1.0, 0)
        with pytest.raises(ContractError):
            chi_square_p(-0.1, 2)

    @given(st.floats(0.0, 200.0), st.integers(1, 12))
    def test_bounded_and_matches_oracle(self, s, df):
        p = chi_square_p(s, df)
        assert 0.0 <= p <= 1.0
        assert p == pytest.approx(chi_square_p_oracle(s, df), abs=1e-12)


class TestContingencyTable:
    def test_validation(self):
        with pytest.raises(ContractError, match="row count"):
            ContingencyTable(("a",), (NEG,), ((1,), (2,)))
        with pytest.raises(ContractError, match="column count"):
            ContingencyTable(("a",), (NEG, POS), ((1,),))
        with pytest.raises(ContractError, match="negative"):
            ContingencyTable(("a",), (NEG,), ((-1,),))
        with pytest.raises(ContractError, match="empty"):
            ContingencyTable(("a",), (NEG,), ((0,),))


class TestContingency:
    def test_cross_tabulates(self):
        stances = [POS, POS, NEG, NEU, NEG, POS]
        groups = ["L", "L", "L", "R", "R", "R"]
        t = contingency(stances, groups)
        assert t.row_labels == ("L", "R")
        assert t.col_labels == (NEG, NEU, POS)
        assert t.counts == ((1, 0, 2), (1, 1, 1))

    def test_row_universe_order_kept(self):
        stances = [POS, NEG]
        groups = ["R", "L"]
        t = contingency(stances, groups, row_labels=["L", "N", "R"])
        assert t.row_labels == ("L", "R")  # empty N dropped, order preserved

    def test_zero_column_dropped(self):
        stances = [POS, NEG, POS, NEG]
        groups = ["a", "a", "b", "b"]
        t = contingency(stances, groups)
        assert t.col_labels == (NEG, POS)

    def test_degenerate_rejected(self):
        with pytest.raises(ContractError, match="need at least 2x2"):
            contingency([POS, POS], ["a", "b"])

    def test_unknown_group_rejected(self):
        with pytest.raises(ContractError, match="not in supplied row labels"):
            contingency([POS], ["x"], row_labels=["a", "b"])

    def test_length_mismatch(self):
        with pytest.raises(ContractError, match="length mismatch"):
            contingency([POS], ["a", "b"])

    def test_empty_rejected(self):
        with pytest.raises(ContractError, match="empty input"):
            contingency([], [])


class TestPearsonChiSquare:
    def test_hand_computed_2x2(self):
        t = ContingencyTable(("a", "b"), (NEG, POS), ((10, 20), (20, 10)))
        res = pearson_chi_square(t)
        # all expected cells are 15; statistic = 4 * 25/15
        assert res.statistic == pytest.approx(100 / 15, rel=1e-12)
        assert res.df == 1
        assert res.min_expected == 15.0
        assert res.low_expected_warning is False
        assert res.p_value == pytest.approx(chi_square_p_oracle(100 / 15, 1), abs=1e-12)

    def test_independent_table_statistic_zero(self):
        t = ContingencyTable(("a", "b"), (NEG, POS), ((10, 20), (20, 40)))
        res = pearson_chi_square(t)
        assert res.statistic == pytest.approx(0.0, abs=1e-12)
        assert res.p_value == pytest.approx(1.0, abs=1e-12)

    def test_low_expected_flag(self):
        t = ContingencyTable(("a", "b"), (NEG, POS), ((1, 8), (8, 1)))
        res = pearson_chi_square(t)
        assert res.low_expected_warning is True
        assert res.min_expected == pytest.approx(4.5)

    def test_zero_marginal_rejected(self):
        t = ContingencyTable(("a", "b"), (NEG, POS), ((0, 0), (1, 1)))
        with pytest.raises(ContractError, match="zero marginal"):
            pearson_chi_square(t)

    @given(st.integers(2, 4), st.integers(2, 4), st.data())
    def test_matches_oracle_on_random_tables(self, r, c, data):
        counts = [
            [data.draw(st.integers(0, 40)) for _ in range(c)] for _ in range(r)
        ]
        # guarantee nonzero marginals so the test statistic is defined
        for i in range(r):
            counts[i][i % c] += 1
        for j in range(c):
            counts[j % r][j] += 1
        labels = tuple(f"g{i}" for i in range(r))
        cols = tuple((NEG, NEU, POS)[j % 3] for j in range(c))
        t = ContingencyTable(labels, cols, tuple(tuple(row) for row in counts))
        res = pearson_chi_square(t)
        stat, df, p = chi_square_oracle(counts)
        assert res.statistic == pytest.approx(stat, abs=1e-9)
        assert res.df == df
        assert res.p_value == pytest.approx(p, abs=1e-10)


def test_format_p():
    assert format_p(0.5) == "0.5"
    assert format_p(1e-20) == "<1e-15"


class TestStateStanceSummary:
    def test_means_and_classes(self):
        items = [
            ("TX", Wave.W1, POS),
            ("TX", Wave.W1, POS),
            ("TX", Wave.W1, NEG),
            ("MA", Wave.W2, NEG),
        ]
        out = state_stance_summary(items)
        assert [(s.state, s.wave) for s in out] == [("MA", Wave.W2), ("TX", Wave.W1)]
        tx = out[1]
        assert tx.n == 3
        assert tx.mean == pytest.approx(1 / 3)
        assert tx.stance_class is POS
        assert out[0].stance_class is NEG

    def test_dead_zone_edges(self):
        # mean exactly at the edge stays Neutral; just beyond flips
        items = [("CA", Wave.W1, POS)] + [("CA", Wave.W1, NEU)] * 19
        out = state_stance_summary(items, dead_zone=0.05)
        assert out[0].mean == pytest.approx(0.05)
        assert out[0].stance_class is NEU
        out = state_stance_summary(items, dead_zone=0.049)
        assert out[0].stance_class is POS

    def test_default_dead_zone(self):
        assert DEFAULT_DEAD_ZONE == 0.05

    def test_negative_dead_zone_rejected(self):
        with pytest.raises(ContractError):
            state_stance_summary([("TX", Wave.W1, POS)], dead_zone=-0.1)

    def test_empty_input(self):
        assert state_stance_summary([]) == []
