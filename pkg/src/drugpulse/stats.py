"""Contingency tables, Pearson chi-square with exact upper-tail
p-values, and per-state per-wave average-stance summaries.

The regularized incomplete gamma function is computed here directly
(series below the a+1 crossover, Lentz continued fraction above) so the
p-value path has no dependency beyond math.lgamma.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable

from .errors import ContractError
from .stance import CLASS_ORDER, StanceLabel
from .timeline import Wave

log = logging.getLogger(__name__)

# Expected-count threshold below which the classic test is shaky.
LOW_EXPECTED = 5.0

_MAX_ITER = 800
_EPS = 1e-16
_TINY = 1e-300


def _gamma_p_series(a: float, x: float) -> float:
    ap = a
    term = 1.0 / a
    total = term
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_q_continued_fraction(a: float, x: float) -> float:
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b if b != 0 else 1.0 / _TINY
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def reg_gamma_q(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) = Γ(a, x)/Γ(a)."""
    if a <= 0:
        raise ContractError(f"gamma shape must be positive, got {a}")
    if x < 0:
        raise ContractError(f"gamma argument must be non-negative, got {x}")
    if x == 0.0:
        return 1.0
    if x < a + 1.0:
        q = 1.0 - _gamma_p_series(a, x)
    else:
        q = _gamma_q_continued_fraction(a, x)
    return min(1.0, max(0.0, q))


def chi_square_p(statistic: float, df: int) -> float:
    """Upper-tail probability of the chi-square distribution."""
    if df < 1:
        raise ContractError(f"df must be >= 1, got {df}")
    if statistic < 0:
        raise ContractError(f"statistic must be >= 0, got {statistic}")
    return reg_gamma_q(df / 2.0, statistic / 2.0)


@dataclass(frozen=True)
class ContingencyTable:
    row_labels: tuple[str, ...]
    col_labels: tuple[StanceLabel, ...]
    counts: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        if len(self.counts) != len(self.row_labels):
            raise ContractError("row count mismatch")
        for row in self.counts:
            if len(row) != len(self.col_labels):
                raise ContractError("column count mismatch")
            if any(c < 0 for c in row):
                raise ContractError("negative cell count")
        if sum(sum(row) for row in self.counts) <= 0:
            raise ContractError("empty contingency table")


def contingency(
    stances: list[StanceLabel],
    groups: list[str],
    row_labels: Iterable[str] | None = None,
) -> ContingencyTable:
    """Cross-tabulate stance against group label.

    `row_labels` may supply the intended group universe; groups with no
    members and stance columns with zero marginal are dropped with a
    notice. A table below 2x2 after dropping is an error.
    """
    if len(stances) != len(groups):
        raise ContractError(f"length mismatch: {len(stances)} stances, {len(groups)} groups")
    if not stances:
        raise ContractError("empty input")
    rows = list(dict.fromkeys(row_labels)) if row_labels is not None else sorted(set(groups))
    cells: dict[tuple[str, StanceLabel], int] = {}
    for s, g in zip(stances, groups):
        if g not in rows:
            raise ContractError(f"group {g!r} not in supplied row labels")
        cells[(g, s)] = cells.get((g, s), 0) + 1
    kept_rows = [g for g in rows if any(cells.get((g, s), 0) for s in CLASS_ORDER)]
    dropped_rows = [g for g in rows if g not in kept_rows]
    kept_cols = [s for s in CLASS_ORDER if any(cells.get((g, s), 0) for g in kept_rows)]
    dropped_cols = [s.value for s in CLASS_ORDER if s not in kept_cols]
    if dropped_rows:
        log.info("dropped zero-marginal group row(s): %s", ", ".join(dropped_rows))
    if dropped_cols:
        log.info("dropped zero-marginal stance column(s): %s", ", ".join(dropped_cols))
    if len(kept_rows) < 2 or len(kept_cols) < 2:
        raise ContractError(
            f"table degenerated to {len(kept_rows)}x{len(kept_cols)}; need at least 2x2"
        )
    counts = tuple(
        tuple(cells.get((g, s), 0) for s in kept_cols) for g in kept_rows
    )
    return ContingencyTable(
        row_labels=tuple(kept_rows), col_labels=tuple(kept_cols), counts=counts
    )


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    df: int
    p_value: float
    expected: tuple[tuple[float, ...], ...]
    min_expected: float
    low_expected_warning: bool


def pearson_chi_square(table: ContingencyTable) -> ChiSquareResult:
    """Pearson statistic without continuity correction, exact p-value."""
    counts = table.counts
    r, c = len(counts), len(counts[0])
    row_sums = [sum(row) for row in counts]
    col_sums = [sum(counts[i][j] for i in range(r)) for j in range(c)]
    total = sum(row_sums)
    if any(x == 0 for x in row_sums) or any(x == 0 for x in col_sums):
        raise ContractError("zero marginal in contingency table")
    expected = tuple(
        tuple(row_sums[i] * col_sums[j] / total for j in range(c)) for i in range(r)
    )
    statistic = 0.0
    for i in range(r):
        for j in range(c):
            diff = counts[i][j] - expected[i][j]
            statistic += diff * diff / expected[i][j]
    df = (r - 1) * (c - 1)
    min_expected = min(min(row) for row in expected)
    return ChiSquareResult(
        statistic=statistic,
        df=df,
        p_value=chi_square_p(statistic, df),
        expected=expected,
        min_expected=min_expected,
        low_expected_warning=min_expected < LOW_EXPECTED,
    )


def format_p(p: float) -> str:
    """Render a p-value; below 1e-15 the exact digits are meaningless."""
    return "<1e-15" if p < 1e-15 else repr(p)


@dataclass(frozen=True)
class StateWaveStance:
    state: str
    wave: Wave
    n: int
    mean: float
    stance_class: StanceLabel


# Mean-stance magnitudes at or below this count as Neutral.
DEFAULT_DEAD_ZONE = 0.05


def state_stance_summary(
    items: Iterable[tuple[str, Wave, StanceLabel]],
    dead_zone: float = DEFAULT_DEAD_ZONE,
) -> list[StateWaveStance]:
    """Average numeric stance per (state, wave) cell, classed by sign.

    class = Positive if mean > dead_zone, Negative if mean < -dead_zone,
    Neutral otherwise. Cells with no tweets never appear.
    """
    if dead_zone < 0:
        raise ContractError(f"dead zone must be >= 0, got {dead_zone}")
    sums: dict[tuple[str, Wave], list[int]] = {}
    for state, wave, label in items:
        cell = sums.setdefault((state, wave), [0, 0])
        cell[0] += label.numeric()
        cell[1] += 1
    out = []
    for (state, wave), (total, n) in sorted(sums.items()):
        mean = total / n
        if mean > dead_zone:
            cls = StanceLabel.Positive
        elif mean < -dead_zone:
            cls = StanceLabel.Negative
        else:
            cls = StanceLabel.Neutral
        out.append(StateWaveStance(state=state, wave=wave, n=n, mean=mean, stance_class=cls))
    return out
