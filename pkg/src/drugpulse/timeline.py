"""Tuesday-anchored weekly binning, pandemic waves, and the trend series.

Weeks run Tuesday through Monday. Waves partition the study window at
fixed boundary dates; the window edges are part of the data contract,
not configuration.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from enum import IntEnum
from pathlib import Path

from .errors import ContractError, LoadError
from .lexicon import DrugId
from .records import TweetRecord

log = logging.getLogger(__name__)

STUDY_START = date(2020, 1, 29)
WAVE2_START = date(2020, 9, 16)
WAVE3_START = date(2021, 7, 7)
STUDY_END = date(2021, 11, 30)

# Weeks of tweets the source analysis reports for the study window.
CLAIMED_WEEKS = 93

_TUESDAY = 1  # date.weekday() numbering, Monday = 0


class Wave(IntEnum):
    W1 = 1
    W2 = 2
    W3 = 3


def week_of(ts: datetime | date) -> date:
    """Tuesday that starts the week containing ts (UTC for datetimes)."""
    if isinstance(ts, datetime):
        if ts.tzinfo is not None:
            ts = ts.astimezone(timezone.utc)
        d = ts.date()
    else:
        d = ts
    return d - timedelta(days=(d.weekday() - _TUESDAY) % 7)


def wave_of(d: date) -> Wave:
    if d < STUDY_START or d > STUDY_END:
        raise ContractError(f"date {d} outside study window [{STUDY_START}, {STUDY_END}]")
    if d < WAVE2_START:
        return Wave.W1
    if d < WAVE3_START:
        return Wave.W2
    return Wave.W3


def week_range(start: date, end: date) -> list[date]:
    """Contiguous week starts covering [start, end], inclusive."""
    if start > end:
        raise ContractError(f"week range start {start} after end {end}")
    first, last = week_of(start), week_of(end)
    n = (last - first).days // 7 + 1
    return [first + timedelta(weeks=i) for i in range(n)]


@dataclass(frozen=True)
class WeekSpanReport:
    n_weeks: int
    claimed: int
    matches: bool


def week_span_report() -> WeekSpanReport:
    """Compare the study window's week count to the claimed figure.

    The window 2020-01-29 .. 2021-11-30 spans more Tuesday starts than
    the reported 93; the discrepancy is surfaced, not papered over.
    """
    n = len(week_range(STUDY_START, STUDY_END))
    if n != CLAIMED_WEEKS:
        log.warning(
            "study window spans %d Tuesday weeks, source analysis claims %d",
            n, CLAIMED_WEEKS,
        )
    return WeekSpanReport(n_weeks=n, claimed=CLAIMED_WEEKS, matches=n == CLAIMED_WEEKS)


def _parse_column_date(raw: str) -> date | None:
    raw = raw.strip()
    for parse in (_iso, _mdy):
        d = parse(raw)
        if d is not None:
            return d
    return None


def _iso(raw: str) -> date | None:
    try:
        return date.fromisoformat(raw)
    except ValueError:
        return None


def _mdy(raw: str) -> date | None:
    parts = raw.split("/")
    if len(parts) != 3:
        return None
    try:
        m, d, y = (int(p) for p in parts)
    except ValueError:
        return None
    if y < 100:
        y += 2000
    try:
        return date(y, m, d)
    except ValueError:
        return None


def load_case_table(path: str | Path, region: str = "US") -> dict[date, int]:
    """Load cumulative confirmed counts from a wide time-series CSV.

    Rows are regions, columns are dates; rows whose country column
    equals `region` are summed. Returns date -> cumulative count.
    """
    p = Path(path)
    if not p.exists():
        raise LoadError(f"file not found: {p}")
    with open(p, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise LoadError(f"empty case file: {p}") from None
        date_cols: list[tuple[int, date]] = []
        country_col = None
        for i, name in enumerate(header):
            d = _parse_column_date(name)
            if d is not None:
                date_cols.append((i, d))
            elif name.strip().lower() in ("country/region", "country_region", "country"):
                country_col = i
        if not date_cols:
            raise LoadError(f"{p}: no date columns in header")
        dates = [d for _, d in date_cols]
        if any(b <= a for a, b in zip(dates, dates[1:])):
            raise LoadError(f"{p}: date columns not strictly increasing")
        totals = [0] * len(date_cols)
        matched = 0
        for row in reader:
            if not row or not any(cell.strip() for cell in row):
                continue
            if country_col is not None and row[country_col].strip() != region:
                continue
            matched += 1
            for j, (i, _) in enumerate(date_cols):
                cell = row[i].strip() if i < len(row) else ""
                totals[j] += int(float(cell)) if cell else 0
    if matched == 0:
        raise LoadError(f"{p}: no rows for region {region!r}")
    return {d: t for (_, d), t in zip(date_cols, totals)}


def daily_new_cases(cumulative: dict[date, int]) -> dict[date, int]:
    """First differences of a cumulative series, clamped at 0.

    The first day's cumulative value is treated as that day's new
    cases. Gaps in the date range are an error; downward corrections
    contribute 0 and are reported.
    """
    if not cumulative:
        return {}
    days = sorted(cumulative)
    missing = []
    d = days[0]
    while d <= days[-1]:
        if d not in cumulative:
            missing.append(d)
        d += timedelta(days=1)
    if missing:
        shown = ", ".join(str(x) for x in missing[:5])
        more = f" (+{len(missing) - 5} more)" if len(missing) > 5 else ""
        raise ContractError(f"case table has gaps: {shown}{more}")
    out: dict[date, int] = {}
    prev = 0
    clamped = []
    for d in days:
        diff = cumulative[d] - prev
        if diff < 0:
            clamped.append(d)
            diff = 0
        out[d] = diff
        prev = cumulative[d]
    if clamped:
        log.warning(
            "clamped %d negative daily case difference(s) to 0 (first: %s)",
            len(clamped), clamped[0],
        )
    return out


def weekly_new_cases(cumulative: dict[date, int]) -> dict[date, int]:
    """Sum daily new cases into Tuesday-anchored weeks."""
    weekly: dict[date, int] = {}
    for d, n in daily_new_cases(cumulative).items():
        w = week_of(d)
        weekly[w] = weekly.get(w, 0) + n
    return weekly


@dataclass(frozen=True)
class TrendSeries:
    weeks: tuple[date, ...]
    counts: dict[DrugId, tuple[int, ...]]
    new_cases: tuple[int, ...]

    def __post_init__(self) -> None:
        for a, b in zip(self.weeks, self.weeks[1:]):
            if (b - a).days != 7:
                raise ContractError(f"weeks not contiguous: {a} then {b}")
        for drug, row in self.counts.items():
            if len(row) != len(self.weeks):
                raise ContractError(f"count row length mismatch for {drug.value}")
            if any(c < 0 for c in row):
                raise ContractError(f"negative count for {drug.value}")
        if len(self.new_cases) != len(self.weeks):
            raise ContractError("new_cases length mismatch")


def build_trend(
    partitions: dict[DrugId, list[TweetRecord]],
    cumulative: dict[date, int],
) -> TrendSeries:
    """Per-week per-drug tweet counts joined with weekly new cases.

    Covers the union of the tweet and case-table week ranges so every
    partition record lands in some week (conservation).
    """
    weekly_cases = weekly_new_cases(cumulative)
    week_dates = set(weekly_cases)
    per_drug: dict[DrugId, dict[date, int]] = {drug: {} for drug in DrugId}
    for drug, records in partitions.items():
        bucket = per_drug[drug]
        for r in records:
            w = week_of(r.created_date)
            bucket[w] = bucket.get(w, 0) + 1
            week_dates.add(w)
    if not week_dates:
        return TrendSeries(weeks=(), counts={d: () for d in DrugId}, new_cases=())
    weeks = tuple(week_range(min(week_dates), max(week_dates)))
    counts = {
        drug: tuple(per_drug[drug].get(w, 0) for w in weeks) for drug in DrugId
    }
    cases = tuple(weekly_cases.get(w, 0) for w in weeks)
    return TrendSeries(weeks=weeks, counts=counts, new_cases=cases)


def trend_rows(series: TrendSeries) -> list[tuple[str, str, int, int]]:
    """Flatten a series to (week_start, drug, tweet_count, new_cases) rows."""
    rows = []
    for i, w in enumerate(series.weeks):
        for drug in DrugId:
            rows.append((w.isoformat(), drug.value, series.counts[drug][i], series.new_cases[i]))
    return rows
