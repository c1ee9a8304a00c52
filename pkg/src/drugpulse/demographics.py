"""User-attribute inference: partisanship from followed politicians,
healthcare background from profile keywords, merged age buckets, gender
intake, and the organizational-account flag.

Age/gender/org predictions come from an external predictions file (or
a model server); they are consumed, never computed here.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable

from .errors import ContractError, LoadError
from .lexicon import KeywordMatcher, bundled_path, load_keyword_list
from .records import UserProfile

log = logging.getLogger(__name__)


class Partisanship(Enum):
    Left = "Left"
    Neutral = "Neutral"
    Right = "Right"


AGE_BUCKETS = ("<=18", "19-39", ">=40")
GENDERS = ("Male", "Female", "Unknown")

PARTIES = ("Democratic", "Republican")


def load_roster(path: str | Path) -> dict[str, str]:
    """Load an `account_id,party` CSV mapping politicians to parties."""
    p = Path(path)
    if not p.exists():
        raise LoadError(f"file not found: {p}")
    roster: dict[str, str] = {}
    with open(p, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or not {"account_id", "party"} <= set(reader.fieldnames):
            raise LoadError(f"{p}: expected columns account_id,party")
        for i, row in enumerate(reader, start=2):
            acct = (row["account_id"] or "").strip()
            party = (row["party"] or "").strip().title()
            if not acct:
                raise LoadError(f"{p}:{i}: empty account_id")
            if party not in PARTIES:
                raise LoadError(f"{p}:{i}: unknown party {row['party']!r}")
            if acct in roster and roster[acct] != party:
                raise LoadError(f"{p}:{i}: account {acct!r} listed under both parties")
            roster[acct] = party
    if not roster:
        raise LoadError(f"empty roster file: {p}")
    return roster


def infer_partisanship(followed: Iterable[str] | None, roster: dict[str, str]) -> Partisanship:
    """More Democratic follows -> Left; more Republican -> Right; tie -> Neutral."""
    follows = set(followed or ())
    d = sum(1 for a in follows if roster.get(a) == "Democratic")
    r = sum(1 for a in follows if roster.get(a) == "Republican")
    if d > r:
        return Partisanship.Left
    if r > d:
        return Partisanship.Right
    return Partisanship.Neutral


def load_healthcare_lexicon(path: str | Path | None = None) -> KeywordMatcher:
    return load_keyword_list(path if path is not None else bundled_path("healthcare_lexicon.csv"))


def has_healthcare_background(description: str | None, matcher: KeywordMatcher) -> bool:
    if not description:
        return False
    return matcher.matches(description)


def age_bucket(age_probs: tuple[float, float, float, float]) -> str:
    """Collapse (<=18, 19-29, 30-39, >=40) probabilities to three buckets.

    19-29 and 30-39 merge into 19-39. Ties go to the older bucket.
    """
    if len(age_probs) != 4:
        raise ContractError(f"expected 4 age probabilities, got {len(age_probs)}")
    if any(p < 0 for p in age_probs):
        raise ContractError(f"negative probability in {age_probs}")
    if abs(sum(age_probs) - 1.0) > 1e-6:
        raise ContractError(f"age probabilities sum to {sum(age_probs)}, not 1")
    merged = (age_probs[0], age_probs[1] + age_probs[2], age_probs[3])
    best = max(range(3), key=lambda i: (merged[i], i))
    return AGE_BUCKETS[best]


@dataclass(frozen=True)
class M3Row:
    age_probs: tuple[float, float, float, float]
    p_male: float
    p_female: float
    is_org: bool


_M3_COLUMNS = (
    "user_id", "p_le18", "p_19_29", "p_30_39", "p_ge40",
    "p_male", "p_female", "is_org",
)


def load_m3_predictions(path: str | Path) -> dict[str, M3Row]:
    p = Path(path)
    if not p.exists():
        raise LoadError(f"file not found: {p}")
    out: dict[str, M3Row] = {}
    with open(p, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or not set(_M3_COLUMNS) <= set(reader.fieldnames):
            raise LoadError(f"{p}: expected columns {','.join(_M3_COLUMNS)}")
        for i, row in enumerate(reader, start=2):
            try:
                probs = tuple(
                    float(row[c]) for c in ("p_le18", "p_19_29", "p_30_39", "p_ge40")
                )
                p_male = float(row["p_male"])
                p_female = float(row["p_female"])
            except (TypeError, ValueError):
                raise LoadError(f"{p}:{i}: non-numeric probability") from None
            raw_org = (row["is_org"] or "").strip().lower()
            if raw_org in ("true", "1"):
                is_org = True
            elif raw_org in ("false", "0"):
                is_org = False
            else:
                raise LoadError(f"{p}:{i}: is_org must be true/false, got {row['is_org']!r}")
            uid = (row["user_id"] or "").strip()
            if not uid:
                raise LoadError(f"{p}:{i}: empty user_id")
            out[uid] = M3Row(
                age_probs=probs, p_male=p_male, p_female=p_female, is_org=is_org
            )
    return out


def gender_of(row: M3Row) -> str:
    if row.p_male > row.p_female:
        return "Male"
    if row.p_female > row.p_male:
        return "Female"
    return "Unknown"


@dataclass(frozen=True)
class DemographicProfile:
    partisanship: Partisanship
    healthcare: bool
    age_bucket: str  # one of AGE_BUCKETS, or "Unknown" without predictions
    gender: str
    is_org: bool


def build_profiles(
    users: Iterable[UserProfile],
    roster: dict[str, str],
    hc_matcher: KeywordMatcher,
    m3: dict[str, M3Row] | None = None,
) -> dict[str, DemographicProfile]:
    """Compose per-user attributes; later duplicates of a user_id win.

    Without an m3 predictions table, age and gender stay Unknown and
    is_org stays false; coverage gaps are reported once.
    """
    profiles: dict[str, DemographicProfile] = {}
    missing = 0
    total = 0
    for user in users:
        total += 1
        row = m3.get(user.user_id) if m3 else None
        if row is None:
            missing += 1
            age, gender, is_org = "Unknown", "Unknown", False
        else:
            age = age_bucket(row.age_probs)
            gender = gender_of(row)
            is_org = row.is_org
        profiles[user.user_id] = DemographicProfile(
            partisanship=infer_partisanship(user.followed_accounts, roster),
            healthcare=has_healthcare_background(user.description, hc_matcher),
            age_bucket=age,
            gender=gender,
            is_org=is_org,
        )
    if missing:
        log.warning(
            "age/gender/org predictions missing for %d of %d users", missing, total
        )
    return profiles
