"""Canonical tweet data model plus streaming ingestion and filtering.

Input is JSON-per-line with the field mapping documented in the README
(`id`, `created_at`, `text`, `lang`, `is_repost`, `user.*`, `place.*`).
Unknown fields are ignored. Timestamps are normalized to UTC at parse
time so week binning stays timezone-stable.
"""

from __future__ import annotations

import gzip
import io
import json
import logging
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from pathlib import Path
from typing import IO, Iterable

from .errors import ContractError

log = logging.getLogger(__name__)

REJECTION_REASONS = ("non_english", "repost", "duplicate", "malformed", "out_of_window")


@dataclass(frozen=True)
class GeoPlace:
    full_name: str
    country_code: str | None = None


@dataclass(frozen=True)
class UserProfile:
    user_id: str
    self_location: str | None = None
    description: str | None = None
    followed_accounts: tuple[str, ...] | None = None


@dataclass(frozen=True)
class TweetRecord:
    id: str
    created_at: datetime  # always tz-aware UTC
    text: str
    lang: str
    is_repost: bool
    author: UserProfile
    place: GeoPlace | None = None

    @property
    def created_date(self) -> date:
        return self.created_at.date()


@dataclass
class FilteredCorpus:
    records: list[TweetRecord]
    rejection_counts: dict[str, int] = field(
        default_factory=lambda: {r: 0 for r in REJECTION_REASONS}
    )

    def total_seen(self) -> int:
        return len(self.records) + sum(self.rejection_counts.values())


class MalformedLine(ValueError):
    pass


def _parse_timestamp(raw: object) -> datetime:
    if not isinstance(raw, str) or not raw:
        raise MalformedLine(f"created_at not a timestamp string: {raw!r}")
    s = raw.strip()
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(s)
    except ValueError as e:
        raise MalformedLine(f"unparseable created_at {raw!r}") from e
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def record_from_dict(obj: dict) -> TweetRecord:
    """Build a TweetRecord from one decoded JSONL object.

    Raises MalformedLine when a required field is missing or has the
    wrong shape; extra keys are ignored.
    """
    if not isinstance(obj, dict):
        raise MalformedLine("line is not a JSON object")
    tid = obj.get("id")
    if not isinstance(tid, str) or not tid:
        raise MalformedLine("missing or empty id")
    text = obj.get("text")
    if not isinstance(text, str):
        raise MalformedLine("missing text")
    lang = obj.get("lang")
    if not isinstance(lang, str) or not lang:
        raise MalformedLine("missing lang")
    is_repost = obj.get("is_repost", False)
    if not isinstance(is_repost, bool):
        raise MalformedLine("is_repost not boolean")
    user = obj.get("user")
    if not isinstance(user, dict):
        raise MalformedLine("missing user object")
    user_id = user.get("id")
    if not isinstance(user_id, str) or not user_id:
        raise MalformedLine("missing or empty user.id")
    following = user.get("following")
    followed: tuple[str, ...] | None = None
    if following is not None:
        if not isinstance(following, list) or not all(isinstance(x, str) for x in following):
            raise MalformedLine("user.following not a list of account ids")
        followed = tuple(following)
    author = UserProfile(
        user_id=user_id,
        self_location=user.get("location") if isinstance(user.get("location"), str) else None,
        description=user.get("description") if isinstance(user.get("description"), str) else None,
        followed_accounts=followed,
    )
    place = None
    raw_place = obj.get("place")
    if isinstance(raw_place, dict) and raw_place:
        full_name = raw_place.get("full_name")
        if not isinstance(full_name, str) or not full_name:
            raise MalformedLine("place present but place.full_name empty")
        cc = raw_place.get("country_code")
        place = GeoPlace(full_name=full_name, country_code=cc if isinstance(cc, str) else None)
    return TweetRecord(
        id=tid,
        created_at=_parse_timestamp(obj.get("created_at")),
        text=text,
        lang=lang,
        is_repost=is_repost,
        author=author,
        place=place,
    )


def record_to_dict(rec: TweetRecord) -> dict:
    out: dict = {
        "id": rec.id,
        "created_at": rec.created_at.strftime("%Y-%m-%dT%H:%M:%SZ"),
        "text": rec.text,
        "lang": rec.lang,
        "is_repost": rec.is_repost,
        "user": {"id": rec.author.user_id},
    }
    if rec.author.self_location is not None:
        out["user"]["location"] = rec.author.self_location
    if rec.author.description is not None:
        out["user"]["description"] = rec.author.description
    if rec.author.followed_accounts is not None:
        out["user"]["following"] = list(rec.author.followed_accounts)
    if rec.place is not None:
        out["place"] = {"full_name": rec.place.full_name}
        if rec.place.country_code is not None:
            out["place"]["country_code"] = rec.place.country_code
    return out


def parse_records(stream: IO[bytes] | Iterable[bytes]) -> tuple[list[TweetRecord], int]:
    """Parse a UTF-8 line-delimited byte stream into records.

    Malformed lines are counted and logged with their line number; they
    never abort the run. Blank lines are ignored entirely.
    """
    records: list[TweetRecord] = []
    malformed = 0
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line.decode("utf-8"))
            records.append(record_from_dict(obj))
        except (UnicodeDecodeError, json.JSONDecodeError, MalformedLine) as e:
            malformed += 1
            log.warning("skipping malformed line %d: %s", lineno, e)
    return records, malformed


def open_jsonl(path: str | Path) -> IO[bytes]:
    """Open a .jsonl or .jsonl.gz file as a binary stream."""
    p = Path(path)
    if p.suffix == ".gz":
        return gzip.open(p, "rb")  # type: ignore[return-value]
    return io.BufferedReader(open(p, "rb"))  # noqa: SIM115


def filter_corpus(
    records: Iterable[TweetRecord],
    window: tuple[date, date],
    malformed_count: int = 0,
) -> FilteredCorpus:
    """Keep original English records inside the study window, first
    occurrence per id, preserving input order.

    `malformed_count` folds the parse-stage tally into the corpus so the
    conservation invariant (records out + rejections = lines in) holds
    for a composed parse+filter run.
    """
    start, end = window
    if start > end:
        raise ContractError(f"window start {start} after end {end}")
    counts = {r: 0 for r in REJECTION_REASONS}
    counts["malformed"] = malformed_count
    seen: set[str] = set()
    kept: list[TweetRecord] = []
    for rec in records:
        if rec.lang != "en":
            counts["non_english"] += 1
        elif rec.is_repost:
            counts["repost"] += 1
        elif not (start <= rec.created_date <= end):
            counts["out_of_window"] += 1
        elif rec.id in seen:
            counts["duplicate"] += 1
        else:
            seen.add(rec.id)
            kept.append(rec)
    return FilteredCorpus(records=kept, rejection_counts=counts)


def merge_corpora(shards: list[FilteredCorpus]) -> FilteredCorpus:
    """Merge shard-filtered corpora; dedup across shards happens here.

    The merge is order-independent up to the record ordering implied by
    the shard order, and rejection counts are summed.
    """
    counts = {r: 0 for r in REJECTION_REASONS}
    seen: set[str] = set()
    kept: list[TweetRecord] = []
    for shard in shards:
        for reason, n in shard.rejection_counts.items():
            counts[reason] = counts.get(reason, 0) + n
        for rec in shard.records:
            if rec.id in seen:
                counts["duplicate"] += 1
            else:
                seen.add(rec.id)
                kept.append(rec)
    return FilteredCorpus(records=kept, rejection_counts=counts)
