"""US-state resolution from GPS place and self-reported profile location.

GPS place evidence always wins over the free-text profile location. A
place tagged with a non-US country code excludes the record outright,
even when the profile names a US state.
"""

from __future__ import annotations

import csv
import re
import unicodedata
from dataclasses import dataclass
from pathlib import Path

from .errors import LoadError
from .records import TweetRecord

STATE_CODES = (
    "AL", "AK", "AZ", "AR", "CA", "CO", "CT", "DE", "FL", "GA",
    "HI", "ID", "IL", "IN", "IA", "KS", "KY", "LA", "ME", "MD",
    "MA", "MI", "MN", "MS", "MO", "MT", "NE", "NV", "NH", "NJ",
    "NM", "NY", "NC", "ND", "OH", "OK", "OR", "PA", "RI", "SC",
    "SD", "TN", "TX", "UT", "VT", "VA", "WA", "WV", "WI", "WY",
    "PR",
)

_JUNK_EDGE = re.compile(r"^[^0-9a-z]+|[^0-9a-z]+$")


def _norm(s: str) -> str:
    s = unicodedata.normalize("NFC", s).lower().replace(".", "")
    s = re.sub(r"\s+", " ", s).strip()
    return _JUNK_EDGE.sub("", s)


@dataclass
class Gazetteer:
    state_aliases: dict[str, str]               # alias -> state code
    city_bare: dict[str, str]                   # unambiguous city -> state code
    city_hinted: dict[tuple[str, str], str]     # (city, state code) -> state code

    def resolve_location(self, raw: str | None) -> str | None:
        """Resolve a free-text location string to a state code, or None."""
        if not raw:
            return None
        segments = [seg for seg in (_norm(x) for x in raw.split(",")) if seg]
        if not segments:
            return None
        for seg in reversed(segments):
            if seg in self.state_aliases:
                return self.state_aliases[seg]
        for i, seg in enumerate(segments):
            if i + 1 < len(segments):
                hint = self.state_aliases.get(segments[i + 1])
                if hint is not None and (seg, hint) in self.city_hinted:
                    return self.city_hinted[(seg, hint)]
            if seg in self.city_bare:
                return self.city_bare[seg]
        whole = _norm(raw.replace(",", " "))
        if whole in self.state_aliases:
            return self.state_aliases[whole]
        if whole in self.city_bare:
            return self.city_bare[whole]
        return None


def load_gazetteer(path: str | Path | None = None) -> Gazetteer:
    """Load and validate an `alias,state_code,kind` CSV.

    For `kind=city`, the alias may carry a disambiguating state hint as
    a second comma-separated part ("portland, me"). An alias stored for
    two states without hints is a named-collision load error.
    """
    from .lexicon import bundled_path

    p = Path(path) if path is not None else bundled_path("gazetteer.csv")
    if not p.exists():
        raise LoadError(f"file not found: {p}")
    with open(p, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or not {"alias", "state_code", "kind"} <= set(reader.fieldnames):
            raise LoadError(f"{p}: expected columns alias,state_code,kind")
        rows = [r for r in reader if any((v or "").strip() for v in r.values())]
    if not rows:
        raise LoadError(f"empty gazetteer file: {p}")

    state_aliases: dict[str, str] = {}
    city_rows: list[tuple[int, str, str]] = []
    for i, row in enumerate(rows, start=2):
        code = row["state_code"].strip().upper()
        if code not in STATE_CODES:
            raise LoadError(f"{p}:{i}: unknown state code {row['state_code']!r}")
        kind = row["kind"].strip().lower()
        if kind == "state":
            alias = _norm(row["alias"])
            if not alias:
                raise LoadError(f"{p}:{i}: empty alias")
            if alias in state_aliases and state_aliases[alias] != code:
                raise LoadError(
                    f"{p}:{i}: alias {alias!r} maps to both "
                    f"{state_aliases[alias]} and {code}"
                )
            state_aliases[alias] = code
        elif kind == "city":
            city_rows.append((i, row["alias"], code))
        else:
            raise LoadError(f"{p}:{i}: unknown kind {row['kind']!r}")

    unreachable = sorted(set(STATE_CODES) - set(state_aliases.values()))
    if unreachable:
        raise LoadError(f"{p}: states without any alias: {unreachable}")

    city_bare: dict[str, str] = {}
    city_hinted: dict[tuple[str, str], str] = {}
    for i, raw_alias, code in city_rows:
        parts = [x for x in (_norm(x) for x in raw_alias.split(",")) if x]
        if not parts:
            raise LoadError(f"{p}:{i}: empty alias")
        if len(parts) == 1:
            city = parts[0]
            if city in city_bare and city_bare[city] != code:
                raise LoadError(
                    f"{p}:{i}: city {city!r} maps to both "
                    f"{city_bare[city]} and {code} without state hints"
                )
            city_bare[city] = code
        elif len(parts) == 2:
            city, hint = parts
            hint_code = state_aliases.get(hint)
            if hint_code is None:
                raise LoadError(f"{p}:{i}: hint {hint!r} is not a known state alias")
            if hint_code != code:
                raise LoadError(f"{p}:{i}: hint {hint!r} disagrees with state {code}")
            city_hinted[(city, hint_code)] = code
        else:
            raise LoadError(f"{p}:{i}: alias {raw_alias!r} has too many parts")
    return Gazetteer(state_aliases=state_aliases, city_bare=city_bare, city_hinted=city_hinted)


def resolve(record: TweetRecord, gaz: Gazetteer) -> tuple[str, str] | None:
    """Resolve a record to (state_code, source) with source gps|profile.

    GPS place is primary evidence; the profile location is consulted
    only when the place is absent or unresolvable. A place with a
    non-US country code makes the record unresolvable.
    """
    if record.place is not None:
        cc = (record.place.country_code or "").strip().upper()
        if cc and cc != "US":
            return None
        state = gaz.resolve_location(record.place.full_name)
        if state is not None:
            return state, "gps"
    state = gaz.resolve_location(record.author.self_location)
    if state is not None:
        return state, "profile"
    return None
