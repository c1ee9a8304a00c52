from __future__ import annotations

from datetime import datetime, timezone

import pytest

from drugpulse.demographics import load_healthcare_lexicon
from drugpulse.geo import load_gazetteer
from drugpulse.lexicon import load_lexicon
from drugpulse.records import GeoPlace, TweetRecord, UserProfile
from drugpulse.stance import load_cue_table


@pytest.fixture(scope="session")
def lexicon():
    return load_lexicon()


@pytest.fixture(scope="session")
def cues():
    return load_cue_table()


@pytest.fixture(scope="session")
def gazetteer():
    return load_gazetteer()


@pytest.fixture(scope="session")
def hc_matcher():
    return load_healthcare_lexicon()


def make_record(
    rec_id: str = "t1",
    text: str = "hello",
    created: str = "2020-06-02T12:00:00+00:00",
    lang: str = "en",
    is_repost: bool = False,
    user_id: str = "u1",
    self_location: str | None = None,
    description: str | None = None,
    followed: tuple[str, ...] | None = None,
    place: GeoPlace | None = None,
) -> TweetRecord:
    return TweetRecord(
        id=rec_id,
        created_at=datetime.fromisoformat(created).astimezone(timezone.utc),
        text=text,
        lang=lang,
        is_repost=is_repost,
        author=UserProfile(
            user_id=user_id,
            self_location=self_location,
            description=description,
            followed_accounts=followed,
        ),
        place=place,
    )
