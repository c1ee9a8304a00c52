"""Seeded synthetic-corpus generator with a machine-readable truth file.

Plants per-drug weekly counts, per-state stance means, a 70/30
partisanship-stance dependence, a stance-independent healthcare split,
multi-drug tweets, and every ingest rejection class. Every planted text
is checked at generation time against the real lexicon, cue table, and
gazetteer, so the truth file is guaranteed to describe what the
pipeline will actually see.
"""

from __future__ import annotations

import json
import random
from datetime import date, datetime, timedelta
from pathlib import Path

from .demographics import has_healthcare_background, load_healthcare_lexicon
from .errors import ContractError
from .geo import load_gazetteer, resolve
from .lexicon import DrugId, load_lexicon, match_drugs
from .manifest import atomic_write_text
from .records import GeoPlace, TweetRecord, UserProfile, _parse_timestamp, record_to_dict
from .stance import StanceLabel, load_cue_table, rule_classify_one
from .timeline import STUDY_END, STUDY_START, wave_of, week_of

# Four Tuesday weeks per wave, none straddling a wave boundary.
PLANTED_WEEKS = (
    date(2020, 2, 4), date(2020, 2, 11), date(2020, 3, 3), date(2020, 4, 7),
    date(2020, 9, 22), date(2020, 10, 20), date(2021, 1, 5), date(2021, 3, 2),
    date(2021, 7, 13), date(2021, 8, 10), date(2021, 9, 14), date(2021, 11, 2),
)

DRUG_SURFACES = {
    DrugId.HYDROXYCHLOROQUINE: (
        "hydroxychloroquine", "Hydroxychloroquine", "Plaquenil", "HCQ",
        "hydroxy chloroquine",
    ),
    DrugId.IVERMECTIN: ("ivermectin", "Ivermectin", "Stromectol", "IVERMECTIN"),
    DrugId.MOLNUPIRAVIR: ("molnupiravir", "Molnupiravir", "Lagevrio"),
    DrugId.REMDESIVIR: ("remdesivir", "Remdesivir", "Veklury"),
}

TEMPLATES = {
    StanceLabel.Positive: (
        "{d} works and my recovery was amazing",
        "grateful for {d}, it saved my life",
        "{d} is safe and effective for patients",
        "doctors recommend {d}, promising results",
    ),
    StanceLabel.Negative: (
        "{d} is dangerous quackery",
        "{d} overdose killed a patient, simply toxic",
        "avoid {d}, it is harmful and useless",
        "{d} is a scam pushed by fraud accounts",
    ),
    StanceLabel.Neutral: (
        "doctor mentioned {d} during the visit",
        "reading about {d} this afternoon",
        "{d} trial enrollment opens here",
        "thread about {d} dosing schedules",
    ),
}

MULTI_TEMPLATE = "{a} and {b} are both in the headlines"
NO_MENTION_TEXTS = (
    "long day at the office, stay hydrated",
    "weekend plans with the family",
    "nothing new to report tonight",
)
MALFORMED_LINES = ('{"id": "broken', "not json at all", '{"id": 42}')

# (state, gps full_name, profile location); both evidence forms must
# resolve to the state
STATE_EVIDENCE = (
    ("TX", "Austin, TX", "Texas, USA"),
    ("MA", "Boston, MA", "somerville"),
    ("NY", "Brooklyn, NY", "New York City"),
    ("FL", "Miami, FL", "Tampa, Florida"),
    ("WA", "Seattle, WA", "washington state"),
    ("OH", "Columbus, OH", "cleveland"),
    ("GA", "Atlanta, GA", "Savannah, Georgia"),
    ("CA", "Los Angeles, CA", "San Francisco, California"),
)

UNRESOLVED_LOCATIONS = ("the moon \U0001f319", "worldwide", "somewhere over the rainbow")

HC_DESCRIPTIONS = (
    "ICU nurse, mom of two",
    "physician at the county hospital",
    "pharmacist and weekend runner",
    "er doctor on night shifts",
)
PLAIN_DESCRIPTIONS = (
    "coffee lover and cat person",
    "sports fan",
    "nursery owner and gardener",
    "amateur photographer",
)
ORG_DESCRIPTIONS = (
    "regional news network, breaking updates",
    "city wellness newsletter",
)

FOLLOWS = {
    "Left": ("pol_d1", "pol_d2", "pol_r1"),
    "Right": ("pol_r1", "pol_r2", "pol_d1"),
    "Neutral": ("pol_d1", "pol_r1"),
}
ROSTER_ROWS = (
    ("pol_d1", "Democratic"), ("pol_d2", "Democratic"), ("pol_d3", "Democratic"),
    ("pol_r1", "Republican"), ("pol_r2", "Republican"), ("pol_r3", "Republican"),
)

# (pos, neu, neg) stance weights, rotated by (state index + wave)
STANCE_PROFILES = ((0.6, 0.25, 0.15), (0.2, 0.3, 0.5), (0.3, 0.4, 0.3))

_STANCES = (StanceLabel.Positive, StanceLabel.Neutral, StanceLabel.Negative)


def _party_for(stance: StanceLabel, c: int) -> str:
    """70:30 favored:other split among partisans, 20% Neutral overall."""
    i = c % 25
    if stance is StanceLabel.Positive:
        return "Right" if i < 14 else ("Left" if i < 20 else "Neutral")
    if stance is StanceLabel.Negative:
        return "Left" if i < 14 else ("Right" if i < 20 else "Neutral")
    return "Left" if i < 10 else ("Right" if i < 20 else "Neutral")


def _mdy(d: date) -> str:
    return f"{d.month}/{d.day}/{d.year % 100}"


class _Factory:
    """Deterministic record factory with generation-time validation."""

    def __init__(self, rng: random.Random):
        self.rng = rng
        self.lexicon = load_lexicon()
        self.cues = load_cue_table()
        self.gazetteer = load_gazetteer()
        self.hc_matcher = load_healthcare_lexicon()
        self.tweet_seq = 0
        self.user_seq = 0
        self.stance_counters = {s: 0 for s in _STANCES}
        self.template_counters = {s: 0 for s in _STANCES}

    def next_ids(self) -> tuple[str, str]:
        self.tweet_seq += 1
        self.user_seq += 1
        return f"t{self.tweet_seq:06d}", f"u{self.user_seq:05d}"

    def created_at(self, anchor: date) -> datetime:
        """A deterministic timestamp inside the week holding `anchor`."""
        week = anchor if anchor.weekday() == 1 else week_of(anchor)
        day = week + timedelta(days=self.tweet_seq % 7)
        raw = f"{day.isoformat()}T12:{self.tweet_seq % 60:02d}:{(self.tweet_seq * 7) % 60:02d}Z"
        return _parse_timestamp(raw)

    def stance_text(self, drug: DrugId, stance: StanceLabel) -> str:
        pool = TEMPLATES[stance]
        template = pool[self.template_counters[stance] % len(pool)]
        self.template_counters[stance] += 1
        surfaces = DRUG_SURFACES[drug]
        text = template.format(d=surfaces[self.tweet_seq % len(surfaces)])
        if match_drugs(text, self.lexicon) != {drug}:
            raise ContractError(f"planted text does not match {drug.value} alone: {text!r}")
        got = rule_classify_one(text, self.cues)
        if got is not stance:
            raise ContractError(
                f"planted text scores {got.value}, wanted {stance.value}: {text!r}"
            )
        return text

    def make_user(
        self, user_id: str, party: str, healthcare: bool, location: str | None
    ) -> UserProfile:
        if healthcare:
            desc = HC_DESCRIPTIONS[self.user_seq % len(HC_DESCRIPTIONS)]
        else:
            desc = PLAIN_DESCRIPTIONS[self.user_seq % len(PLAIN_DESCRIPTIONS)]
        if has_healthcare_background(desc, self.hc_matcher) != healthcare:
            raise ContractError(f"description breaks healthcare plant: {desc!r}")
        follows = FOLLOWS[party]
        if party == "Neutral" and self.user_seq % 2 == 0:
            follows = ()
        return UserProfile(
            user_id=user_id,
            self_location=location,
            description=desc,
            followed_accounts=follows,
        )


def generate(
    outdir: str | Path,
    seed: int = 7,
    n_clean: int = 416,
    n_org: int = 16,
    n_unresolved: int = 8,
    n_multi: int = 12,
    n_no_mention: int = 12,
    n_non_english: int = 10,
    n_repost: int = 10,
    n_duplicate: int = 8,
    n_out_of_window: int = 5,
    n_malformed: int = 3,
) -> dict:
    """Write corpus.jsonl, cases.csv, roster.csv, m3.csv, truth.json.

    Returns the truth dictionary that was written.
    """
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)
    fac = _Factory(rng)
    drugs = list(DrugId)

    lines: list[str] = []
    m3_rows: list[str] = []
    weekly_counts = {d: {w: 0 for w in PLANTED_WEEKS} for d in DrugId}
    party_stance = {p: {s: 0 for s in _STANCES} for p in ("Left", "Neutral", "Right")}
    hc_stance = {g: {s: 0 for s in _STANCES} for g in ("healthcare", "other")}
    state_cells: dict[tuple[str, int], list[int]] = {}

    def serialize(rec: TweetRecord) -> str:
        return json.dumps(record_to_dict(rec), sort_keys=True, ensure_ascii=False)

    def m3_line(user_id: str, is_org: bool) -> str:
        patterns = (
            (0.1, 0.3, 0.25, 0.35), (0.7, 0.1, 0.1, 0.1),
            (0.05, 0.15, 0.2, 0.6), (0.0, 0.25, 0.25, 0.5),
        )
        probs = patterns[fac.user_seq % len(patterns)]
        genders = ((0.8, 0.2), (0.3, 0.7), (0.5, 0.5))
        pm, pf = genders[fac.user_seq % len(genders)]
        return (
            f"{user_id},{probs[0]},{probs[1]},{probs[2]},{probs[3]},"
            f"{pm},{pf},{'true' if is_org else 'false'}"
        )

    def planted_tweet(is_org: bool) -> TweetRecord:
        tid, uid = fac.next_ids()
        drug = rng.choice(drugs)
        week = rng.choice(PLANTED_WEEKS)
        state_i = rng.randrange(len(STATE_EVIDENCE))
        state, gps_name, profile_loc = STATE_EVIDENCE[state_i]
        wave = int(wave_of(week))
        profile = STANCE_PROFILES[(state_i + wave) % len(STANCE_PROFILES)]
        stance = rng.choices(_STANCES, weights=profile)[0]
        text = fac.stance_text(drug, stance)
        c = fac.stance_counters[stance]
        fac.stance_counters[stance] += 1
        party = _party_for(stance, c)
        healthcare = c % 4 == 0
        use_gps = fac.tweet_seq % 2 == 0
        if is_org:
            author = UserProfile(
                user_id=uid,
                self_location=None if use_gps else profile_loc,
                description=ORG_DESCRIPTIONS[fac.user_seq % len(ORG_DESCRIPTIONS)],
                followed_accounts=(),
            )
        else:
            author = fac.make_user(uid, party, healthcare, None if use_gps else profile_loc)
        rec = TweetRecord(
            id=tid,
            created_at=fac.created_at(week),
            text=text,
            lang="en",
            is_repost=False,
            author=author,
            place=GeoPlace(full_name=gps_name, country_code="US") if use_gps else None,
        )
        resolved = resolve(rec, fac.gazetteer)
        if resolved is None or resolved[0] != state:
            raise ContractError(f"geo plant failed for {state}: got {resolved}")
        if resolved[1] != ("gps" if use_gps else "profile"):
            raise ContractError(f"geo source plant failed for tweet {tid}")
        weekly_counts[drug][week] += 1
        if not is_org:
            party_stance[party][stance] += 1
            hc_stance["healthcare" if healthcare else "other"][stance] += 1
            cell = state_cells.setdefault((state, wave), [0, 0])
            cell[0] += stance.numeric()
            cell[1] += 1
        m3_rows.append(m3_line(uid, is_org))
        return rec

    for _ in range(n_clean):
        lines.append(serialize(planted_tweet(is_org=False)))
    # drop a few users from the predictions table to exercise the
    # coverage warning; partisanship/healthcare truth is unaffected
    m3_skip_users = {row.split(",")[0] for row in m3_rows[:3]}
    for _ in range(n_org):
        lines.append(serialize(planted_tweet(is_org=True)))

    for i in range(n_unresolved):
        tid, uid = fac.next_ids()
        drug = rng.choice(drugs)
        week = rng.choice(PLANTED_WEEKS)
        text = fac.stance_text(drug, _STANCES[i % 3])
        if i % 3 == 2:
            # non-US GPS place beats a US profile location outright
            author = fac.make_user(uid, "Neutral", False, "Texas, USA")
            place = GeoPlace(full_name="Toronto, Ontario", country_code="CA")
        else:
            author = fac.make_user(
                uid, "Neutral", False, UNRESOLVED_LOCATIONS[i % len(UNRESOLVED_LOCATIONS)]
            )
            place = None
        rec = TweetRecord(
            id=tid, created_at=fac.created_at(week), text=text, lang="en",
            is_repost=False, author=author, place=place,
        )
        if resolve(rec, fac.gazetteer) is not None:
            raise ContractError(f"unresolvable plant actually resolved: {tid}")
        m3_rows.append(m3_line(uid, False))
        lines.append(serialize(rec))

    for i in range(n_multi):
        tid, uid = fac.next_ids()
        a, b = rng.sample(drugs, 2)
        week = rng.choice(PLANTED_WEEKS)
        state, gps_name, _ = STATE_EVIDENCE[i % len(STATE_EVIDENCE)]
        text = MULTI_TEMPLATE.format(
            a=DRUG_SURFACES[a][0].capitalize(), b=DRUG_SURFACES[b][0]
        )
        if match_drugs(text, fac.lexicon) != {a, b}:
            raise ContractError(f"multi-drug plant mismatch: {text!r}")
        rec = TweetRecord(
            id=tid, created_at=fac.created_at(week), text=text, lang="en",
            is_repost=False,
            author=fac.make_user(uid, "Neutral", False, None),
            place=GeoPlace(full_name=gps_name, country_code="US"),
        )
        m3_rows.append(m3_line(uid, False))
        lines.append(serialize(rec))

    for i in range(n_no_mention):
        tid, uid = fac.next_ids()
        week = rng.choice(PLANTED_WEEKS)
        text = NO_MENTION_TEXTS[i % len(NO_MENTION_TEXTS)]
        if match_drugs(text, fac.lexicon):
            raise ContractError(f"no-mention plant matches a drug: {text!r}")
        rec = TweetRecord(
            id=tid, created_at=fac.created_at(week), text=text, lang="en",
            is_repost=False,
            author=fac.make_user(uid, "Neutral", False, "Texas, USA"),
            place=None,
        )
        m3_rows.append(m3_line(uid, False))
        lines.append(serialize(rec))

    for _ in range(n_non_english):
        tid, uid = fac.next_ids()
        rec = TweetRecord(
            id=tid, created_at=fac.created_at(rng.choice(PLANTED_WEEKS)),
            text="el tratamiento funciona muy bien", lang="es", is_repost=False,
            author=UserProfile(user_id=uid), place=None,
        )
        lines.append(serialize(rec))
    for i in range(n_repost):
        tid, uid = fac.next_ids()
        drug = rng.choice(drugs)
        rec = TweetRecord(
            id=tid, created_at=fac.created_at(rng.choice(PLANTED_WEEKS)),
            text=fac.stance_text(drug, _STANCES[i % 3]), lang="en", is_repost=True,
            author=UserProfile(user_id=uid), place=None,
        )
        lines.append(serialize(rec))
    for i in range(n_out_of_window):
        tid, uid = fac.next_ids()
        day = date(2019, 12, 1) if i % 2 == 0 else date(2021, 12, 15)
        rec = TweetRecord(
            id=tid, created_at=fac.created_at(day), text="old news archive",
            lang="en", is_repost=False, author=UserProfile(user_id=uid), place=None,
        )
        lines.append(serialize(rec))

    lines.extend(lines[rng.randrange(n_clean)] for _ in range(n_duplicate))
    lines.extend(MALFORMED_LINES[i % len(MALFORMED_LINES)] for i in range(n_malformed))
    rng.shuffle(lines)

    weekly_cases = {w: rng.randrange(5_000, 90_000) for w in PLANTED_WEEKS}
    first_day = PLANTED_WEEKS[0]
    last_day = PLANTED_WEEKS[-1] + timedelta(days=6)
    all_days = [
        first_day + timedelta(days=i) for i in range((last_day - first_day).days + 1)
    ]
    cum_us = []
    running = 0
    for d in all_days:
        running += weekly_cases.get(d, 0)  # whole week's cases land on its Tuesday
        cum_us.append(running)
    header = "Province/State,Country/Region,Lat,Long," + ",".join(_mdy(d) for d in all_days)
    us_row = ",US,37.09,-95.71," + ",".join(str(c) for c in cum_us)
    ca_row = "Ontario,Canada,51.25,-85.32," + ",".join(str(3 * i) for i in range(len(all_days)))
    fr_row = ",France,46.23,2.21," + ",".join(str(5 * i) for i in range(len(all_days)))
    atomic_write_text(out / "cases.csv", "\n".join([header, us_row, ca_row, fr_row]) + "\n")

    atomic_write_text(out / "corpus.jsonl", "\n".join(lines) + "\n")
    atomic_write_text(
        out / "roster.csv",
        "account_id,party\n" + "\n".join(f"{a},{p}" for a, p in ROSTER_ROWS) + "\n",
    )
    m3_header = "user_id,p_le18,p_19_29,p_30_39,p_ge40,p_male,p_female,is_org"
    kept_m3 = [r for r in m3_rows if r.split(",")[0] not in m3_skip_users]
    atomic_write_text(out / "m3.csv", m3_header + "\n" + "\n".join(kept_m3) + "\n")

    truth = {
        "seed": seed,
        "window": [STUDY_START.isoformat(), STUDY_END.isoformat()],
        "n_lines": len(lines),
        "rejections": {
            "non_english": n_non_english,
            "repost": n_repost,
            "duplicate": n_duplicate,
            "malformed": n_malformed,
            "out_of_window": n_out_of_window,
        },
        "no_mention": n_no_mention,
        "excluded_multi": n_multi,
        "geo_unresolved": n_unresolved,
        "weekly_counts": {
            d.value: {w.isoformat(): n for w, n in weekly_counts[d].items()}
            for d in DrugId
        },
        "weekly_cases": {w.isoformat(): n for w, n in weekly_cases.items()},
        "partisanship_stance": {
            p: {s.value: n for s, n in row.items()} for p, row in party_stance.items()
        },
        "healthcare_stance": {
            g: {s.value: n for s, n in row.items()} for g, row in hc_stance.items()
        },
        "state_cells": [
            {"state": st, "wave": wv, "n": n, "sum": total}
            for (st, wv), (total, n) in sorted(state_cells.items())
        ],
        "n_clean": n_clean,
        "n_org_tweets": n_org,
    }
    atomic_write_text(out / "truth.json", json.dumps(truth, indent=2, sort_keys=True) + "\n")
    return truth
