"""Drug keyword lexicon: loading, validated matching, and partitioning.

Matching is case-insensitive on NFC-normalized text. Each keyword
carries an explicit boundary mode instead of raw whitespace padding,
so keywords still fire at string boundaries and next to punctuation:

  exact-token                 whole token only ("hcq" never inside "thcqx")
  token-prefix                token must start with the pattern and may
                              continue ("hydroxych" hits "hydroxychloroquine")
  substring-with-space-guard  multi-word phrase; edges token-guarded and
                              internal whitespace matches any whitespace run

The same matcher backs the healthcare-background keyword list.
"""

from __future__ import annotations

import csv
import re
import unicodedata
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable

from .errors import LoadError
from .records import FilteredCorpus, TweetRecord

BOUNDARY_MODES = ("token-prefix", "exact-token", "substring-with-space-guard")

# token characters = unicode letters and digits; everything else
# (whitespace, punctuation, emoji) is a boundary
_TOKEN_CHAR = r"[^\W_]"
_LEFT_GUARD = rf"(?<!{_TOKEN_CHAR})"
_RIGHT_GUARD = rf"(?!{_TOKEN_CHAR})"
_TOKEN_RUN = re.compile(rf"{_TOKEN_CHAR}*")


class DrugId(Enum):
    HYDROXYCHLOROQUINE = "hydroxychloroquine"
    IVERMECTIN = "ivermectin"
    MOLNUPIRAVIR = "molnupiravir"
    REMDESIVIR = "remdesivir"


@dataclass(frozen=True)
class Keyword:
    pattern: str  # lowercase
    boundary_mode: str

    def __post_init__(self) -> None:
        if not self.pattern:
            raise LoadError("empty keyword pattern")
        if self.boundary_mode not in BOUNDARY_MODES:
            raise LoadError(f"unknown boundary_mode {self.boundary_mode!r}")


def normalize_text(text: str) -> str:
    """NFC normalization applied before any matching or masking."""
    return unicodedata.normalize("NFC", text)


def _compile(kw: Keyword) -> re.Pattern[str]:
    if kw.boundary_mode == "substring-with-space-guard":
        body = r"\s+".join(re.escape(part) for part in kw.pattern.split())
        return re.compile(_LEFT_GUARD + body + _RIGHT_GUARD, re.IGNORECASE)
    body = re.escape(kw.pattern)
    if kw.boundary_mode == "exact-token":
        return re.compile(_LEFT_GUARD + body + _RIGHT_GUARD, re.IGNORECASE)
    return re.compile(_LEFT_GUARD + body, re.IGNORECASE)


class KeywordMatcher:
    """One compiled keyword list; immutable after construction."""

    def __init__(self, keywords: Iterable[Keyword]):
        self.keywords = tuple(keywords)
        self._patterns = [(kw, _compile(kw)) for kw in self.keywords]

    def matches(self, text: str) -> bool:
        norm = normalize_text(text)
        return any(rx.search(norm) for _, rx in self._patterns)

    def spans(self, text: str) -> list[tuple[int, int]]:
        """Raw match spans over the NFC-normalized text, unsorted."""
        norm = normalize_text(text)
        out = []
        for _, rx in self._patterns:
            out.extend(m.span() for m in rx.finditer(norm))
        return out


def load_keyword_list(path: str | Path) -> KeywordMatcher:
    """Load a `pattern,boundary_mode` CSV (healthcare lexicon format)."""
    rows = _read_csv(path, ("pattern", "boundary_mode"))
    if not rows:
        raise LoadError(f"empty keyword file: {path}")
    return KeywordMatcher(
        Keyword(pattern=r["pattern"].strip().lower(), boundary_mode=r["boundary_mode"].strip())
        for r in rows
    )


class DrugLexicon:
    def __init__(self, entries: dict[DrugId, list[Keyword]]):
        for drug in DrugId:
            if not entries.get(drug):
                raise LoadError(f"no keywords for drug {drug.value}")
        self.entries = {drug: tuple(entries[drug]) for drug in DrugId}
        self._check_cross_drug_prefixes()
        self._matchers = {drug: KeywordMatcher(kws) for drug, kws in self.entries.items()}

    def _check_cross_drug_prefixes(self) -> None:
        pats = [(kw.pattern, drug) for drug, kws in self.entries.items() for kw in kws]
        for p1, d1 in pats:
            for p2, d2 in pats:
                if d1 is not d2 and p2.startswith(p1):
                    kind = "duplicates" if p1 == p2 else f"is a prefix of {p2!r}, owned by"
                    raise LoadError(
                        f"keyword {p1!r} of {d1.value} {kind} {d2.value}: "
                        "cross-drug ambiguity"
                    )

    def matcher(self, drug: DrugId) -> KeywordMatcher:
        return self._matchers[drug]


def _read_csv(path: str | Path, required: tuple[str, ...]) -> list[dict[str, str]]:
    p = Path(path)
    if not p.exists():
        raise LoadError(f"file not found: {p}")
    with open(p, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None:
            raise LoadError(f"empty file: {p}")
        missing = [c for c in required if c not in reader.fieldnames]
        if missing:
            raise LoadError(f"{p}: missing columns {missing}")
        return [row for row in reader if any((v or "").strip() for v in row.values())]


def bundled_path(name: str) -> Path:
    """Path of a data file shipped inside the package."""
    return Path(str(resources.files("drugpulse").joinpath("data").joinpath(name)))


def load_lexicon(path: str | Path | None = None) -> DrugLexicon:
    """Load and validate a `drug,pattern,boundary_mode` CSV.

    With no path, the bundled default lexicon is used. Duplicate or
    prefix-ambiguous patterns across drugs and drugs with no keywords
    are load errors.
    """
    p = Path(path) if path is not None else bundled_path("drug_lexicon.csv")
    rows = _read_csv(p, ("drug", "pattern", "boundary_mode"))
    if not rows:
        raise LoadError(f"empty lexicon file: {p}")
    by_name = {d.value: d for d in DrugId}
    entries: dict[DrugId, list[Keyword]] = {d: [] for d in DrugId}
    for i, row in enumerate(rows, start=2):
        name = row["drug"].strip().lower()
        if name not in by_name:
            raise LoadError(f"{p}:{i}: unknown drug {row['drug']!r}")
        entries[by_name[name]].append(
            Keyword(pattern=row["pattern"].strip().lower(), boundary_mode=row["boundary_mode"].strip())
        )
    return DrugLexicon(entries)


def match_drugs(text: str, lexicon: DrugLexicon) -> set[DrugId]:
    """Drugs whose keyword lists fire anywhere in the text."""
    return {drug for drug in DrugId if lexicon.matcher(drug).matches(text)}


def drug_token_spans(text: str, lexicon: DrugLexicon) -> list[tuple[int, int]]:
    """Maximal token spans covered by any drug keyword, merged and sorted.

    Spans index into the NFC-normalized text. Token-prefix matches are
    extended to the end of the token they start; overlapping spans fuse.
    """
    norm = normalize_text(text)
    spans: list[tuple[int, int]] = []
    for drug in DrugId:
        spans.extend(lexicon.matcher(drug).spans(norm))
    if not spans:
        return []
    extended = []
    for s, e in spans:
        m = _TOKEN_RUN.match(norm, e)
        extended.append((s, m.end() if m else e))
    extended.sort()
    merged = [extended[0]]
    for s, e in extended[1:]:
        ps, pe = merged[-1]
        if s <= pe:
            merged[-1] = (ps, max(pe, e))
        else:
            merged.append((s, e))
    return merged


def partition_single_drug(
    corpus: FilteredCorpus | Iterable[TweetRecord], lexicon: DrugLexicon
) -> tuple[dict[DrugId, list[TweetRecord]], int]:
    """Split tweets by the single drug they mention.

    Tweets mentioning two or more distinct drugs are dropped and counted;
    tweets mentioning none are silently skipped (partition completeness
    is checked by the caller's conservation property, not here).
    """
    records = corpus.records if isinstance(corpus, FilteredCorpus) else corpus
    partitions: dict[DrugId, list[TweetRecord]] = {d: [] for d in DrugId}
    excluded_multi = 0
    for rec in records:
        drugs = match_drugs(rec.text, lexicon)
        if len(drugs) == 1:
            partitions[next(iter(drugs))].append(rec)
        elif len(drugs) > 1:
            excluded_multi += 1
    return partitions, excluded_multi
