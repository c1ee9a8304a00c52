"""Server-side drug-name masking.

Masked stance mode replaces every maximal drug-keyword token span with
`[mask]` before the text reaches the model. The rule must agree with
the pipeline client's own masking transform, so the boundary semantics
are identical:

  exact-token                 whole token only
  token-prefix                token starts with the pattern; the match
                              extends to the end of that token
  substring-with-space-guard  multi-word phrase, edges token-guarded,
                              internal whitespace matches any run

Token characters are unicode letters and digits; underscore and
everything else is a boundary. Matching is case-insensitive on
NFC-normalized text, and spans index into the normalized string.
"""

from __future__ import annotations

import csv
import re
import unicodedata
from importlib import resources
from pathlib import Path

MASK_TOKEN = "[mask]"

BOUNDARY_MODES = ("token-prefix", "exact-token", "substring-with-space-guard")

_TOKEN_CHAR = r"[^\W_]"
_LEFT_GUARD = rf"(?<!{_TOKEN_CHAR})"
_RIGHT_GUARD = rf"(?!{_TOKEN_CHAR})"
_TOKEN_RUN = re.compile(rf"{_TOKEN_CHAR}*")


def normalize_text(text: str) -> str:
    return unicodedata.normalize("NFC", text)


def _compile(pattern: str, mode: str) -> re.Pattern[str]:
    if mode == "substring-with-space-guard":
        body = r"\s+".join(re.escape(part) for part in pattern.split())
        return re.compile(_LEFT_GUARD + body + _RIGHT_GUARD, re.IGNORECASE)
    body = re.escape(pattern)
    if mode == "exact-token":
        return re.compile(_LEFT_GUARD + body + _RIGHT_GUARD, re.IGNORECASE)
    return re.compile(_LEFT_GUARD + body, re.IGNORECASE)


class MaskList:
    """Compiled mask-term list; immutable after construction."""

    def __init__(self, terms: list[tuple[str, str]]):
        if not terms:
            raise ValueError("empty mask-term list")
        for pattern, mode in terms:
            if not pattern:
                raise ValueError("empty mask-term pattern")
            if mode not in BOUNDARY_MODES:
                raise ValueError(f"unknown boundary_mode {mode!r}")
        self._patterns = [_compile(p.lower(), m) for p, m in terms]

    def spans(self, norm: str) -> list[tuple[int, int]]:
        """Maximal masked token spans over normalized text, merged and sorted."""
        raw: list[tuple[int, int]] = []
        for rx in self._patterns:
            raw.extend(m.span() for m in rx.finditer(norm))
        if not raw:
            return []
        # extend every match to the end of the token it starts
        extended = []
        for s, e in raw:
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

    def mask(self, text: str) -> str:
        norm = normalize_text(text)
        spans = self.spans(norm)
        if not spans:
            return norm
        out = []
        pos = 0
        for s, e in spans:
            out.append(norm[pos:s])
            out.append(MASK_TOKEN)
            pos = e
        out.append(norm[pos:])
        return "".join(out)


def load_mask_terms(path: str | Path | None = None) -> MaskList:
    """Load a `pattern,boundary_mode` CSV; bundled default list with no path."""
    if path is None:
        p = Path(str(resources.files("pulse_sidecar").joinpath("data/mask_terms.csv")))
    else:
        p = Path(path)
    if not p.exists():
        raise ValueError(f"mask-term file not found: {p}")
    with open(p, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or not {"pattern", "boundary_mode"} <= set(reader.fieldnames):
            raise ValueError(f"{p}: expected columns pattern,boundary_mode")
        terms = [
            (row["pattern"].strip().lower(), row["boundary_mode"].strip())
            for row in reader
            if any((v or "").strip() for v in row.values())
        ]
    return MaskList(terms)
