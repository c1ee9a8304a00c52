"""Content-analysis plumbing around the numeric kernels: the hashed
baseline embedder, the embedding cache file, a capitalized-token entity
tagger (plumbing only, not a faithful NER model), and per-cell entity
frequency tables.
"""

from __future__ import annotations

import hashlib
import re
import struct
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import ContractError, LoadError
from .lexicon import DrugId, normalize_text
from .timeline import Wave

BASELINE_DIM = 256

ENTITY_CLASSES = ("Person", "Organization", "Location", "Miscellaneous")

_WORD = re.compile(r"[^\W_]+", re.UNICODE)


def _hash_index(feature: str, dim: int) -> int:
    digest = hashlib.blake2b(feature.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") % dim


def embed_baseline(texts: list[str], dim: int = BASELINE_DIM) -> np.ndarray:
    """Feature-hashed unigram+bigram counts, L2-normalized per row.

    Texts with no word tokens fall back to a single whole-string
    feature so every text with visible content gets a unit-norm row;
    empty/whitespace-only texts embed to the zero row.
    """
    X = np.zeros((len(texts), dim), dtype=np.float64)
    for i, text in enumerate(texts):
        toks = _WORD.findall(normalize_text(text).lower())
        feats = list(toks)
        feats.extend(f"{a} {b}" for a, b in zip(toks, toks[1:]))
        if not feats:
            stripped = text.strip()
            if not stripped:
                continue
            feats = [f"\x00{stripped}"]
        for feat in feats:
            X[i, _hash_index(feat, dim)] += 1.0
        norm = np.linalg.norm(X[i])
        if norm > 0:
            X[i] /= norm
    return X


def embed(texts: list[str], provider: str = "baseline", client: object | None = None) -> np.ndarray:
    """Embed texts with the named provider, row order = input order."""
    if provider == "baseline":
        return embed_baseline(texts)
    if provider == "sidecar":
        if client is None:
            raise ContractError("sidecar provider selected but no client attached")
        return client.embed(texts)
    raise ContractError(f"unknown embedding provider {provider!r}")


_CACHE_MAGIC = b"EMB1"
_DTYPE_F32 = 1


def write_embedding_cache(path: str | Path, X: np.ndarray) -> None:
    """Write a matrix as 16-byte header (magic, n, d, dtype) + f32 rows."""
    X = np.asarray(X)
    if X.ndim != 2:
        raise ContractError(f"cache needs a 2-D matrix, got shape {X.shape}")
    n, d = X.shape
    header = _CACHE_MAGIC + struct.pack("<III", n, d, _DTYPE_F32)
    data = np.ascontiguousarray(X, dtype=np.float32).tobytes()
    Path(path).write_bytes(header + data)


def read_embedding_cache(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:4] != _CACHE_MAGIC:
        raise LoadError(f"{path}: not an embedding cache file")
    n, d, dtype = struct.unpack("<III", raw[4:16])
    if dtype != _DTYPE_F32:
        raise LoadError(f"{path}: unknown dtype code {dtype}")
    expected = 16 + n * d * 4
    if len(raw) != expected:
        raise LoadError(f"{path}: size {len(raw)} != expected {expected}")
    return np.frombuffer(raw[16:], dtype="<f4").reshape(n, d).astype(np.float64)


@dataclass(frozen=True)
class EntityMention:
    surface: str
    entity_class: str

    def __post_init__(self) -> None:
        if self.entity_class not in ENTITY_CLASSES:
            raise ContractError(f"unknown entity class {self.entity_class!r}")


_HONORIFICS = {
    "dr", "mr", "mrs", "ms", "prof", "professor", "president", "senator",
    "gov", "governor", "rep", "sen", "mayor", "judge", "sir",
}
_ORG_HINTS = {
    "fda", "cdc", "who", "nih", "inc", "corp", "llc", "ltd", "co",
    "pfizer", "merck", "gilead", "moderna", "university", "hospital",
    "department", "agency", "institute", "committee", "association",
}
_LOCATION_HINTS = {
    "america", "usa", "us", "china", "india", "texas", "florida",
    "california", "york", "washington", "wuhan", "europe", "africa",
    "city", "county", "state",
}

_CAP_RUN = re.compile(r"(?<![^\W_])[A-Z][\w']*(?:\s+[A-Z][\w']*)*")


def heuristic_entities(text: str) -> list[EntityMention]:
    """Capitalized-token tagger used when no model server is attached.

    A blunt instrument: runs of capitalized words become mentions, and
    a hint-word lookup picks the class. Good enough to exercise the
    frequency tables; not a substitute for a trained tagger.
    """
    mentions = []
    for m in _CAP_RUN.finditer(normalize_text(text)):
        surface = m.group(0)
        words = [w.lower().strip("'") for w in surface.split()]
        if m.start() == 0 and len(words) == 1 and not surface.isupper():
            # sentence-initial single word is usually just capitalization
            if words[0] not in _ORG_HINTS and words[0] not in _LOCATION_HINTS:
                continue
        if words[0] in _HONORIFICS:
            cls = "Person"
        elif surface.isupper() and len(surface) >= 2 or any(w in _ORG_HINTS for w in words):
            cls = "Organization"
        elif any(w in _LOCATION_HINTS for w in words):
            cls = "Location"
        elif len(words) >= 2:
            cls = "Person"
        else:
            cls = "Miscellaneous"
        mentions.append(EntityMention(surface=surface, entity_class=cls))
    return mentions


def entity_frequencies(
    tagged: Iterable[tuple[DrugId, Wave, EntityMention]],
    top_m: int | None = None,
) -> dict[tuple[DrugId, Wave, str], list[tuple[str, int]]]:
    """Ranked case-folded mention counts per (drug, wave, class) cell.

    Ranking is count-descending, ties alphabetical; truncated to top_m
    when given.
    """
    cells: dict[tuple[DrugId, Wave, str], Counter] = {}
    for drug, wave, mention in tagged:
        key = (drug, wave, mention.entity_class)
        cells.setdefault(key, Counter())[mention.surface.lower()] += 1
    out = {}
    for key, counter in cells.items():
        ranked = sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))
        out[key] = ranked[:top_m] if top_m is not None else ranked
    return out
