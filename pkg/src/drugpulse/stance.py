"""Three-class stance: masking transform, pluggable classifier, dataset
split, and per-drug evaluation metrics.

The bundled rule baseline is a documented cue-word scorer, not a
reproduction of any trained classifier. It exists so the pipeline and
test suite run with no model weights at all.
"""

from __future__ import annotations

import csv
import random
import re
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .errors import ContractError, LoadError
from .lexicon import DrugLexicon, bundled_path, drug_token_spans, load_lexicon, normalize_text

MASK_TOKEN = "[mask]"


class StanceLabel(Enum):
    Negative = "Negative"
    Neutral = "Neutral"
    Positive = "Positive"

    def numeric(self) -> int:
        return {"Negative": -1, "Neutral": 0, "Positive": 1}[self.value]

    @classmethod
    def from_numeric(cls, n: int) -> "StanceLabel":
        try:
            return {-1: cls.Negative, 0: cls.Neutral, 1: cls.Positive}[n]
        except KeyError:
            raise ContractError(f"no stance with numeric value {n}") from None


CLASS_ORDER = (StanceLabel.Negative, StanceLabel.Neutral, StanceLabel.Positive)

# COVID-CQ label codes.
_CODE_TO_LABEL = {0: StanceLabel.Negative, 1: StanceLabel.Neutral, 2: StanceLabel.Positive}


def mask_drug_names(text: str, lexicon: DrugLexicon) -> str:
    """Replace every maximal drug-keyword token span with `[mask]`."""
    norm = normalize_text(text)
    spans = drug_token_spans(norm, lexicon)
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


@dataclass(frozen=True)
class CueTable:
    positive: frozenset[str]
    negative: frozenset[str]
    negators: frozenset[str]


def load_cue_table(path: str | Path | None = None) -> CueTable:
    p = Path(path) if path is not None else bundled_path("stance_cues.csv")
    if not p.exists():
        raise LoadError(f"file not found: {p}")
    buckets: dict[str, set[str]] = {"positive": set(), "negative": set(), "negator": set()}
    with open(p, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or not {"term", "polarity"} <= set(reader.fieldnames):
            raise LoadError(f"{p}: expected columns term,polarity")
        for i, row in enumerate(reader, start=2):
            term = _cue_token(row["term"])
            pol = row["polarity"].strip().lower()
            if pol not in buckets:
                raise LoadError(f"{p}:{i}: unknown polarity {row['polarity']!r}")
            if not term:
                raise LoadError(f"{p}:{i}: empty term")
            buckets[pol].add(term)
    if not buckets["positive"] or not buckets["negative"]:
        raise LoadError(f"{p}: cue table needs both positive and negative terms")
    return CueTable(
        positive=frozenset(buckets["positive"]),
        negative=frozenset(buckets["negative"]),
        negators=frozenset(buckets["negator"]),
    )


_WORD = re.compile(r"[^\W_]+(?:'[^\W_]+)*")


def _cue_token(raw: str) -> str:
    return raw.strip().lower().replace("'", "")


def _tokens(text: str) -> list[str]:
    return [m.group(0).replace("'", "") for m in _WORD.finditer(text.lower())]


# Cues inside this many preceding tokens of a negator flip polarity.
NEGATION_WINDOW = 3


def score_cues(text: str, cues: CueTable) -> int:
    toks = _tokens(text)
    score = 0
    for i, tok in enumerate(toks):
        if tok in cues.positive:
            polarity = 1
        elif tok in cues.negative:
            polarity = -1
        else:
            continue
        window = toks[max(0, i - NEGATION_WINDOW):i]
        if any(w in cues.negators for w in window):
            polarity = -polarity
        score += polarity
    return score


def rule_classify_one(text: str, cues: CueTable) -> StanceLabel:
    score = score_cues(text, cues)
    if score > 0:
        return StanceLabel.Positive
    if score < 0:
        return StanceLabel.Negative
    return StanceLabel.Neutral


@dataclass
class ClassifierHandle:
    """Configuration for the stance step: rule baseline or sidecar."""

    kind: str = "rule-baseline"
    masking: bool = False
    cues: CueTable | None = None
    client: object | None = None  # sidecar.SidecarClient when kind = sidecar

    def __post_init__(self) -> None:
        if self.kind not in ("rule-baseline", "sidecar"):
            raise ContractError(f"unknown classifier kind {self.kind!r}")


def classify(
    texts: list[str],
    handle: ClassifierHandle,
    lexicon: DrugLexicon | None = None,
) -> list[StanceLabel]:
    """Classify texts, order-preserving; masking is applied first when on."""
    if handle.masking:
        lex = lexicon if lexicon is not None else load_lexicon()
        texts = [mask_drug_names(t, lex) for t in texts]
    if handle.kind == "rule-baseline":
        cues = handle.cues if handle.cues is not None else load_cue_table()
        return [rule_classify_one(t, cues) for t in texts]
    if handle.client is None:
        raise ContractError("sidecar classifier selected but no client attached")
    return handle.client.stance(texts)


@dataclass
class StanceDataset:
    items: list[tuple[str, StanceLabel]]

    @property
    def class_counts(self) -> dict[StanceLabel, int]:
        c = Counter(label for _, label in self.items)
        return {label: c.get(label, 0) for label in CLASS_ORDER}

    def __len__(self) -> int:
        return len(self.items)


def load_stance_dataset(
    path: str | Path, split_seed: int
) -> tuple[StanceDataset, StanceDataset]:
    """Load a `text,label` CSV (label codes 0/1/2) and split 70:30.

    The split is a seeded shuffle with |train| = round(0.7 n); the same
    file and seed always give the same split.
    """
    p = Path(path)
    if not p.exists():
        raise LoadError(f"file not found: {p}")
    items: list[tuple[str, StanceLabel]] = []
    with open(p, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or not {"text", "label"} <= set(reader.fieldnames):
            raise LoadError(f"{p}: expected columns text,label")
        for i, row in enumerate(reader, start=2):
            raw = (row["label"] or "").strip()
            try:
                code = int(raw)
            except ValueError:
                raise LoadError(f"{p}:{i}: label {raw!r} is not an integer") from None
            if code not in _CODE_TO_LABEL:
                raise LoadError(f"{p}:{i}: unknown label code {code}")
            items.append((row["text"], _CODE_TO_LABEL[code]))
    if not items:
        raise LoadError(f"{p}: no data rows")
    order = list(range(len(items)))
    random.Random(split_seed).shuffle(order)
    n_train = int(round(0.7 * len(items)))
    train = [items[i] for i in order[:n_train]]
    valid = [items[i] for i in order[n_train:]]
    return StanceDataset(train), StanceDataset(valid)


def sample_indices(n: int, size: int, seed: int) -> list[int]:
    """Fixed-seed sample of row indices, ascending, for spot evaluation."""
    if size > n:
        raise ContractError(f"sample size {size} exceeds population {n}")
    return sorted(random.Random(seed).sample(range(n), size))


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class MetricsRow:
    per_class: dict[StanceLabel, ClassMetrics]
    macro_precision: float
    macro_recall: float
    macro_f1: float
    accuracy: float
    confusion: tuple[tuple[int, ...], ...]  # rows = gold, cols = predicted


def evaluate(pred: list[StanceLabel], gold: list[StanceLabel]) -> MetricsRow:
    if len(pred) != len(gold):
        raise ContractError(f"pred/gold length mismatch: {len(pred)} vs {len(gold)}")
    if not pred:
        raise ContractError("cannot evaluate empty prediction list")
    idx = {label: i for i, label in enumerate(CLASS_ORDER)}
    m = [[0, 0, 0] for _ in range(3)]
    for p, g in zip(pred, gold):
        m[idx[g]][idx[p]] += 1
    per_class: dict[StanceLabel, ClassMetrics] = {}
    for label in CLASS_ORDER:
        i = idx[label]
        col = sum(m[r][i] for r in range(3))
        row = sum(m[i])
        precision = m[i][i] / col if col else 0.0
        recall = m[i][i] / row if row else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class[label] = ClassMetrics(precision, recall, f1)
    macro_p = sum(c.precision for c in per_class.values()) / 3
    macro_r = sum(c.recall for c in per_class.values()) / 3
    macro_f = sum(c.f1 for c in per_class.values()) / 3
    accuracy = sum(m[i][i] for i in range(3)) / len(pred)
    return MetricsRow(
        per_class=per_class,
        macro_precision=macro_p,
        macro_recall=macro_r,
        macro_f1=macro_f,
        accuracy=accuracy,
        confusion=tuple(tuple(r) for r in m),
    )
