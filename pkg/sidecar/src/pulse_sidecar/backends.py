"""Task backends for the sidecar server.

StubBackend is the default: deterministic hash-derived outputs with no
model weights, so the protocol is exercisable offline and golden
transcripts stay stable. TransformersBackend loads real weights and is
imported lazily; it serves the released stance model and a tweet-tuned
encoder, with NER optional via stanza.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from typing import Sequence

from .masking import MaskList, normalize_text

STANCE_CLASSES = ("Negative", "Neutral", "Positive")
ENTITY_CLASSES = ("Person", "Organization", "Location", "Miscellaneous")

DEFAULT_MODELS = {
    "encoder": "vinai/bertweet-large",
    "stance": "ningkko/drug-stance-bert",
}

_TOKEN = re.compile(r"[^\W_]+")


class OutOfMemory(Exception):
    """A batch too large to process; the caller should retry smaller."""


def _unit_floats(seed: str, n: int) -> list[float]:
    # 8 floats per sha256 block, each uint32 mapped into [-1, 1)
    out: list[float] = []
    block = 0
    while len(out) < n:
        digest = hashlib.sha256(f"{seed}\x00{block}".encode("utf-8")).digest()
        for i in range(0, 32, 4):
            u = int.from_bytes(digest[i:i + 4], "big")
            out.append(u / 2147483648.0 - 1.0)
        block += 1
    return out[:n]


def _softmax(logits: Sequence[float]) -> list[float]:
    top = max(logits)
    exps = [math.exp(x - top) for x in logits]
    total = sum(exps)
    return [e / total for e in exps]


class StubBackend:
    """Weight-free deterministic backend.

    Outputs are functions of the input text alone (sha256-derived), so
    identical requests always produce identical responses, across
    processes and platforms. Not a model: the values carry no signal
    beyond determinism, which is exactly what protocol tests need.
    """

    tasks = ("embed", "stance", "ner", "m3")
    capacity = 4096  # texts per request before an oom error is returned

    def __init__(self, mask_list: MaskList, embed_dim: int = 1024):
        self._mask_list = mask_list
        self.embed_dim = embed_dim
        self.models = {
            "encoder": f"hash-stub-{embed_dim}",
            "stance": "hash-stub-3class",
            "ner": "hash-stub-4class",
            "m3": "hash-stub-demographics",
        }

    def _check_capacity(self, n: int) -> None:
        if n > self.capacity:
            raise OutOfMemory(
                f"batch of {n} texts exceeds capacity {self.capacity}; "
                "retry with a smaller batch"
            )

    def embed(self, texts: list[str]) -> list[list[float]]:
        self._check_capacity(len(texts))
        out = []
        for text in texts:
            v = _unit_floats("embed\x00" + text, self.embed_dim)
            norm = math.sqrt(sum(x * x for x in v))
            if norm == 0.0:
                v[0] = 1.0
                norm = 1.0
            out.append([x / norm for x in v])
        return out

    def stance(self, texts: list[str], masking: bool) -> tuple[list[str], list[list[float]]]:
        self._check_capacity(len(texts))
        labels = []
        probs = []
        for text in texts:
            seen = self._mask_list.mask(text) if masking else text
            logits = [2.0 * x for x in _unit_floats("stance\x00" + seen, 3)]
            p = _softmax(logits)
            probs.append(p)
            labels.append(STANCE_CLASSES[p.index(max(p))])
        return labels, probs

    def ner(self, texts: list[str]) -> list[list[dict]]:
        self._check_capacity(len(texts))
        out = []
        for text in texts:
            norm = normalize_text(text)
            ents: list[dict] = []
            run: tuple[int, int] | None = None
            for m in _TOKEN.finditer(norm):
                if m.group()[0].isupper():
                    # runs only fuse across pure whitespace
                    if run is not None and norm[run[1]:m.start()].isspace():
                        run = (run[0], m.end())
                    else:
                        self._flush(norm, run, ents)
                        run = m.span()
                else:
                    self._flush(norm, run, ents)
                    run = None
            self._flush(norm, run, ents)
            out.append(ents)
        return out

    @staticmethod
    def _flush(norm: str, run: tuple[int, int] | None, ents: list[dict]) -> None:
        if run is None:
            return
        surface = norm[run[0]:run[1]]
        if len(surface) < 2:  # bare "I", "A"
            return
        digest = hashlib.blake2b(surface.lower().encode("utf-8"), digest_size=4).digest()
        ents.append({
            "surface": surface,
            "class": ENTITY_CLASSES[int.from_bytes(digest, "big") % len(ENTITY_CLASSES)],
        })

    def m3(self, rows: list[dict]) -> list[dict]:
        self._check_capacity(len(rows))
        out = []
        for row in rows:
            key = json.dumps(row, sort_keys=True, ensure_ascii=False)
            u = _unit_floats("m3\x00" + key, 7)
            age = [x + 1.000001 for x in u[:4]]
            age_total = sum(age)
            male = u[4] + 1.000001
            female = u[5] + 1.000001
            out.append({
                "p_le18": age[0] / age_total,
                "p_19_29": age[1] / age_total,
                "p_30_39": age[2] / age_total,
                "p_ge40": age[3] / age_total,
                "p_male": male / (male + female),
                "p_female": female / (male + female),
                "is_org": u[6] > 0.75,
            })
        return out


def _stance_label_order(id2label: dict) -> list[int] | None:
    """Map model label names onto STANCE_CLASSES order, None if opaque."""
    hints = {"neg": 0, "against": 0, "neu": 1, "none": 1, "pos": 2, "favor": 2}
    order: dict[int, int] = {}
    for idx, name in id2label.items():
        lowered = str(name).lower()
        for hint, cls in hints.items():
            if lowered.startswith(hint):
                order[int(idx)] = cls
                break
    if len(order) != 3 or set(order.values()) != {0, 1, 2}:
        return None
    return [idx for idx, _ in sorted(order.items(), key=lambda kv: kv[1])]


class TransformersBackend:
    """Real-weights backend: encoder embeddings and stance classification.

    Heavy imports happen here, not at module load. Models run in eval
    mode under no_grad, so outputs are deterministic for fixed weights.
    Index order 0/1/2 = Negative/Neutral/Positive when the checkpoint
    does not name its labels.
    """

    def __init__(
        self,
        mask_list: MaskList,
        models: dict[str, str] | None = None,
        device: str = "cpu",
        local_files_only: bool = False,
    ):
        import torch
        from transformers import (
            AutoModel,
            AutoModelForSequenceClassification,
            AutoTokenizer,
        )

        self._torch = torch
        self._mask_list = mask_list
        self._device = device
        ids = dict(DEFAULT_MODELS)
        ids.update(models or {})
        kw = {"local_files_only": local_files_only}

        self._enc_tok = AutoTokenizer.from_pretrained(ids["encoder"], **kw)
        self._enc = AutoModel.from_pretrained(ids["encoder"], **kw).to(device).eval()
        self._st_tok = AutoTokenizer.from_pretrained(ids["stance"], **kw)
        self._st = (
            AutoModelForSequenceClassification.from_pretrained(ids["stance"], **kw)
            .to(device)
            .eval()
        )
        if self._st.config.num_labels != len(STANCE_CLASSES):
            raise ValueError(
                f"stance model has {self._st.config.num_labels} labels, expected 3"
            )
        self._st_order = _stance_label_order(self._st.config.id2label) or [0, 1, 2]

        self.embed_dim = int(self._enc.config.hidden_size)
        self.capacity = 256
        self.tasks = ("embed", "stance")
        self.models = {"encoder": ids["encoder"], "stance": ids["stance"]}

        self._ner_pipe = None
        if "ner" in ids:
            self._ner_pipe = self._load_ner(ids["ner"])
            self.tasks = self.tasks + ("ner",)
            self.models["ner"] = ids["ner"]

    @staticmethod
    def _load_ner(package: str):
        import stanza

        return stanza.Pipeline(
            lang="en",
            processors="tokenize,ner",
            package={"ner": package},
            download_method=None,
            verbose=False,
        )

    def _check_capacity(self, n: int) -> None:
        if n > self.capacity:
            raise OutOfMemory(
                f"batch of {n} texts exceeds capacity {self.capacity}; "
                "retry with a smaller batch"
            )

    def _guard_oom(self, e: RuntimeError) -> None:
        if "out of memory" in str(e).lower():
            raise OutOfMemory("forward pass ran out of memory; retry with a smaller batch")
        raise e

    def embed(self, texts: list[str]) -> list[list[float]]:
        self._check_capacity(len(texts))
        torch = self._torch
        enc = self._enc_tok(
            texts, padding=True, truncation=True, max_length=128, return_tensors="pt"
        ).to(self._device)
        try:
            with torch.no_grad():
                hidden = self._enc(**enc).last_hidden_state
        except (RuntimeError, MemoryError) as e:
            if isinstance(e, MemoryError):
                raise OutOfMemory("forward pass ran out of memory") from e
            self._guard_oom(e)
        mask = enc["attention_mask"].unsqueeze(-1)
        pooled = (hidden * mask).sum(dim=1) / mask.sum(dim=1).clamp(min=1)
        return pooled.cpu().double().tolist()

    def stance(self, texts: list[str], masking: bool) -> tuple[list[str], list[list[float]]]:
        self._check_capacity(len(texts))
        torch = self._torch
        seen = [self._mask_list.mask(t) for t in texts] if masking else list(texts)
        enc = self._st_tok(
            seen, padding=True, truncation=True, max_length=128, return_tensors="pt"
        ).to(self._device)
        try:
            with torch.no_grad():
                logits = self._st(**enc).logits
        except (RuntimeError, MemoryError) as e:
            if isinstance(e, MemoryError):
                raise OutOfMemory("forward pass ran out of memory") from e
            self._guard_oom(e)
        raw = torch.softmax(logits, dim=-1).cpu().double().tolist()
        probs = [[row[i] for i in self._st_order] for row in raw]
        labels = [STANCE_CLASSES[p.index(max(p))] for p in probs]
        return labels, probs

    def ner(self, texts: list[str]) -> list[list[dict]]:
        if self._ner_pipe is None:
            raise ValueError("ner model not configured")
        self._check_capacity(len(texts))
        class_of = {"PER": "Person", "ORG": "Organization", "LOC": "Location"}
        out = []
        for text in texts:
            doc = self._ner_pipe(text)
            out.append([
                {"surface": ent.text, "class": class_of.get(ent.type, "Miscellaneous")}
                for ent in doc.ents
            ])
        return out
