"""Client for the model-server sidecar speaking NDJSON over stdio.

The server prints one handshake line ({"tasks", "embed_dim", "models",
"batch"}) and then answers each request line with exactly one response
line carrying the same id. Responses may arrive out of order; the
client reorders. Any protocol violation surfaces as a TransportError
naming the batch that failed.
"""

from __future__ import annotations

import json
import subprocess
from typing import Iterator

import numpy as np

from .errors import TransportError
from .stance import StanceLabel

STANCE_PROB_ORDER = ("Negative", "Neutral", "Positive")


class SidecarClient:
    def __init__(self, cmd: list[str]):
        self._proc = subprocess.Popen(
            cmd,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
            text=True,
            bufsize=1,
        )
        self._counter = 0
        line = self._proc.stdout.readline()
        if not line:
            raise TransportError("sidecar produced no handshake line")
        try:
            hs = json.loads(line)
        except json.JSONDecodeError as e:
            raise TransportError(f"unparseable handshake: {e}") from e
        if not isinstance(hs, dict) or "tasks" not in hs or "embed_dim" not in hs:
            raise TransportError(f"handshake missing required fields: {line.strip()}")
        self.tasks: tuple[str, ...] = tuple(hs["tasks"])
        self.embed_dim: int = int(hs["embed_dim"])
        self.models: dict = hs.get("models", {})
        self.batch_size: int = int(hs.get("batch", 32))

    def close(self) -> None:
        if self._proc.stdin and not self._proc.stdin.closed:
            self._proc.stdin.close()
        self._proc.wait(timeout=10)

    def __enter__(self) -> "SidecarClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _next_id(self) -> str:
        self._counter += 1
        return f"req-{self._counter}"

    def _roundtrip(self, requests: list[dict]) -> dict[str, dict]:
        """Send a burst of requests, collect one response per id."""
        pending = {r["id"] for r in requests}
        try:
            for r in requests:
                self._proc.stdin.write(json.dumps(r) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as e:
            raise TransportError(f"sidecar pipe closed: {e}", batch_id=requests[0]["id"]) from e
        results: dict[str, dict] = {}
        while pending:
            line = self._proc.stdout.readline()
            if not line:
                raise TransportError(
                    f"sidecar closed stream with {len(pending)} response(s) outstanding",
                    batch_id=sorted(pending)[0],
                )
            try:
                resp = json.loads(line)
            except json.JSONDecodeError as e:
                raise TransportError(
                    f"unparseable sidecar response: {e}", batch_id=sorted(pending)[0]
                ) from e
            rid = resp.get("id")
            if rid not in pending:
                raise TransportError(f"response for unknown id {rid!r}", batch_id=str(rid))
            pending.discard(rid)
            if not resp.get("ok", False):
                err = resp.get("error", {})
                raise TransportError(
                    f"sidecar error {err.get('code', '?')}: {err.get('message', '')}",
                    batch_id=rid,
                )
            results[rid] = resp.get("result", {})
        return results

    def _batches(self, texts: list[str]) -> Iterator[list[str]]:
        for i in range(0, len(texts), self.batch_size):
            yield texts[i:i + self.batch_size]

    def embed(self, texts: list[str]) -> np.ndarray:
        if not texts:
            return np.zeros((0, self.embed_dim), dtype=np.float64)
        rows: list[list[float]] = []
        for batch in self._batches(texts):
            rid = self._next_id()
            result = self._roundtrip([{"id": rid, "task": "embed", "texts": batch}])[rid]
            vectors = result.get("vectors")
            if not isinstance(vectors, list) or len(vectors) != len(batch):
                raise TransportError(
                    f"embed result has {len(vectors or [])} vectors for {len(batch)} texts",
                    batch_id=rid,
                )
            rows.extend(vectors)
        X = np.asarray(rows, dtype=np.float64)
        if X.shape[1] != self.embed_dim:
            raise TransportError(
                f"embed dim {X.shape[1]} != handshake dim {self.embed_dim}"
            )
        return X

    def stance(self, texts: list[str], masking: bool = False) -> list[StanceLabel]:
        labels: list[StanceLabel] = []
        for batch in self._batches(texts):
            rid = self._next_id()
            req = {"id": rid, "task": "stance", "texts": batch, "masking": masking}
            result = self._roundtrip([req])[rid]
            raw = result.get("labels")
            if not isinstance(raw, list) or len(raw) != len(batch):
                raise TransportError(
                    f"stance result has {len(raw or [])} labels for {len(batch)} texts",
                    batch_id=rid,
                )
            try:
                labels.extend(StanceLabel(x) for x in raw)
            except ValueError as e:
                raise TransportError(f"bad stance label: {e}", batch_id=rid) from e
        return labels

    def ner(self, texts: list[str]) -> list[list[dict]]:
        out: list[list[dict]] = []
        for batch in self._batches(texts):
            rid = self._next_id()
            result = self._roundtrip([{"id": rid, "task": "ner", "texts": batch}])[rid]
            ents = result.get("entities")
            if not isinstance(ents, list) or len(ents) != len(batch):
                raise TransportError(
                    f"ner result has {len(ents or [])} entries for {len(batch)} texts",
                    batch_id=rid,
                )
            out.extend(ents)
        return out

    def m3(self, rows: list[dict]) -> list[dict]:
        out: list[dict] = []
        for i in range(0, len(rows), self.batch_size):
            batch = rows[i:i + self.batch_size]
            rid = self._next_id()
            result = self._roundtrip([{"id": rid, "task": "m3", "rows": batch}])[rid]
            pred = result.get("rows")
            if not isinstance(pred, list) or len(pred) != len(batch):
                raise TransportError(
                    f"m3 result has {len(pred or [])} rows for {len(batch)} inputs",
                    batch_id=rid,
                )
            out.extend(pred)
        return out
