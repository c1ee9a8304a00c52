"""Regenerate the golden transcripts under protocol/golden/.

Run from the repository root after any deliberate stub or protocol
change, then review the diff like any other contract change:

    python sidecar/scripts/record_goldens.py

Floats are rounded to 9 decimals before freezing, well inside the 1e-6
replay tolerance, to keep the files reviewable.
"""

from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[2]
OUT = ROOT / "protocol" / "golden"

# scenario name -> (header comment, [(kind, payload), ...])
# kind "json" sends a serialized object, "raw" sends the string verbatim
SCENARIOS = {
    "handshake": ("Startup handshake only; the server speaks first.", []),
    "embed": ("Embedding vectors: dim matches the handshake, one vector per text.", [
        ("json", {"id": "embed-1", "task": "embed", "texts": [
            "Remdesivir trial results look promising for severe cases",
            "my pharmacy ran out of ivermectin again",
        ]}),
        ("json", {"id": "embed-2", "task": "embed", "texts": [
            "no drug mention at all in this one",
        ]}),
    ]),
    "stance": ("Stance labels and probability triples; masked mode second.", [
        ("json", {"id": "stance-1", "task": "stance", "texts": [
            "Hydroxychloroquine is a miracle cure, I am telling you",
            "hcq killed my neighbor, stop pushing it",
            "CDC has not decided anything about molnupiravir yet",
        ]}),
        # same sentence frame, two different drugs: masked probs must agree
        ("json", {"id": "stance-2", "task": "stance", "masking": True, "texts": [
            "Ivermectin cured me in two days flat",
            "Remdesivir cured me in two days flat",
        ]}),
    ]),
    "ner": ("Entity spans, 4-class.", [
        ("json", {"id": "ner-1", "task": "ner", "texts": [
            "Dr Fauci told CNN that Merck stopped the trial",
            "nothing capitalized here",
        ]}),
    ]),
    "m3": ("Demographic probability rows keyed like the m3 predictions file.", [
        ("json", {"id": "m3-1", "task": "m3", "rows": [
            {"user_id": "u1", "name": "Ada Q", "bio": "ICU nurse, mom of two"},
            {"user_id": "u2", "name": "Covid Facts Daily", "bio": "news aggregator"},
        ]}),
    ]),
    "errors": ("Every error envelope the server can produce, one per line.", [
        ("json", {"id": "err-1", "task": "translate", "texts": ["hola"]}),
        ("raw", "this line is not json"),
        ("raw", '{"id": 7, "task": "embed", "texts": ["x"]}'),
        ("json", {"id": "err-2", "task": "embed"}),
        ("json", {"id": "err-3", "task": "stance", "texts": []}),
        ("json", {"id": "err-4", "task": "stance", "texts": ["ok"], "masking": "yes"}),
        ("json", {"id": "err-5", "task": "ner", "texts": ["ok", 4]}),
        ("json", {"id": "err-6", "task": "m3", "rows": "not-a-list"}),
    ]),
}


def _round_floats(line: str) -> str:
    obj = json.loads(line, parse_float=lambda s: round(float(s), 9))
    return json.dumps(obj, separators=(",", ":"))


def record(name: str, header: str, sends: list[tuple[str, object]]) -> None:
    proc = subprocess.Popen(
        [sys.executable, "-m", "pulse_sidecar"],
        stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True, bufsize=1,
    )
    lines = [f"# {header}"]
    try:
        handshake = proc.stdout.readline()
        lines.append("< " + _round_floats(handshake))
        for kind, payload in sends:
            if kind == "raw":
                raw = str(payload)
                lines.append(">raw " + raw)
            else:
                raw = json.dumps(payload, separators=(",", ":"))
                lines.append("> " + raw)
            proc.stdin.write(raw + "\n")
            proc.stdin.flush()
            lines.append("< " + _round_floats(proc.stdout.readline()))
    finally:
        proc.stdin.close()
        proc.wait(timeout=10)
    path = OUT / f"{name}.transcript"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {path.relative_to(ROOT)} ({len(lines)} lines)")


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    for name, (header, sends) in SCENARIOS.items():
        record(name, header, sends)


if __name__ == "__main__":
    main()
