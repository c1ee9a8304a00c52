"""Golden NDJSON transcripts: parsing and tolerant comparison.

A transcript is a text file replayed against a live server:

  # comment            ignored, as are blank lines
  < {...}              expected server -> client line (handshake, responses)
  > {...}              client -> server request, sent as serialized JSON
  >raw <anything>      client -> server line sent verbatim (malformed cases)

Replays compare parsed JSON, exact on every non-float leaf and within a
tolerance on floats, so a transcript survives harmless float formatting
differences but nothing else.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
import json

FLOAT_TOL = 1e-6


@dataclass(frozen=True)
class Event:
    direction: str  # "in" = client -> server, "out" = server -> client
    raw: str
    obj: object | None


def load_transcript(path: str | Path) -> list[Event]:
    events = []
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        if line.startswith(">raw "):
            events.append(Event("in", line[5:], None))
        elif line.startswith("> "):
            events.append(Event("in", line[2:], json.loads(line[2:])))
        elif line.startswith("< "):
            events.append(Event("out", line[2:], json.loads(line[2:])))
        else:
            raise ValueError(f"{path}:{n}: expected '#', '> ', '>raw ' or '< ' prefix")
    if not events or events[0].direction != "out":
        raise ValueError(f"{path}: transcript must open with the server handshake")
    return events


def first_difference(expected, got, tol: float = FLOAT_TOL, path: str = "$") -> str | None:
    """Where two parsed JSON values first diverge, None when they agree.

    Floats match within tol (ints are acceptable in float positions);
    everything else must be equal, including container shapes. Bools
    are exact, never numeric.
    """
    if isinstance(expected, bool) or isinstance(got, bool):
        if expected is not got:
            return f"{path}: expected {expected!r}, got {got!r}"
        return None
    if isinstance(expected, float) or isinstance(got, float):
        if not isinstance(expected, (int, float)) or not isinstance(got, (int, float)):
            return f"{path}: expected {expected!r}, got {got!r}"
        if abs(expected - got) > tol:
            return f"{path}: |{expected!r} - {got!r}| > {tol}"
        return None
    if type(expected) is not type(got):
        return f"{path}: expected {type(expected).__name__}, got {type(got).__name__}"
    if isinstance(expected, dict):
        if expected.keys() != got.keys():
            return f"{path}: key sets differ: {sorted(expected)} vs {sorted(got)}"
        for key in expected:
            diff = first_difference(expected[key], got[key], tol, f"{path}.{key}")
            if diff:
                return diff
        return None
    if isinstance(expected, list):
        if len(expected) != len(got):
            return f"{path}: length {len(expected)} vs {len(got)}"
        for i, (e, g) in enumerate(zip(expected, got)):
            diff = first_difference(e, g, tol, f"{path}[{i}]")
            if diff:
                return diff
        return None
    if expected != got:
        return f"{path}: expected {expected!r}, got {got!r}"
    return None
